"""Exception hierarchy with stable machine-readable codes (used by the CLI)."""


class QuiverforgeError(Exception):
    """Base class; ``code`` is stable across releases."""

    code = "error"


class NonComposable(QuiverforgeError):
    code = "non_composable"


class LengthOverflow(QuiverforgeError):
    """A path-algebra product produced a term beyond the configured truncation
    length.  Signals the truncation boundary, not a mathematical error."""

    code = "length_overflow"


class TwistedRelationUnsupported(QuiverforgeError):
    code = "twisted_relation_unsupported"


class TwistedModuleUnsupported(QuiverforgeError):
    code = "twisted_module_unsupported"


class ShapeMismatch(QuiverforgeError):
    code = "shape_mismatch"


class QuiverMismatch(QuiverforgeError):
    code = "quiver_mismatch"


class VertexSetMismatch(QuiverforgeError):
    code = "vertex_set_mismatch"


class DimensionOverflow(QuiverforgeError):
    code = "dimension_overflow"


class ZeroTotalRank(QuiverforgeError):
    code = "zero_total_rank"


class NonpositiveScale(QuiverforgeError):
    code = "nonpositive_scale"


class SingularMetric(QuiverforgeError):
    code = "singular_metric"


class IllConditionedSpectrum(QuiverforgeError):
    code = "ill_conditioned_spectrum"


class InadmissibleParameters(QuiverforgeError):
    code = "inadmissible_parameters"


class NotDivergent(QuiverforgeError):
    """Destabilizer extraction requires a divergent flow report."""

    code = "not_divergent"


class NoSeparation(QuiverforgeError):
    """The limiting endomorphism has no spectral gap above threshold.

    Carries the raw spectrum so callers can inspect it.
    """

    code = "no_separation"

    def __init__(self, message, spectrum=None):
        super().__init__(message)
        self.spectrum = spectrum


class NotASolution(QuiverforgeError):
    code = "not_a_solution"


class GaugeViolation(QuiverforgeError):
    code = "gauge_violation"


class NewtonStall(QuiverforgeError):
    """Damped Newton could not decrease the sup residual any further.

    Expected on vortex-unstable data; carries the best state reached and the
    residual history for diagnosis.
    """

    code = "newton_stall"

    def __init__(self, message, best_state=None, history=None):
        super().__init__(message)
        self.best_state = best_state
        self.history = history or []


class NotFlatCase(QuiverforgeError):
    code = "not_flat_case"


class UnsupportedDegrees(QuiverforgeError):
    code = "unsupported_degrees"


class SchemaError(QuiverforgeError):
    """Instance validation failure; ``errors`` lists every problem found,
    each as a (json_pointer, message) pair."""

    code = "schema_error"

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{ptr}: {msg}" for ptr, msg in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s): {lines}")
