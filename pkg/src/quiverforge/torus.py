"""Abelian quiver vortex equations on a flat 2-torus, solved spectrally.

Line bundles only: with metrics H_v = K_v e^{2 u_v} the per-vertex equation
becomes a coupled Kazdan-Warner system for the real potentials u_v,

    sigma_v (2 pi d_v - lap u_v)
        + sum_{head(a)=v} w_a e^{2(u_head - u_tail)}
        - sum_{tail(a)=v} w_a e^{2(u_head - u_tail)}  =  tau_v,

where d_v are the bundle degrees, w_a >= 0 the fixed arrow weight fields,
and lap the periodic spectral Laplacian.

SIGN CONVENTION (the one place it is fixed): ``lap`` is the analysts'
Laplacian, Fourier symbol -4 pi^2 |k|^2, negative semidefinite, and the
curvature function of H_v = K_v e^{2 u_v} is

    i Lambda F_{H_v} = 2 pi d_v - lap(u_v).

The minus sign is the geometric one (a metric weight e^{2u} with u
subharmonic has nonnegative curvature) and is pinned operationally by the
Yang-Mills-Higgs energy-splitting identity in :func:`ymh_identity`, which
fails with the opposite orientation.  Volume is normalized to 1 and the
background curvature constant 2 pi d_v makes the degree of each vertex
bundle equal to 2 pi d_v.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    GaugeViolation,
    InadmissibleParameters,
    NewtonStall,
    NotASolution,
    NotFlatCase,
    ShapeMismatch,
    UnsupportedDegrees,
)
from .flow import FlowOptions, flow_solve
from .quiver import Quiver, TwistSpec
from .reps import build_rep
from .stability import StabilityParams

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """N x N periodic grid on the unit-volume torus (N a power of two)."""

    n: int

    def __post_init__(self):
        n = self.n
        if n < 4 or (n & (n - 1)) != 0:
            raise ShapeMismatch(f"grid resolution must be a power of two >= 4, got {n}")
        k = np.fft.fftfreq(n) * n
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        sym = -4.0 * np.pi**2 * (k1**2 + k2**2)
        for name, val in (("_k1", k1), ("_k2", k2), ("_lap_sym", sym)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    def lap(self, f: np.ndarray) -> np.ndarray:
        return np.real(np.fft.ifft2(self._lap_sym * np.fft.fft2(f)))

    def dx(self, f: np.ndarray) -> np.ndarray:
        return np.fft.ifft2(2j * np.pi * self._k1 * np.fft.fft2(f))

    def dy(self, f: np.ndarray) -> np.ndarray:
        return np.fft.ifft2(2j * np.pi * self._k2 * np.fft.fft2(f))

    def dbar(self, f: np.ndarray) -> np.ndarray:
        return 0.5 * (self.dx(f) + 1j * self.dy(f))

    def dhol(self, f: np.ndarray) -> np.ndarray:
        return 0.5 * (self.dx(f) - 1j * self.dy(f))

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(np.real(f)))

    def solve_lap(self, f: np.ndarray) -> np.ndarray:
        """Mean-zero solution of lap(u) = f - mean(f)."""
        fh = np.fft.fft2(f)
        sym = self._lap_sym.copy()
        sym[0, 0] = 1.0
        fh = fh / sym
        fh[0, 0] = 0.0
        return np.real(np.fft.ifft2(fh))

    def coordinates(self):
        x = np.arange(self.n) / self.n
        return np.meshgrid(x, x, indexing="ij")


@dataclass(frozen=True)
class WeightSpec:
    """Constructor for an arrow weight field.

    ``constant`` fields model genuinely flat data; ``bump`` fields are
    smooth positive periodic stand-ins for section magnitudes and are
    flagged synthetic in reports.
    """

    kind: str  # "constant" | "bump"
    value: float = 1.0
    amplitude: float = 1.0
    width: float = 0.5
    center: tuple[float, float] = (0.5, 0.5)
    floor: float = 0.0

    def realize(self, grid: TorusGrid) -> np.ndarray:
        if self.kind == "constant":
            if self.value < 0:
                raise ShapeMismatch("constant weight must be nonnegative")
            return np.full((grid.n, grid.n), float(self.value))
        if self.kind == "bump":
            if self.amplitude < 0 or self.floor < 0:
                raise ShapeMismatch("bump weight must be nonnegative")
            x, y = grid.coordinates()
            phase = (
                np.cos(TWO_PI * (x - self.center[0]))
                + np.cos(TWO_PI * (y - self.center[1]))
                - 2.0
            )
            return self.floor + self.amplitude * np.exp(phase / self.width**2)
        raise ShapeMismatch(f"unknown weight kind {self.kind!r}")

    @property
    def synthetic(self) -> bool:
        return self.kind != "constant"


@dataclass(frozen=True)
class TorusSystem:
    quiver: Quiver
    grid: TorusGrid
    degrees: Mapping[str, int]
    weights: Mapping[str, np.ndarray]
    params: StabilityParams
    weight_specs: Mapping[str, WeightSpec] | None = None

    def admissibility_defect(self) -> float:
        return float(
            sum(self.params.sigma[v] * TWO_PI * self.degrees[v] for v in self.quiver.vertices)
            - sum(self.params.tau[v] for v in self.quiver.vertices)
        )


def build_torus_system(
    quiver: Quiver,
    degrees: Mapping[str, int],
    weights: Mapping[str, "WeightSpec | np.ndarray | float"],
    params: StabilityParams,
    n: int,
    admissibility_tol: float = 1e-10,
) -> TorusSystem:
    """Validated line-bundle system; refuses inadmissible parameters."""
    grid = TorusGrid(n)
    degs = {v: int(degrees.get(v, 0)) for v in quiver.vertices}
    fields: dict[str, np.ndarray] = {}
    specs: dict[str, WeightSpec] = {}
    for a in quiver.arrows:
        w = weights.get(a.name, 0.0)
        if isinstance(w, WeightSpec):
            specs[a.name] = w
            w = w.realize(grid)
        elif np.isscalar(w):
            specs[a.name] = WeightSpec("constant", value=float(w))
            w = np.full((n, n), float(w))
        else:
            w = np.asarray(w, dtype=float)
            if w.shape != (n, n):
                raise ShapeMismatch(f"weight field for arrow {a.name!r} has wrong shape")
            specs[a.name] = WeightSpec("bump")  # free-form fields count as synthetic
        if w.min() < 0:
            raise ShapeMismatch(f"weight field for arrow {a.name!r} is negative somewhere")
        w = np.array(w)
        w.flags.writeable = False
        fields[a.name] = w
    defect = float(
        sum(params.sigma[v] * TWO_PI * degs[v] for v in quiver.vertices)
        - sum(params.tau[v] for v in quiver.vertices)
    )
    if abs(defect) > admissibility_tol * (1.0 + sum(abs(params.tau[v]) for v in quiver.vertices)):
        raise InadmissibleParameters(
            f"sum sigma 2 pi d - sum tau = {defect:.6e} violates admissibility"
        )
    return TorusSystem(quiver, grid, degs, fields, params, specs)


@dataclass(frozen=True)
class PotentialState:
    """One real scalar potential per vertex; H_v = K_v e^{2 u_v}."""

    u: Mapping[str, np.ndarray]

    def __post_init__(self):
        cleaned = {}
        for v, f in self.u.items():
            f = np.array(f, dtype=float)
            f.flags.writeable = False
            cleaned[v] = f
        object.__setattr__(self, "u", cleaned)


def gauge_defect(system: TorusSystem, state: PotentialState) -> float:
    return float(
        sum(system.params.sigma[v] * system.grid.mean(state.u[v]) for v in system.quiver.vertices)
    )


def gauge_fix(system: TorusSystem, u: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    sig = system.params.sigma
    shift = sum(sig[v] * system.grid.mean(u[v]) for v in system.quiver.vertices) / sum(
        sig[v] for v in system.quiver.vertices
    )
    return {v: u[v] - shift for v in system.quiver.vertices}


def _arrow_exponents(system: TorusSystem, u: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {
        a.name: system.weights[a.name] * np.exp(2.0 * (u[a.head] - u[a.tail]))
        for a in system.quiver.arrows
    }


def vortex_residual(system: TorusSystem, state: PotentialState, gauge_tol: float = 1e-8):
    """Per-vertex residual field of the coupled system (gauge-fixed input)."""
    if abs(gauge_defect(system, state)) > gauge_tol:
        raise GaugeViolation(
            f"state violates the trace gauge by {gauge_defect(system, state):.3e}"
        )
    return _residual_fields(system, state.u)


def _residual_fields(system: TorusSystem, u: Mapping[str, np.ndarray]):
    grid = system.grid
    sig, tau = system.params.sigma, system.params.tau
    coupling = _arrow_exponents(system, u)
    out = {
        v: sig[v] * (TWO_PI * system.degrees[v] - grid.lap(u[v])) - tau[v]
        for v in system.quiver.vertices
    }
    for a in system.quiver.arrows:
        out[a.head] = out[a.head] + coupling[a.name]
        out[a.tail] = out[a.tail] - coupling[a.name]
    return out


def residual_integral_defect(system: TorusSystem, residual: Mapping[str, np.ndarray]) -> float:
    """Unweighted vertex sum of residual means; equals the admissibility
    defect for every state because the arrow terms telescope."""
    return float(sum(system.grid.mean(residual[v]) for v in system.quiver.vertices))


def _sup(residual: Mapping[str, np.ndarray]) -> float:
    return max(float(np.abs(r).max()) for r in residual.values())


@dataclass
class VortexResult:
    state: PotentialState
    sup_residual: float
    iterations: int
    history: list[tuple[int, float, float]] = field(repr=False, default_factory=list)
    states: list[PotentialState] | None = None


def _jacobian_apply(system, coupling, delta):
    grid = system.grid
    sig = system.params.sigma
    out = {v: -sig[v] * grid.lap(delta[v]) for v in system.quiver.vertices}
    for a in system.quiver.arrows:
        c = 2.0 * coupling[a.name] * (delta[a.head] - delta[a.tail])
        out[a.head] = out[a.head] + c
        out[a.tail] = out[a.tail] - c
    return out


def _pcg(system, coupling, b, rtol, max_iter):
    """Preconditioned CG for the (positive semidefinite) Newton operator.

    Preconditioner: per-vertex spectral inverse of -sigma lap + mean
    diagonal coupling; the operator's kernel (the all-ones direction) is
    removed from the right-hand side up front and by the final gauge fix.
    """
    grid = system.grid
    verts = list(system.quiver.vertices)
    diag = {v: 0.0 for v in verts}
    for a in system.quiver.arrows:
        m = 2.0 * grid.mean(coupling[a.name])
        diag[a.head] += m
        diag[a.tail] += m
    sym = {}
    for v in verts:
        denom = -system.params.sigma[v] * grid._lap_sym + max(diag[v], 1e-8)
        sym[v] = denom

    def precond(r):
        return {v: np.real(np.fft.ifft2(np.fft.fft2(r[v]) / sym[v])) for v in verts}

    # project the all-ones kernel component out of b
    total = sum(grid.mean(b[v]) for v in verts) / len(verts)
    b = {v: b[v] - total for v in verts}

    x = {v: np.zeros_like(b[v]) for v in verts}
    r = dict(b)
    z = precond(r)
    p = dict(z)
    rz = sum(grid.mean(r[v] * z[v]) for v in verts)
    b_norm = np.sqrt(sum(grid.mean(b[v] ** 2) for v in verts))
    if b_norm == 0:
        return x
    for _ in range(max_iter):
        ap = _jacobian_apply(system, coupling, p)
        pap = sum(grid.mean(p[v] * ap[v]) for v in verts)
        if pap <= 0:
            break
        alpha = rz / pap
        x = {v: x[v] + alpha * p[v] for v in verts}
        r = {v: r[v] - alpha * ap[v] for v in verts}
        r_norm = np.sqrt(sum(grid.mean(r[v] ** 2) for v in verts))
        if r_norm <= rtol * b_norm:
            break
        z = precond(r)
        rz_new = sum(grid.mean(r[v] * z[v]) for v in verts)
        beta = rz_new / rz
        rz = rz_new
        p = {v: z[v] + beta * p[v] for v in verts}
    return x


def solve_vortex(
    system: TorusSystem,
    tol: float = 1e-8,
    max_newton: int = 30,
    cg_rtol: float = 1e-12,
    cg_max_iter: int = 800,
    record_states: bool = False,
    initial: PotentialState | None = None,
) -> VortexResult:
    """Damped Newton on the gauge-fixed potentials.

    Raises :class:`NewtonStall` (with the best state and residual history)
    when no damping factor down to 2^-20 decreases the sup residual --
    the expected signature of vortex-unstable data.
    """
    grid = system.grid
    verts = list(system.quiver.vertices)
    if initial is None:
        u = {v: np.zeros((grid.n, grid.n)) for v in verts}
    else:
        u = gauge_fix(system, {v: np.array(initial.u[v]) for v in verts})
    history: list[tuple[int, float, float]] = []
    states: list[PotentialState] = []
    res = _residual_fields(system, u)
    sup = _sup(res)
    history.append((0, sup, 1.0))
    if record_states:
        states.append(PotentialState(u))
    for it in range(1, max_newton + 1):
        if sup <= tol:
            break
        coupling = _arrow_exponents(system, u)
        delta = _pcg(system, coupling, {v: -res[v] for v in verts}, cg_rtol, cg_max_iter)
        # return to the gauge tangent (the CG kernel direction is free)
        shift = sum(system.params.sigma[v] * grid.mean(delta[v]) for v in verts) / sum(
            system.params.sigma[v] for v in verts
        )
        delta = {v: delta[v] - shift for v in verts}
        damping = 1.0
        while True:
            trial = {v: u[v] + damping * delta[v] for v in verts}
            trial_res = _residual_fields(system, trial)
            trial_sup = _sup(trial_res)
            if trial_sup < sup:
                break
            damping *= 0.5
            if damping < 2.0**-20:
                raise NewtonStall(
                    f"sup residual stuck at {sup:.3e}",
                    best_state=PotentialState(gauge_fix(system, u)),
                    history=history,
                )
        u, res, sup = trial, trial_res, trial_sup
        history.append((it, sup, damping))
        if record_states:
            states.append(PotentialState(u))
    if sup > tol:
        raise NewtonStall(
            f"no convergence in {max_newton} Newton steps (sup residual {sup:.3e})",
            best_state=PotentialState(gauge_fix(system, u)),
            history=history,
        )
    state = PotentialState(gauge_fix(system, u))
    return VortexResult(
        state=state,
        sup_residual=sup,
        iterations=len(history) - 1,
        history=history,
        states=states if record_states else None,
    )


# ---------------------------------------------------------------------------
# Yang-Mills-Higgs energy splitting


@dataclass(frozen=True)
class YmhReport:
    lhs: float
    rhs: float
    mismatch: float
    satisfied: bool
    synthetic_weights: bool = False


def ymh_identity(
    system: TorusSystem,
    state: PotentialState,
    phi_fields: Mapping[str, np.ndarray],
    tol: float = 1e-6,
) -> YmhReport:
    """Energy-splitting identity for the Yang-Mills-Higgs functional.

    LHS: sum_v sigma_v |F_v|^2 + 2 sum_a |d_A phi_a|^2
         + sum_v sigma_v^{-1} |U_v - tau_v|^2;
    RHS: 4 sum_a |dbar_A phi_a|^2 + 4 pi sum_v tau_v d_v
         + sum_v sigma_v^{-1} |vortex residual_v|^2.

    Complex dimension one (no second Chern character term) and flat twist
    metrics (no twist-curvature term).  Arrow weights are recomputed as
    |phi_a|^2 pointwise so both sides see the same data; arrows without a
    phi field contribute zero.  Phi fields are genuine periodic sections
    only between degree-zero vertices, hence the precondition.
    """
    grid = system.grid
    sig, tau = system.params.sigma, system.params.tau
    for name in phi_fields:
        a = system.quiver.arrow(name)
        if system.degrees[a.tail] != 0 or system.degrees[a.head] != 0:
            raise UnsupportedDegrees(
                f"phi field on arrow {name!r} needs degree-zero endpoints"
            )
    u = state.u
    f_curv = {
        v: TWO_PI * system.degrees[v] - grid.lap(u[v]) for v in system.quiver.vertices
    }
    # coupling terms from the phi magnitudes
    big_u = {v: np.zeros((grid.n, grid.n)) for v in system.quiver.vertices}
    kinetic = 0.0
    dbar_term = 0.0
    for a in system.quiver.arrows:
        phi = phi_fields.get(a.name)
        if phi is None:
            continue
        phi = np.asarray(phi, dtype=complex)
        rho = 2.0 * (u[a.head] - u[a.tail])
        erho = np.exp(rho)
        w_h = np.abs(phi) ** 2 * erho
        big_u[a.head] = big_u[a.head] + w_h
        big_u[a.tail] = big_u[a.tail] - w_h
        dbar_a = 2.0 * grid.mean(np.abs(grid.dbar(phi)) ** 2 * erho)
        dhol_a = 2.0 * grid.mean(np.abs(grid.dhol(phi) + phi * grid.dhol(rho)) ** 2 * erho)
        dbar_term += dbar_a
        kinetic += dbar_a + dhol_a
    curv_term = sum(sig[v] * grid.mean(f_curv[v] ** 2) for v in system.quiver.vertices)
    mm_term = sum(
        grid.mean((big_u[v] - tau[v]) ** 2) / sig[v] for v in system.quiver.vertices
    )
    resid_term = sum(
        grid.mean((sig[v] * f_curv[v] + big_u[v] - tau[v]) ** 2) / sig[v]
        for v in system.quiver.vertices
    )
    topological = 4.0 * np.pi * sum(
        tau[v] * system.degrees[v] for v in system.quiver.vertices
    )
    lhs = curv_term + 2.0 * kinetic + mm_term
    rhs = 4.0 * dbar_term + topological + resid_term
    mismatch = abs(lhs - rhs) / (1.0 + abs(lhs))
    synthetic = any(
        spec.synthetic for spec in (system.weight_specs or {}).values()
    )
    return YmhReport(float(lhs), float(rhs), float(mismatch), mismatch <= tol, synthetic)


# ---------------------------------------------------------------------------
# flat-case reduction to the point-scale flow


@dataclass(frozen=True)
class FlatCaseResult:
    rep: object
    flow_report: object
    vortex: VortexResult
    sup_difference: float


def flat_case_reduce(system: TorusSystem, flow_opts: FlowOptions | None = None) -> FlatCaseResult:
    """All-degree-zero constant-weight systems reduce to a point-scale
    representation with |phi_a|^2 = w_a; the torus solution must be the
    constant lift of the point-scale metric."""
    for v in system.quiver.vertices:
        if system.degrees[v] != 0:
            raise NotFlatCase(f"vertex {v!r} has nonzero degree")
    consts = {}
    for a in system.quiver.arrows:
        w = system.weights[a.name]
        if float(np.ptp(w)) > 1e-12 * (1.0 + float(np.abs(w).max())):
            raise NotFlatCase(f"weight on arrow {a.name!r} is not constant")
        consts[a.name] = float(np.mean(w))
    quiver = system.quiver
    slices = {
        a.name: [np.array([[np.sqrt(consts[a.name])]], dtype=complex)]
        for a in quiver.arrows
    }
    rep = build_rep(quiver, TwistSpec.trivial(quiver), {v: 1 for v in quiver.vertices}, slices)
    opts = flow_opts or FlowOptions(tol=1e-12)
    report = flow_solve(rep, system.params, opts)
    if not report.converged:
        raise NotASolution(
            f"point-scale flow did not converge (status {report.status})"
        )
    vortex = solve_vortex(system)
    sup_diff = 0.0
    for v in quiver.vertices:
        u_point = 0.5 * float(np.log(np.real(report.final_metric.h[v][0, 0])))
        sup_diff = max(sup_diff, float(np.abs(vortex.state.u[v] - u_point).max()))
    return FlatCaseResult(rep, report, vortex, sup_diff)
