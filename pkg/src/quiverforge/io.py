"""Instance loading, validation, and deterministic report serialization.

Schemas (all JSON documents may carry "schema": "qf-1"):

quiver      {"vertices": [ids], "arrows": [{"id", "tail", "head",
             "twist_dim"?, "twist_weight"?}]}; twist_weight is the row-major
             matrix with [re, im] entries.
rep         {"dims": {vertex: int}, "arrows": {arrow: [slice matrices]}};
             a matrix is rows of [re, im] pairs.
params      {"sigma": {vertex: real}, "tau": {vertex: real}}
relations   {"relations": [{"terms": [{"coeff": [re, im],
             "path": [arrow ids, target-to-source]}]}]}
system      {"degrees": {vertex: int}, "weights": {arrow: {"kind":
             "constant"|"bump", ...}}, "N": int}

Reports are exported with sorted keys and %.17g floats so identical runs
produce identical bytes.  The vortex output binary starts with the magic
b"QVTX1", then uint32 N and uint32 vertex count, then the row-major float64
potential fields in sorted vertex order (little endian).
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import SchemaError
from .quiver import Arrow, Path, Quiver, Relation, TwistSpec
from .reps import TwistedRep, build_rep
from .stability import StabilityParams
from .torus import TorusSystem, WeightSpec, build_torus_system

SCHEMA_TAG = "qf-1"


# ---------------------------------------------------------------------------
# primitive codecs


def _decode_complex(value, errs, ptr):
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) for x in value)
    ):
        return complex(value[0], value[1])
    if isinstance(value, (int, float)):
        return complex(value, 0.0)
    errs.append((ptr, "expected [re, im] pair"))
    return 0j


def _decode_matrix(rows, errs, ptr):
    if not isinstance(rows, list):
        errs.append((ptr, "expected a matrix (list of rows)"))
        return np.zeros((0, 0), dtype=complex)
    out = []
    width = None
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            errs.append((f"{ptr}/{i}", "expected a row (list of entries)"))
            return np.zeros((0, 0), dtype=complex)
        if width is None:
            width = len(row)
        elif len(row) != width:
            errs.append((f"{ptr}/{i}", "ragged matrix"))
            return np.zeros((0, 0), dtype=complex)
        out.append([_decode_complex(x, errs, f"{ptr}/{i}/{j}") for j, x in enumerate(row)])
    if not out:
        return np.zeros((0, 0), dtype=complex)
    return np.asarray(out, dtype=complex)


def encode_complex(z: complex):
    return [float(np.real(z)), float(np.imag(z))]


def encode_matrix(m: np.ndarray):
    m = np.asarray(m)
    return [[encode_complex(m[i, j]) for j in range(m.shape[1])] for i in range(m.shape[0])]


# ---------------------------------------------------------------------------
# section decoders (collect all errors; raise once)


def decode_quiver(doc: Mapping, errs: list, ptr: str = "/quiver"):
    vertices = doc.get("vertices")
    if not isinstance(vertices, list) or not all(isinstance(v, str) for v in vertices):
        errs.append((f"{ptr}/vertices", "expected a list of vertex ids"))
        return None, None
    arrows = []
    mult = {}
    weight = {}
    vset = set(vertices)
    for i, a in enumerate(doc.get("arrows", [])):
        aptr = f"{ptr}/arrows/{i}"
        if not isinstance(a, dict):
            errs.append((aptr, "expected an arrow object"))
            continue
        name = a.get("id")
        if not isinstance(name, str):
            errs.append((f"{aptr}/id", "missing arrow id"))
            continue
        tail, head = a.get("tail"), a.get("head")
        if tail not in vset:
            errs.append((f"{aptr}/tail", f"unknown vertex {tail!r}"))
        if head not in vset:
            errs.append((f"{aptr}/head", f"unknown vertex {head!r}"))
        if tail not in vset or head not in vset:
            continue
        arrows.append(Arrow(name, tail, head))
        m = int(a.get("twist_dim", 1))
        if m < 1:
            errs.append((f"{aptr}/twist_dim", "twist dimension must be >= 1"))
            m = 1
        mult[name] = m
        if "twist_weight" in a:
            q = _decode_matrix(a["twist_weight"], errs, f"{aptr}/twist_weight")
            if q.shape != (m, m):
                errs.append((f"{aptr}/twist_weight", f"expected {m}x{m} matrix"))
            else:
                weight[name] = q
        else:
            weight[name] = np.eye(m, dtype=complex)
    if errs:
        return None, None
    try:
        quiver = Quiver(tuple(vertices), tuple(arrows))
        twist = TwistSpec(mult, weight)
    except Exception as exc:  # surfaced as schema errors with a pointer
        errs.append((ptr, str(exc)))
        return None, None
    return quiver, twist


def decode_rep(doc: Mapping, quiver: Quiver, twist: TwistSpec, errs: list, ptr: str = "/rep"):
    dims_doc = doc.get("dims")
    if not isinstance(dims_doc, dict):
        errs.append((f"{ptr}/dims", "expected an object of vertex dims"))
        return None
    dims = {}
    for v, d in dims_doc.items():
        if v not in set(quiver.vertices):
            errs.append((f"{ptr}/dims/{v}", f"unknown vertex {v!r}"))
            continue
        dims[v] = int(d)
    slices = {}
    for a, mats in (doc.get("arrows") or {}).items():
        aptr = f"{ptr}/arrows/{a}"
        if a not in {x.name for x in quiver.arrows}:
            errs.append((aptr, f"unknown arrow {a!r}"))
            continue
        if not isinstance(mats, list):
            errs.append((aptr, "expected a list of slice matrices"))
            continue
        slices[a] = [_decode_matrix(m, errs, f"{aptr}/{k}") for k, m in enumerate(mats)]
    if errs:
        return None
    try:
        return build_rep(quiver, twist, dims, slices)
    except Exception as exc:
        errs.append((ptr, str(exc)))
        return None


def decode_params(doc: Mapping, errs: list, ptr: str = "/params"):
    sigma = doc.get("sigma")
    tau = doc.get("tau")
    if not isinstance(sigma, dict) or not isinstance(tau, dict):
        errs.append((ptr, "expected sigma and tau objects"))
        return None
    try:
        return StabilityParams(
            {v: float(s) for v, s in sigma.items()},
            {v: float(t) for v, t in tau.items()},
        )
    except Exception as exc:
        errs.append((ptr, str(exc)))
        return None


def decode_relations(doc: Mapping, quiver: Quiver, errs: list, ptr: str = "/relations"):
    rels = []
    for i, r in enumerate(doc.get("relations", [])):
        terms = []
        for j, t in enumerate(r.get("terms", [])):
            tptr = f"{ptr}/{i}/terms/{j}"
            coeff = _decode_complex(t.get("coeff", [1.0, 0.0]), errs, f"{tptr}/coeff")
            names = t.get("path")
            if not isinstance(names, list) or not names:
                errs.append((f"{tptr}/path", "expected a nonempty arrow list"))
                continue
            try:
                terms.append((coeff, Path(quiver, tuple(names))))
            except Exception as exc:
                errs.append((f"{tptr}/path", str(exc)))
        if not errs and terms:
            try:
                rels.append(Relation(tuple(terms)))
            except Exception as exc:
                errs.append((f"{ptr}/{i}", str(exc)))
    return rels if not errs else None


def decode_system(doc: Mapping, quiver: Quiver, params: StabilityParams, errs: list, ptr: str = "/system"):
    n = doc.get("N")
    if not isinstance(n, int):
        errs.append((f"{ptr}/N", "expected an integer grid resolution"))
        return None
    degrees = {}
    for v, d in (doc.get("degrees") or {}).items():
        if v not in set(quiver.vertices):
            errs.append((f"{ptr}/degrees/{v}", f"unknown vertex {v!r}"))
            continue
        degrees[v] = int(d)
    weights = {}
    for a, w in (doc.get("weights") or {}).items():
        aptr = f"{ptr}/weights/{a}"
        if a not in {x.name for x in quiver.arrows}:
            errs.append((aptr, f"unknown arrow {a!r}"))
            continue
        if isinstance(w, (int, float)):
            weights[a] = WeightSpec("constant", value=float(w))
            continue
        if not isinstance(w, dict):
            errs.append((aptr, "expected a weight spec object or number"))
            continue
        kind = w.get("kind", "constant")
        if kind == "constant":
            weights[a] = WeightSpec("constant", value=float(w.get("value", 1.0)))
        elif kind == "bump":
            p = w.get("params", {})
            weights[a] = WeightSpec(
                "bump",
                amplitude=float(p.get("amplitude", 1.0)),
                width=float(p.get("width", 0.5)),
                center=tuple(p.get("center", (0.5, 0.5))),
                floor=float(p.get("floor", 0.0)),
            )
        else:
            errs.append((f"{aptr}/kind", f"unknown weight kind {kind!r}"))
    if errs:
        return None
    try:
        return build_torus_system(quiver, degrees, weights, params, n)
    except Exception as exc:
        errs.append((ptr, str(exc)))
        return None


# ---------------------------------------------------------------------------
# bundles


@dataclass
class InstanceBundle:
    quiver: Quiver | None = None
    twist: TwistSpec | None = None
    rep: TwistedRep | None = None
    params: StabilityParams | None = None
    system: TorusSystem | None = None
    relations: list[Relation] | None = None
    options: dict = field(default_factory=dict)


def _merge_docs(paths, text):
    docs = []
    if text is not None:
        docs.append(("<stdin>", json.loads(text)))
    for p in paths or []:
        with open(p, "r", encoding="utf-8") as fh:
            docs.append((str(p), json.load(fh)))
    merged: dict[str, Any] = {}
    for _, doc in docs:
        if not isinstance(doc, dict):
            raise SchemaError([("/", "top-level document must be an object")])
        # a bare section file is recognized by its distinctive keys
        if "vertices" in doc and "quiver" not in doc:
            merged.setdefault("quiver", doc)
        elif "dims" in doc and "rep" not in doc:
            merged.setdefault("rep", doc)
        elif "sigma" in doc and "params" not in doc:
            merged.setdefault("params", doc)
        elif "N" in doc and "system" not in doc:
            merged.setdefault("system", doc)
        elif "relations" in doc and len(doc.keys() - {"schema", "relations"}) == 0:
            merged.setdefault("relations", doc)
        else:
            for key in ("quiver", "rep", "params", "system", "relations", "options"):
                if key in doc:
                    merged.setdefault(key, doc[key])
    return merged


def load_instance(paths=None, text=None) -> InstanceBundle:
    """Load and cross-validate an instance from files and/or a JSON string.

    All validation problems are collected and raised together as one
    :class:`SchemaError` whose entries carry JSON-pointer-style paths.
    """
    merged = _merge_docs(paths, text)
    errs: list = []
    bundle = InstanceBundle(options=dict(merged.get("options", {})))
    if "quiver" in merged:
        bundle.quiver, bundle.twist = decode_quiver(merged["quiver"], errs)
    if "params" in merged:
        bundle.params = decode_params(merged["params"], errs)
    if bundle.quiver is not None and bundle.params is not None:
        for v in bundle.quiver.vertices:
            if v not in bundle.params.sigma:
                errs.append((f"/params/sigma/{v}", "missing vertex"))
            if v not in bundle.params.tau:
                errs.append((f"/params/tau/{v}", "missing vertex"))
    if "rep" in merged:
        if bundle.quiver is None:
            errs.append(("/rep", "representation given without a quiver"))
        elif not errs:
            bundle.rep = decode_rep(merged["rep"], bundle.quiver, bundle.twist, errs)
    if "relations" in merged:
        if bundle.quiver is None:
            errs.append(("/relations", "relations given without a quiver"))
        elif not errs:
            rel_doc = merged["relations"]
            if isinstance(rel_doc, list):
                rel_doc = {"relations": rel_doc}
            bundle.relations = decode_relations(rel_doc, bundle.quiver, errs)
    if "system" in merged:
        if bundle.quiver is None or bundle.params is None:
            errs.append(("/system", "system needs a quiver and params"))
        elif not errs:
            bundle.system = decode_system(merged["system"], bundle.quiver, bundle.params, errs)
    if errs:
        raise SchemaError(errs)
    return bundle


# ---------------------------------------------------------------------------
# encoders for reports


def encode_quiver(quiver: Quiver, twist: TwistSpec | None = None):
    arrows = []
    for a in quiver.arrows:
        entry = {"id": a.name, "tail": a.tail, "head": a.head}
        if twist is not None:
            m = twist.rank(a.name)
            entry["twist_dim"] = m
            q = twist.metric(a.name)
            if m != 1 or abs(q[0, 0] - 1.0) > 1e-15:
                entry["twist_weight"] = encode_matrix(q)
        arrows.append(entry)
    return {"schema": SCHEMA_TAG, "vertices": list(quiver.vertices), "arrows": arrows}


def encode_rep(rep: TwistedRep):
    return {
        "schema": SCHEMA_TAG,
        "dims": {v: rep.dims[v] for v in rep.quiver.vertices},
        "arrows": {
            a.name: [encode_matrix(s) for s in rep.slices[a.name]]
            for a in rep.quiver.arrows
        },
    }


def encode_params(params: StabilityParams):
    return {"schema": SCHEMA_TAG, "sigma": dict(params.sigma), "tau": dict(params.tau)}


def encode_metric(metric) -> dict:
    return {v: encode_matrix(m) for v, m in metric.h.items()}


def encode_witness(witness) -> dict:
    return {v: encode_matrix(b) for v, b in witness.basis.items()}


# ---------------------------------------------------------------------------
# deterministic export


def _format_float(x: float) -> str:
    return "%.17g" % x


def _render_json(obj, out: list[str]):
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (np.floating,)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _render_json(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _render_json(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def export_report(report, fmt: str = "json") -> bytes:
    """Deterministic bytes: sorted keys, %.17g floats; csv rows for lists."""
    if fmt == "json":
        out: list[str] = []
        _render_json(report, out)
        return "".join(out).encode()
    if fmt == "csv":
        header = report.get("columns", [])
        rows = report.get("rows", [])
        lines = [",".join(header)]
        for row in rows:
            cells = []
            for x in row:
                if isinstance(x, float) or isinstance(x, np.floating):
                    cells.append(_format_float(float(x)))
                else:
                    cells.append(str(x))
            lines.append(",".join(cells))
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")


def flow_log_csv(report) -> bytes:
    return export_report(
        {
            "columns": ["iter", "kempf_ness", "residual_norm", "step", "s_norm"],
            "rows": [list(row) for row in report.iter_log],
        },
        "csv",
    )


def newton_log_csv(result) -> bytes:
    return export_report(
        {
            "columns": ["iter", "sup_residual", "damping"],
            "rows": [list(row) for row in result.history],
        },
        "csv",
    )


# ---------------------------------------------------------------------------
# vortex potential binary

QVTX_MAGIC = b"QVTX1"


def write_potential_binary(path, state, vertex_order=None) -> None:
    vertices = sorted(state.u) if vertex_order is None else list(vertex_order)
    n = next(iter(state.u.values())).shape[0]
    with open(path, "wb") as fh:
        fh.write(QVTX_MAGIC)
        fh.write(struct.pack("<II", n, len(vertices)))
        for v in vertices:
            fh.write(np.ascontiguousarray(state.u[v], dtype="<f8").tobytes())


def read_potential_binary(path, vertex_order):
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != QVTX_MAGIC:
            raise SchemaError([("/", f"bad magic {magic!r}")])
        n, count = struct.unpack("<II", fh.read(8))
        if count != len(vertex_order):
            raise SchemaError([("/", f"vertex count {count} != {len(vertex_order)}")])
        out = {}
        for v in vertex_order:
            buf = fh.read(8 * n * n)
            out[v] = np.frombuffer(buf, dtype="<f8").reshape(n, n).copy()
    return out
