"""End-to-end acceptance suite: every criterion at its stated tolerance,
one pass/fail line each (printed in the terminal summary)."""
import itertools

import numpy as np

import quiverforge as qf
from quiverforge.gallery import (
    chain_quiver,
    grid_quiver,
    grid_relations,
    kronecker_quiver,
    two_way_quiver,
)
from quiverforge.quiver import PathAlgebraElement, algebra_product, basis_paths
from quiverforge.reps import from_module, to_module
from quiverforge.torus import PotentialState, WeightSpec, _residual_fields, gauge_fix, residual_integral_defect

from conftest import (
    geodesic_energy,
    h_selfadjoint_direction,
    jordan_params,
    jordan_rep,
    kronecker_params,
    kronecker_rep,
    random_smooth_field,
    random_two_vertex_instance,
    record_criterion,
    two_arrow_kron_rep,
)


def test_criterion_1_hk_dichotomy_kronecker_family():
    ok = True
    for phi, t in ((1.0, 0.5), (2.0, 1.0), (1 + 1j, 2.5)):
        rep = kronecker_rep(phi=phi)
        rpt = qf.flow_solve(rep, kronecker_params(t=t))
        ok &= rpt.converged and rpt.residual_norm <= 1e-10
        h = rpt.final_metric.h
        ratio = (h["2"][0, 0] / h["1"][0, 0]).real
        ok &= abs(ratio - t / abs(phi) ** 2) <= 1e-8
    for phi, t, sigma2 in ((1.0, -0.5, 1.0), (2.0, -2.0, 2.0)):
        rep = kronecker_rep(phi=phi)
        params = qf.StabilityParams({"1": 1.0, "2": sigma2}, {"1": -t, "2": t})
        rpt = qf.flow_solve(rep, params)
        ok &= rpt.status == "diverged"
        if rpt.status == "diverged":
            steps = qf.destabilizer_extract(rep, params, rpt)
            dims = [s.witness.dims for s in steps]
            ok &= {"1": 0, "2": 1} in dims
            if ok:
                step = steps[dims.index({"1": 0, "2": 1})]
                ok &= abs(step.slope - abs(t) / sigma2) <= 1e-9
    record_criterion("1", ok)


def test_criterion_2_jordan_nilpotent():
    rep, params = jordan_rep(), jordan_params()
    rpt = qf.flow_solve(rep, params)
    ok = rpt.status == "diverged"
    if ok:
        steps = qf.destabilizer_extract(rep, params, rpt)
        ok &= len(steps) == 1 and steps[0].witness.dims == {"v": 1}
        basis = steps[0].witness.basis["v"]
        e1 = np.array([[1.0], [0.0]], dtype=complex)
        angle = np.arccos(min(1.0, abs((e1.conj().T @ basis)[0, 0])))
        ok &= angle <= 1e-6
        ok &= abs(steps[0].slope - 0.0) <= 1e-12
    verdict = qf.stability_oracle(rep, params)
    ok &= verdict.tag == "strictly-semistable"
    record_criterion("2", ok)


def test_criterion_3_polystable_sums():
    ok = True
    params = kronecker_params(t=1.0)
    families = [
        [(1.0, 0.0), (0.0, 1.0)],
        [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
    ]
    for phis in families:
        reps = [two_arrow_kron_rep(p) for p in phis]
        summed = reps[0]
        for r in reps[1:]:
            summed = qf.direct_sum(summed, r)
        runs = []
        for seed in (1, 2):
            rpt = qf.flow_solve(summed, params, qf.FlowOptions(seed=seed, init_scale=0.5))
            ok &= rpt.converged and rpt.residual_norm <= 1e-10
            runs.append(rpt.final_metric.h)
        if not ok:
            break
        h1, h2 = runs
        n = len(phis)
        for k in range(n):
            lam = (h1["1"][k, k] / h2["1"][k, k]).real
            for v in ("1", "2"):
                dev = abs(h1[v][k, k] - lam * h2[v][k, k]) / abs(h1[v][k, k])
                ok &= dev <= 1e-8
                for j in range(n):
                    if j != k:
                        ok &= abs(h1[v][k, j]) <= 1e-8 and abs(h2[v][k, j]) <= 1e-8
    record_criterion("3", ok)


def test_criterion_4_sigma_invariance():
    sigmas = ({"1": 1.0, "2": 1.0}, {"1": 2.0, "2": 3.0}, {"1": 5.0, "2": 1.0})
    ok = True
    for seed in range(100):
        rep, tau = random_two_vertex_instance(5000 + seed)
        statuses, tags = set(), set()
        for sigma in sigmas:
            params = qf.StabilityParams(sigma, tau)
            statuses.add(qf.flow_solve(rep, params).status)
            tags.add(qf.stability_oracle(rep, params, qf.OracleOptions(seed=0)).tag)
        ok &= len(statuses) == 1 and len(tags) == 1
        if not ok:
            break
    record_criterion("4", ok)


def test_criterion_5_gradient_and_convexity():
    rng = np.random.default_rng(10)
    ok = True
    for seed in range(50):
        rep, tau = random_two_vertex_instance(7000 + seed)
        params = qf.StabilityParams({"1": 1.0, "2": 1.0}, tau)
        s = {v: qf._linalg.random_hermitian(rng, rep.dims[v], 0.4) for v in rep.quiver.vertices}
        metric = qf.MetricState.from_log(s)
        g = qf.kempf_ness_gradient(rep, s, params)
        u = h_selfadjoint_direction(metric, rng)
        pair = sum(float(np.real(np.trace(g[v] @ u[v]))) for v in rep.quiver.vertices)
        h = 1e-5
        fd = (
            geodesic_energy(rep, metric, params, u, h)
            - geodesic_energy(rep, metric, params, u, -h)
        ) / (2 * h)
        ok &= abs(pair - fd) <= 1e-6 * (1 + abs(fd))
    for seed in range(50):
        rep, tau = random_two_vertex_instance(8000 + seed)
        params = qf.StabilityParams({"1": 1.0, "2": 1.0}, tau)
        s = {v: qf._linalg.random_hermitian(rng, rep.dims[v], 0.3) for v in rep.quiver.vertices}
        metric = qf.MetricState.from_log(s)
        u = h_selfadjoint_direction(metric, rng)
        h = 1e-4
        second = (
            geodesic_energy(rep, metric, params, u, h)
            - 2 * geodesic_energy(rep, metric, params, u, 0.0)
            + geodesic_energy(rep, metric, params, u, -h)
        ) / h**2
        ok &= second >= -1e-9
    record_criterion("5", ok)


def test_criterion_6_scaling_covariance():
    rng = np.random.default_rng(4)
    ok = True
    rep, tau = random_two_vertex_instance(42)
    s = {v: qf._linalg.random_hermitian(rng, rep.dims[v], 0.4) for v in rep.quiver.vertices}
    metric = qf.MetricState.from_log(s)
    params = qf.StabilityParams({"1": 1.0, "2": 1.0}, tau)
    m1 = qf.moment_map_residual(rep, metric, params)
    for c in (0.5, 2.0, 10.0):
        scaled_params = qf.StabilityParams({"1": c, "2": c}, {v: c * tv for v, tv in tau.items()})
        scaled_rep = qf.build_rep(
            rep.quiver,
            rep.twist,
            rep.dims,
            {a.name: [np.sqrt(c) * sl for sl in rep.slices[a.name]] for a in rep.quiver.arrows},
        )
        m2 = qf.moment_map_residual(scaled_rep, metric, scaled_params)
        for v in m1:
            scale = 1 + c * np.abs(m1[v]).max()
            ok &= np.abs(m2[v] - c * m1[v]).max() <= 1e-12 * scale
    record_criterion("6", ok)


def test_criterion_7_subrep_degree_identity():
    ok = True
    # solved Kronecker with the head-line witness
    rep = kronecker_rep(phi=1.0)
    params = kronecker_params(t=1.0)
    rpt = qf.flow_solve(rep, params)
    w = qf.SubrepWitness({"1": np.zeros((1, 0)), "2": np.eye(1, dtype=complex)})
    ok &= qf.subrep_degree_identity(rep, rpt.final_metric, w, params) <= 1e-8
    # solved two-summand instance with a summand witness
    summed = qf.direct_sum(two_arrow_kron_rep((1.0, 0.0)), two_arrow_kron_rep((0.0, 1.0)))
    rpt2 = qf.flow_solve(summed, params)
    w2 = qf.SubrepWitness(
        {"1": np.eye(2, dtype=complex)[:, :1], "2": np.eye(2, dtype=complex)[:, :1]}
    )
    ok &= qf.check_subrep(summed, w2)[0]
    ok &= qf.subrep_degree_identity(summed, rpt2.final_metric, w2, params) <= 1e-8
    record_criterion("7", ok)


def test_criterion_8_tensor_product_metric():
    ok = True
    # opposite-direction Kronecker factors
    qa = qf.Quiver.from_lists(["1", "2"], [("a", "1", "2")])
    qb = qf.Quiver.from_lists(["1", "2"], [("b", "2", "1")])
    ra = qf.build_rep(qa, None, {"1": 1, "2": 1}, {"a": [np.array([[1.0]])]})
    rb = qf.build_rep(qb, None, {"1": 1, "2": 1}, {"b": [np.array([[1.5]])]})
    pa = qf.StabilityParams({"1": 1.0, "2": 1.0}, {"1": -1.0, "2": 1.0})
    pb = qf.StabilityParams({"1": 1.0, "2": 1.0}, {"1": 2.25, "2": -2.25})
    fa, fb = qf.flow_solve(ra, pa), qf.flow_solve(rb, pb)
    ok &= fa.converged and fb.converged
    prod = qf.tensor_product(ra, rb)
    tau = {v: pa.tau[v] + pb.tau[v] for v in ("1", "2")}
    pp = qf.StabilityParams({"1": 1.0, "2": 1.0}, tau)
    metric = qf.MetricState(
        {v: np.kron(fa.final_metric.h[v], fb.final_metric.h[v]) for v in ("1", "2")}
    )
    res = qf.residual_norm_h(prod, metric, qf.moment_map_residual(prod, metric, pp))
    ok &= res <= 1e-8
    # loop factors with dims (2,1) x (1,2)
    rng = np.random.default_rng(0)
    ql1 = qf.Quiver.from_lists(["1", "2"], [("c", "1", "1")])
    ql2 = qf.Quiver.from_lists(["1", "2"], [("d", "2", "2")])
    r1 = qf.build_rep(ql1, None, {"1": 2, "2": 1}, {"c": [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))]})
    r2 = qf.build_rep(ql2, None, {"1": 1, "2": 2}, {"d": [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))]})
    p0 = qf.StabilityParams({"1": 1.0, "2": 1.0}, {"1": 0.0, "2": 0.0})
    f1, f2 = qf.flow_solve(r1, p0), qf.flow_solve(r2, p0)
    ok &= f1.converged and f2.converged
    prod2 = qf.tensor_product(r1, r2)
    metric2 = qf.MetricState(
        {v: np.kron(f1.final_metric.h[v], f2.final_metric.h[v]) for v in ("1", "2")}
    )
    res2 = qf.residual_norm_h(prod2, metric2, qf.moment_map_residual(prod2, metric2, p0))
    ok &= res2 <= 1e-8
    record_criterion("8", ok)


def test_criterion_9_torus_solver():
    ok = True
    q = kronecker_quiver(1)
    t, c = 3.0, 0.75
    params = qf.StabilityParams({"1": 1.0, "2": 1.0}, {"1": -t, "2": t})
    system = qf.build_torus_system(q, {"1": 0, "2": 0}, {"a0": c}, params, 64)
    result = qf.solve_vortex(system, tol=1e-11, record_states=True)
    want = 0.25 * np.log(t / c)
    ok &= np.abs(result.state.u["1"] + want).max() <= 1e-10
    ok &= np.abs(result.state.u["2"] - want).max() <= 1e-10
    # bump weights: Newton budget and residual, identity at every iterate
    spec = WeightSpec("bump", amplitude=1.0, width=0.4, center=(0.3, 0.6), floor=0.05)
    system_b = qf.build_torus_system(q, {"1": 0, "2": 0}, {"a0": spec}, params, 64)
    rb = qf.solve_vortex(system_b, record_states=True)
    ok &= rb.iterations <= 20 and rb.sup_residual <= 1e-8
    for st in rb.states:
        defect = residual_integral_defect(system_b, _residual_fields(system_b, st.u))
        ok &= abs(defect) <= 1e-10
    # grid refinement
    system_f = qf.build_torus_system(q, {"1": 0, "2": 0}, {"a0": spec}, params, 128)
    rf = qf.solve_vortex(system_f)
    diff = max(np.abs(rf.state.u[v][::2, ::2] - rb.state.u[v]).max() for v in ("1", "2"))
    ok &= diff <= 1e-5
    record_criterion("9", ok)


def test_criterion_10_flat_case_reduction():
    ok = True
    q1 = kronecker_quiver(1)
    params1 = qf.StabilityParams({"1": 1.0, "2": 1.0}, {"1": -2.0, "2": 2.0})
    sys1 = qf.build_torus_system(q1, {"1": 0, "2": 0}, {"a0": 0.5}, params1, 64)
    ok &= qf.flat_case_reduce(sys1).sup_difference <= 1e-8
    q2 = two_way_quiver()
    params2 = qf.StabilityParams({"1": 1.3, "2": 0.9}, {"1": -0.5, "2": 0.5 * 1.0})
    sys2 = qf.build_torus_system(
        q2, {"1": 0, "2": 0}, {"a": 1.4, "b": 0.9}, params2, 64
    )
    ok &= qf.flat_case_reduce(sys2).sup_difference <= 1e-8
    record_criterion("10", ok)


def test_criterion_11_ymh_identity():
    rng = np.random.default_rng(77)
    q = two_way_quiver()
    params = qf.StabilityParams({"1": 1.1, "2": 0.7}, {"1": 0.3, "2": -0.3})
    system = qf.build_torus_system(q, {"1": 0, "2": 0}, {"a": 1.0, "b": 1.0}, params, 128)
    ok = True
    for _ in range(3):
        u = gauge_fix(
            system,
            {
                "1": random_smooth_field(rng, 128, modes=4, scale=0.8),
                "2": random_smooth_field(rng, 128, modes=4, scale=0.8),
            },
        )
        phi = {
            "a": random_smooth_field(rng, 128, modes=4, scale=1.0, complex_valued=True),
            "b": random_smooth_field(rng, 128, modes=4, scale=1.0, complex_valued=True),
        }
        report = qf.ymh_identity(system, PotentialState(u), phi)
        ok &= report.mismatch <= 1e-6
    record_criterion("11", ok)


def test_criterion_12_algebra_layer():
    ok = True
    # associativity and unit, exact, on all admissible basis triples
    for quiver in (chain_quiver(4), grid_quiver(2, 3), grid_quiver(3, 3, triangular=True)):
        assert quiver.is_acyclic()
        L = 6
        paths = [p for p in basis_paths(quiver, L)]
        one = PathAlgebraElement.unit(quiver, L)
        for p in paths:
            ep = PathAlgebraElement.from_path(p, max_length=L)
            ok &= algebra_product(one, ep).terms == ep.terms
            ok &= algebra_product(ep, one).terms == ep.terms
        for p, r, s in itertools.product(paths, repeat=3):
            if len(p) + len(r) + len(s) > L:
                continue
            ep = PathAlgebraElement.from_path(p, max_length=L)
            er = PathAlgebraElement.from_path(r, max_length=L)
            es = PathAlgebraElement.from_path(s, max_length=L)
            ok &= (
                algebra_product(algebra_product(ep, er), es).terms
                == algebra_product(ep, algebra_product(er, es)).terms
            )
    # module round trip, exact
    rng = np.random.default_rng(9)
    q = chain_quiver(2)
    dims = {"0": 2, "1": 3, "2": 1}
    slices = {
        a.name: [rng.normal(size=(dims[a.head], dims[a.tail])) + 1j * rng.normal(size=(dims[a.head], dims[a.tail]))]
        for a in q.arrows
    }
    rep = qf.build_rep(q, None, dims, slices)
    back = from_module(to_module(rep))
    ok &= back.dims == rep.dims
    for a in q.arrows:
        ok &= bool(np.array_equal(back.slices[a.name][0], rep.slices[a.name][0]))
    # commuting grid data: relation residual zero; perturbed: > 0.1
    grid = grid_quiver(3, 3)
    rels = grid_relations(grid)
    X = np.array([[0.0, 1.0], [0.0, 0.0]])
    Y = 3.0 * X + np.eye(2)  # commutes with X
    mk = lambda yy: qf.build_rep(
        grid,
        None,
        {v: 2 for v in grid.vertices},
        {
            a.name: [X if a.name.startswith("a1") else yy]
            for a in grid.arrows
        },
    )
    commuting = mk(Y)
    ok &= all(r.residual == 0.0 for r in qf.check_relations(commuting, rels))
    perturbed = mk(Y + 0.5 * X.T)
    ok &= all(r.residual > 0.1 for r in qf.check_relations(perturbed, rels))
    record_criterion("12", ok)
