"""Acceptance criteria at their stated tolerances; each prints one PASS/FAIL line.

The heavy studies (space and time accuracy, time-grid study) take several
minutes each on one core.
"""
import functools
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (
    RobinSubdomainOracle, SmallSubdomain, dense_ventcel_step, robin_oswr_oracle,
    tangential_trace_oracle,
)
from test_local_ventcel import build as build_small_subdomain
from test_mhfe import gauss_oracle_2d
from ventcel_oswr.experiments import (
    fitted_slopes, resolve_config, run_calibration, run_table1, run_table2, run_timegrid_study,
)
from ventcel_oswr.interface_solver import build_interface_problem
from ventcel_oswr.local_ventcel import TransmissionParams
from ventcel_oswr.mesh import build_decomposed_mesh, build_mesh
from ventcel_oswr.mhfe import element_matrix_2d
from ventcel_oswr.monodomain import compute_errors, restrict, solve_monodomain
from ventcel_oswr.params import build_params, optimize_parameters
from ventcel_oswr.problem import ProblemSpec, Subdomain, testcase1_spec, testcase2_spec
from ventcel_oswr.timegrid import SpaceTimeTrace, TimeGrid, project
from ventcel_oswr.vtv import tangential_trace_sum


def verdict(capsys, label, checks):
    """``checks`` is a list of ``(ok, text)``; prints one line and asserts all."""
    ok = all(c for c, _ in checks)
    failed = [t for c, t in checks if not c]
    detail = "; ".join(failed) if failed else "; ".join(t for _, t in checks)
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, detail


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


@functools.lru_cache(maxsize=None)
def space_rows():
    cfg = resolve_config("table1", {"mesh": {"n": [20, 40, 80]}, "solver": {"methods": ["jacobi"]}})
    t = time.time()
    rows = run_table1(cfg)
    return rows, time.time() - t


@functools.lru_cache(maxsize=None)
def time_rows():
    cfg = resolve_config("table2", {"solver": {"methods": ["jacobi"]}})
    t = time.time()
    rows = run_table2(cfg)
    return rows, time.time() - t


def test_c1_space_accuracy(capsys):
    rows, secs = space_rows()
    checks = []
    for r, ce, pe in zip(rows, [0.0641, 0.0321, 0.0160], [0.0453, 0.0227, 0.0114]):
        n = round(1 / r["h"])
        checks.append((within(r["c_error"], ce, 0.05), f"h=1/{n} c {r['c_error']:.4f} vs {ce}"))
        checks.append((within(r["phi_error"], pe, 0.05), f"h=1/{n} phi {r['phi_error']:.4f} vs {pe}"))
    for r in rows[1:]:
        checks.append((abs(r["c_rate"] - 1.0) <= 0.1, f"c rate {r['c_rate']:.3f}"))
    checks.append((True, f"{secs:.0f}s"))
    verdict(capsys, "C1 space accuracy", checks)


def test_c2_time_accuracy(capsys):
    rows, secs = time_rows()
    checks = []
    for r, ce in zip(rows, [0.1859, 0.0708, 0.0301, 0.0145]):
        checks.append((within(r["c_error"], ce, 0.05), f"dt2={r['dt2']:.4f} c {r['c_error']:.4f} vs {ce}"))
    for r, cr, pr in zip(rows[1:], [1.39, 1.23, 1.05], [1.39, 1.24, 1.12]):
        checks.append((abs(r["c_rate"] - cr) <= 0.15, f"c rate {r['c_rate']:.3f} vs {cr}"))
        checks.append((abs(r["phi_rate"] - pr) <= 0.15, f"phi rate {r['phi_rate']:.3f} vs {pr}"))
    checks.append((True, f"{secs:.0f}s"))
    verdict(capsys, "C2 time accuracy (h=1/200)", checks)


def test_c3_iteration_bands(capsys):
    checks = []
    for label, rows in (("space", space_rows()[0]), ("time", time_rows()[0])):
        for r in rows:
            w, rb = r["jacobi_ventcel_weighted"], r["jacobi_robin"]
            tag = f"{label} h={r['h']:.3g} dt2={r['dt2']:.3g}"
            if label == "space":
                checks.append((0 < w <= 16, f"{tag} weighted {w}"))
                checks.append((18 <= rb <= 30, f"{tag} robin {rb}"))
            checks.append((0 < w <= 0.7 * rb, f"{tag} weighted/robin {w}/{rb}"))
    one = [r["jacobi_ventcel_one_sided"] for r in time_rows()[0]]
    checks.append((min(one) > 0 and max(one) - min(one) <= 2, f"one-sided over dt sweep {one}"))
    verdict(capsys, "C3 Jacobi iteration bands", checks)


def test_c4_dd_equals_monodomain(capsys):
    spec = testcase1_spec()
    n = 40
    g = TimeGrid.uniform(spec.T, 40)
    mesh = build_mesh(spec.domain, n, n)
    m1, m2, iface = build_decomposed_mesh(spec, n, n)
    p, q, _ = optimize_parameters("ventcel_weighted", spec, 1 / n, g.dt[0])
    prob = build_interface_problem(spec, n, n, g, g, build_params("ventcel_weighted", p, q, spec, iface))
    x, rep = prob.solve("gmres", tol=1e-8, max_iter=200)
    t1, t2 = prob.reconstruct(x)
    mono = solve_monodomain(spec, mesh, g)
    ec, ep = compute_errors([t1.final, t2.final], [m1, m2], reference=restrict(mono.final, mesh, m1, m2))
    verdict(capsys, "C4 DD vs monodomain", [(rep.converged, f"gmres {rep.iterations} its"),
                                             (ec <= 1e-6, f"c rel diff {ec:.2e}"),
                                             (True, f"phi rel diff {ep:.2e}")])


def robin_reduction_case(a12, a21, steps):
    spec = ProblemSpec(T=0.3, interface_x=0.5,
                       sub1=Subdomain(1.0, 0.8, (0.6, 0.4)), sub2=Subdomain(1.5, 0.3, (0.2, -0.5)),
                       source=lambda x, y, t: (1 + t) * (1 + x * y - y**3),
                       initial=lambda x, y: x * (1 - x) * y * (1 - y))
    params = (TransmissionParams(a12, 0.0, "robin"), TransmissionParams(a21, 0.0, "robin"))
    g1, g2 = TimeGrid.uniform(spec.T, steps[0]), TimeGrid.uniform(spec.T, steps[1])
    prob = build_interface_problem(spec, 4, 3, g1, g2, params)
    K = 25
    x, rep = prob.solve_jacobi(tol=0.0, max_iter=K)
    t1, t2 = prob.reconstruct(x)

    def coeffs(s):
        return dict(omega=s.omega, dxx=s.d_diag[0], dyy=s.d_diag[1], vel=s.velocity_at)

    o1 = RobinSubdomainOracle(SmallSubdomain(0, 0.5, 0, 1, 2, 3, True), coeffs(spec.sub1), a12, a21,
                              spec.source, spec.initial)
    o2 = RobinSubdomainOracle(SmallSubdomain(0.5, 1, 0, 1, 2, 3, False), coeffs(spec.sub2), a21, a12,
                              spec.source, spec.initial)
    res, (c1, c2), _ = robin_oswr_oracle(o1, o2, g1.breakpoints, g2.breakpoints, K)
    dres = float(np.max(np.abs(np.asarray(rep.residuals) - res)))
    dc = float(max(np.abs(t1.final.c - c1).max(), np.abs(t2.final.c - c2).max()))
    return dres, dc


def test_c5_robin_reduction(capsys):
    worst = [0.0, 0.0]

    @settings(max_examples=6, deadline=None, derandomize=True)
    @given(a12=st.lists(st.floats(0.5, 5), min_size=3, max_size=3),
           a21=st.lists(st.floats(0.5, 5), min_size=3, max_size=3),
           steps=st.tuples(st.integers(2, 7), st.integers(2, 7)))
    def check(a12, a21, steps):
        dres, dc = robin_reduction_case(np.array(a12), np.array(a21), steps)
        worst[0], worst[1] = max(worst[0], dres), max(worst[1], dc)
        assert dres <= 1e-10 and dc <= 1e-10

    try:
        check()
        ok = True
    except AssertionError:
        ok = False
    verdict(capsys, "C5 Robin reduction", [(ok and worst[0] <= 1e-10, f"max residual diff {worst[0]:.1e}"),
                                            (ok and worst[1] <= 1e-10, f"max c diff {worst[1]:.1e}")])


def random_grid(u, T):
    pts = np.unique(np.round(np.asarray(u) * T, 12))
    return TimeGrid(np.concatenate([[0.0], pts[(pts > 0) & (pts < T)], [T]]))


def test_c6_time_projection(capsys):
    stats = {"conservation": 0.0, "roundtrip": 0.0, "bounds": 0.0}
    grids = st.lists(st.floats(0.01, 0.99), max_size=12)

    @settings(max_examples=80, deadline=None, derandomize=True)
    @given(a=grids, b=grids, k=st.integers(1, 4), seed=st.integers(0, 2**31))
    def check(a, b, k, seed):
        rng = np.random.default_rng(seed)
        g1, g2 = random_grid(a, 1.3), random_grid(b, 1.3)
        v = rng.normal(size=(g1.steps, 3))
        tr = SpaceTimeTrace(g1, v)
        out = project(tr, g2)
        rel = np.abs(out.time_integral() - tr.time_integral()) / np.abs(g1.dt[:, None] * v).sum(axis=0)
        stats["conservation"] = max(stats["conservation"], float(rel.max()))
        excess = max((out.values - v.max(axis=0)).max(), (v.min(axis=0) - out.values).max())
        stats["bounds"] = max(stats["bounds"], float(excess))
        t = g1.breakpoints
        fine = TimeGrid(np.append((t[:-1, None] + np.arange(k) / k * np.diff(t)[:, None]).ravel(), 1.3))
        back = project(project(tr, fine), g1)
        stats["roundtrip"] = max(stats["roundtrip"], float(np.abs(back.values - v).max()))
        assert rel.max() <= 1e-14 and excess <= 1e-13 and stats["roundtrip"] <= 1e-13

    try:
        check()
        ok = True
    except AssertionError:
        ok = False
    g = TimeGrid.uniform(0.5, 9)
    v = np.random.default_rng(0).normal(size=(9, 4))
    ident = np.array_equal(project(SpaceTimeTrace(g, v), TimeGrid.uniform(0.5, 9)).values, v)
    verdict(capsys, "C6 time projection", [
        (ok and stats["conservation"] <= 1e-14, f"conservation {stats['conservation']:.1e}"),
        (ident, "identity bit-exact"),
        (ok and stats["roundtrip"] <= 1e-13, f"round trip {stats['roundtrip']:.1e}"),
        (ok and stats["bounds"] <= 1e-13, f"min/max excess {stats['bounds']:.1e}"),
    ])


def test_c7_element_and_assembly_oracles(capsys):
    rng = np.random.default_rng(7)
    worst_a = 0.0
    for _ in range(50):
        hx, hy = rng.uniform(0.01, 3, 2)
        dxx, dyy = rng.uniform(1e-3, 10, 2)
        ref = gauss_oracle_2d(hx, hy, dxx, dyy)
        worst_a = max(worst_a, np.abs(element_matrix_2d(hx, hy, dxx, dyy) - ref).max() / np.abs(ref).max())

    worst_s = 0.0
    for right in (True, False):
        for beta in (0.3, 0.0):
            sub, geo, coeffs = build_small_subdomain(1, 2, right, beta)  # two cells
            prev = sub.initial_state()
            prev.c = rng.normal(size=2)
            prev.lam[sub.mesh.interface_edges] = rng.normal(size=2)
            zeta = rng.normal(size=2)

            def source(x, y, t):
                return np.sin(3 * x + t) * np.cos(2 * y)

            new = sub.step(0.07, prev, zeta, source, 0.4)
            ref = dense_ventcel_step(geo, coeffs, 0.07, prev.c, prev.lam[sub.mesh.interface_edges], zeta,
                                     sub.source_integrals(source, 0.4))
            for key in ("c", "flux", "phi_gamma", "xi"):
                scale = max(1.0, np.abs(ref[key]).max())
                worst_s = max(worst_s, np.abs(getattr(new, key) - ref[key]).max() / scale)

    worst_t = 0.0
    for ny in range(1, 8):
        lengths = rng.uniform(0.05, 0.5, ny)
        phi = rng.normal(size=(ny, 2))
        xi = np.concatenate([[0.0], rng.normal(size=ny - 1), [0.0]])
        u_own, u_nb = rng.normal(size=(ny, 2)), rng.normal(size=(ny, 2))
        d_own, d_nb = rng.uniform(0.1, 3, ny), rng.uniform(0.1, 3, ny)
        ref = tangential_trace_oracle(lengths, phi, xi, u_own, u_nb, d_own, d_nb)
        got = tangential_trace_sum(phi, xi, u_own, u_nb, d_own, d_nb)
        worst_t = max(worst_t, np.abs(got - ref).max() / max(1.0, np.abs(ref).max()))
    verdict(capsys, "C7 element/assembly oracles", [
        (worst_a <= 1e-12, f"element matrix {worst_a:.1e}"),
        (worst_s <= 1e-12, f"two-cell step {worst_s:.1e}"),
        (worst_t <= 1e-12, f"tangential trace {worst_t:.1e}"),
    ])


def test_c8_nonconforming_time_grids(capsys):
    cfg = resolve_config("fig5", {"mesh": {"n": [100]}})
    t = time.time()
    rows = run_timegrid_study(cfg)
    secs = time.time() - t
    checks = [(all(r["converged"] for r in rows), "all solves converged")]
    for key in ("c_error", "phi_error"):
        for k, s in fitted_slopes(rows, key).items():
            checks.append((0.85 <= s <= 1.15, f"{key[:-6]} slope grid {k} {s:.3f}"))
        for level in sorted({r["level"] for r in rows}):
            e = {r["grid"]: r[key] for r in rows if r["level"] == level}
            checks.append((within(e[3], e[4], 0.10), f"{key[:-6]} L{level} g3/g4 {e[3] / e[4]:.3f}"))
            checks.append((within(e[2], e[1], 0.10), f"{key[:-6]} L{level} g2/g1 {e[2] / e[1]:.3f}"))
    checks.append((True, f"{secs:.0f}s"))
    verdict(capsys, "C8 nonconforming time grids (h=1/100)", checks)


@pytest.mark.parametrize("method", ["jacobi", "gmres"])
def test_c9_calibration_surface(capsys, method):
    cfg = resolve_config("fig4", {"solver": {"method": method}})
    result, _ = run_calibration(cfg)
    spec = testcase2_spec("c", homogeneous=True)
    n = cfg["mesh"]["n"][0]
    _, _, iface = build_decomposed_mesh(spec, n, n)
    g1 = TimeGrid.uniform(spec.T, cfg["time"]["steps1"])
    g2 = TimeGrid.uniform(spec.T, cfg["time"]["steps2"])

    def iterations(p, q):
        prob = build_interface_problem(spec, n, n, g1, g2, build_params("ventcel_weighted", p, q, spec, iface))
        _, rep = prob.solve(method, rhs=np.zeros(prob.size), x0=prob.random_guess(0), tol=1e-6, max_iter=200)
        return rep.iterations if rep.converged else np.inf

    best = iterations(result.best_p, result.best_q)
    P, Q = result.p_values, result.q_values
    corners = [iterations(P[i], Q[j]) for i in (0, -1) for j in (0, -1)]
    verdict(capsys, f"C9 calibration surface ({method})", [
        (result.is_interior(), f"argmin {result.best_index} of {result.errors.shape}"),
        (best < min(corners), f"iterations best {best} vs corners {corners}"),
    ])
