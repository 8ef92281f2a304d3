"""Drivers for the accuracy, convergence, calibration and time-grid studies.

Every driver takes a configuration dictionary with the sections
``problem``, ``mesh``, ``time``, ``params``, ``solver`` and ``output``,
returns its rows as a list of dicts and optionally writes them as CSV.
"""
from __future__ import annotations

import copy
import csv
import logging
from pathlib import Path

import numpy as np

from .interface_solver import build_interface_problem
from .mesh import build_decomposed_mesh, build_mesh
from .monodomain import compute_errors, restrict, solve_monodomain
from .params import admissible_floor, build_params, calibrate, concentration_norm, optimize_parameters
from .problem import spec_from_config
from .timegrid import TimeGrid

log = logging.getLogger(__name__)

ALL_FLAVORS = ("robin", "ventcel_one_sided", "ventcel_weighted")

PRESETS = {
    "table1": {
        "problem": {"testcase": "testcase1", "T": 0.1},
        "mesh": {"n": [20, 40, 80, 160]},
        "time": {"steps1": 80, "steps2": 60},
        "params": {"flavors": list(ALL_FLAVORS), "error_flavor": "ventcel_weighted"},
        "solver": {"methods": ["jacobi", "gmres"], "tol": 1e-6, "max_iter": 200},
        "output": {"file": "table1.csv"},
    },
    "table2": {
        "problem": {"testcase": "testcase1", "T": 1.0},
        "mesh": {"n": [200]},
        "time": {"steps2": [6, 12, 24, 48], "ratio": [4, 3]},
        "params": {"flavors": list(ALL_FLAVORS), "error_flavor": "ventcel_weighted"},
        "solver": {"methods": ["jacobi", "gmres"], "tol": 1e-6, "max_iter": 200},
        "output": {"file": "table2.csv"},
    },
    "fig3": {
        "problem": {"testcase": "testcase2", "T": 1.0, "regimes": ["a", "b", "c"], "homogeneous": True},
        "mesh": {"n": [100]},
        "time": {"steps1": 100, "steps2": 75},
        "params": {"flavors": list(ALL_FLAVORS)},
        "solver": {"methods": ["jacobi", "gmres"], "iterations": 30, "seed": 0},
        "output": {"file": "curves.csv"},
    },
    "fig4": {
        "problem": {"testcase": "testcase2", "T": 1.0, "regime": "c"},
        "mesh": {"n": [40]},
        "time": {"steps1": 40, "steps2": 30},
        "params": {"flavor": "ventcel_weighted", "p_factors": [0.05, 0.1, 0.2, 0.4, 1.0],
                   "q_factors": [0.25, 0.5, 1.0, 2.0, 4.0]},
        "solver": {"method": "jacobi", "iterations": 12, "seed": 0},
        "output": {"file": "calibration.csv"},
    },
    "fig5": {
        "problem": {"testcase": "testcase2", "T": 0.5, "regime": "c"},
        "mesh": {"n": [200]},
        "time": {"coarse": 12, "fine": 16, "levels": 4, "reference_factor": 128},
        "params": {"flavor": "ventcel_weighted"},
        "solver": {"method": "gmres", "tol": 1e-8, "max_iter": 300},
        "output": {"file": "timegrids.csv"},
    },
}
PRESETS["solve"] = {
    "problem": {"testcase": "testcase1", "T": 0.1},
    "mesh": {"n": [20]},
    "time": {"steps1": 80, "steps2": 60},
    "params": {"flavor": "ventcel_weighted"},
    "solver": {"method": "jacobi", "tol": 1e-6, "max_iter": 200, "seed": None},
    "output": {"file": "solve.csv"},
}

SECTIONS = ("problem", "mesh", "time", "params", "solver", "output")


class ConfigError(ValueError):
    pass


def merge_config(base: dict, override: dict | None) -> dict:
    """Deep merge of ``override`` into a copy of ``base``; unknown sections are rejected."""
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if key not in SECTIONS:
            raise ConfigError(f"unknown configuration section {key!r}")
        if not isinstance(val, dict):
            raise ConfigError(f"section {key!r} must be a mapping")
        out.setdefault(key, {}).update(copy.deepcopy(val))
    return out


def resolve_config(preset: str | None, override: dict | None = None) -> dict:
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    return merge_config(PRESETS[preset] if preset else {s: {} for s in SECTIONS}, override)


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _check_flavor(flavor):
    if flavor not in ALL_FLAVORS:
        raise ConfigError(f"unknown flavor {flavor!r}")
    return flavor


def transmission(flavor, spec, iface, h, dt, p=None, q=None):
    """Parameters for ``flavor``; missing ``p``/``q`` come from the convergence-factor optimization."""
    if p is None or q is None:
        po, qo, _ = optimize_parameters(flavor, spec, h, dt)
        p = po if p is None else float(p)
        q = qo if q is None else float(q)
    return build_params(flavor, float(p), float(q), spec, iface), (float(p), float(q))


def write_csv(path, rows, comment=None) -> None:
    if not rows:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in r.items()})


def rates(values) -> list[float]:
    """``log2(e_coarse / e_fine)`` between consecutive entries (NaN for the first)."""
    out = [float("nan")]
    for a, b in zip(values[:-1], values[1:]):
        out.append(float(np.log2(a / b)) if a > 0 and b > 0 else float("nan"))
    return out


def _maybe_write(cfg, rows, out_dir, comment):
    if out_dir is not None:
        write_csv(Path(out_dir) / cfg["output"].get("file", "out.csv"), rows, comment)


# -- accuracy tables -------------------------------------------------------------

def _accuracy_row(spec, n, g1, g2, cfg, threads):
    pc, sc = cfg["params"], cfg["solver"]
    m1, m2, iface = build_decomposed_mesh(spec, n, n)
    h = m1.hy
    dt = min(g1.dt.min(), g2.dt.min())
    row = {"h": 1.0 / n, "dt1": float(g1.dt.max()), "dt2": float(g2.dt.max())}
    err = None
    err_flavor = pc.get("error_flavor", "ventcel_weighted")
    for flavor in map(_check_flavor, pc.get("flavors", ALL_FLAVORS)):
        pq = pc.get(flavor, {})
        params, (p, q) = transmission(flavor, spec, iface, h, dt, pq.get("p"), pq.get("q"))
        row[f"p_{flavor}"], row[f"q_{flavor}"] = p, q
        prob = build_interface_problem(spec, n, n, g1, g2, params, threads=threads)
        rhs = prob.right_hand_side()
        for method in sc.get("methods", ["jacobi", "gmres"]):
            x, rep = prob.solve(method, rhs=rhs, tol=sc.get("tol", 1e-6), max_iter=sc.get("max_iter", 200))
            row[f"{method}_{flavor}"] = rep.iterations if rep.converged else -rep.iterations
            if flavor == err_flavor and err is None and spec.exact is not None:
                t1, t2 = prob.reconstruct(x)
                err = compute_errors([t1.final, t2.final], [m1, m2], exact=spec.exact,
                                     subs=[spec.sub1, spec.sub2], t=spec.T,
                                     mode=cfg["output"].get("error_mode", "function"))
    if err is not None:
        row["c_error"], row["phi_error"] = err
    return row


def _add_rates(rows):
    for key in ("c_error", "phi_error"):
        if rows and key in rows[0]:
            for r, rate in zip(rows, rates([r[key] for r in rows])):
                r[key.replace("error", "rate")] = rate
    return rows


def run_table1(cfg: dict, out_dir=None, threads: int = 1) -> list[dict]:
    """Space accuracy and iteration counts over a sequence of meshes."""
    spec = spec_from_config(cfg["problem"])
    t = cfg["time"]
    g1 = TimeGrid.uniform(spec.T, int(t["steps1"]))
    g2 = TimeGrid.uniform(spec.T, int(t["steps2"]))
    rows = []
    for n in _as_list(cfg["mesh"]["n"]):
        rows.append(_accuracy_row(spec, int(n), g1, g2, cfg, threads))
        log.info("table1 n=%d done", n)
    _add_rates(rows)
    _maybe_write(cfg, rows, out_dir, "space accuracy: relative L2 errors at T and iteration counts")
    return rows


def run_table2(cfg: dict, out_dir=None, threads: int = 1) -> list[dict]:
    """Time accuracy: ``dt_1 = (b/a) dt_2`` with ``ratio = [a, b]`` steps per ``dt_2`` step."""
    spec = spec_from_config(cfg["problem"])
    t = cfg["time"]
    a, b = t.get("ratio", [4, 3])
    n = int(_as_list(cfg["mesh"]["n"])[0])
    rows = []
    for m2 in _as_list(t["steps2"]):
        m1 = int(m2) * a / b
        if m1 != int(m1):
            raise ConfigError(f"steps2={m2} is incompatible with ratio {a}:{b}")
        g1, g2 = TimeGrid.uniform(spec.T, int(m1)), TimeGrid.uniform(spec.T, int(m2))
        rows.append(_accuracy_row(spec, n, g1, g2, cfg, threads))
        log.info("table2 steps2=%d done", m2)
    _add_rates(rows)
    _maybe_write(cfg, rows, out_dir, "time accuracy: relative L2 errors at T and iteration counts")
    return rows


# -- convergence curves ------------------------------------------------------------

def run_convergence_curves(cfg: dict, out_dir=None, threads: int = 1, seed: int | None = None) -> list[dict]:
    """Error-equation runs from a seeded random guess: ``||c^k(T)||`` per iteration."""
    pc, sc, t = cfg["problem"], cfg["solver"], cfg["time"]
    seed = sc.get("seed", 0) if seed is None else seed
    n = int(_as_list(cfg["mesh"]["n"])[0])
    rows = []
    for regime in _as_list(pc.get("regimes", [pc.get("regime", "c")])):
        spec = spec_from_config({**pc, "regime": regime, "homogeneous": True})
        g1 = TimeGrid.uniform(spec.T, int(t["steps1"]))
        g2 = TimeGrid.uniform(spec.T, int(t["steps2"]))
        m1, m2, iface = build_decomposed_mesh(spec, n, n)
        dt = min(g1.dt.min(), g2.dt.min())
        for flavor in map(_check_flavor, cfg["params"].get("flavors", ALL_FLAVORS)):
            params, (p, q) = transmission(flavor, spec, iface, m1.hy, dt)
            prob = build_interface_problem(spec, n, n, g1, g2, params, threads=threads)
            x0 = prob.random_guess(seed)
            rhs = np.zeros(prob.size)

            def error(states):
                return concentration_norm(states, (m1, m2))

            for method in sc.get("methods", ["jacobi", "gmres"]):
                _, rep = prob.solve(method, rhs=rhs, x0=x0, tol=0.0,
                                    max_iter=int(sc.get("iterations", 30)), error=error, seed=seed)
                for k, (r, e) in enumerate(zip(rep.residuals, rep.errors)):
                    rows.append({"regime": spec.regime, "flavor": flavor, "method": method,
                                 "p": p, "q": q, "iteration": k, "residual": r, "error": e})
            log.info("curves regime=%s flavor=%s done", regime, flavor)
    _maybe_write(cfg, rows, out_dir, f"error equation convergence, seed {seed}")
    return rows


# -- calibration -----------------------------------------------------------------------

def run_calibration(cfg: dict, out_dir=None, threads: int = 1, seed: int | None = None):
    """Error surface after a fixed number of iterations around the optimized (p, q)."""
    pc, sc, t, prm = cfg["problem"], cfg["solver"], cfg["time"], cfg["params"]
    seed = sc.get("seed", 0) if seed is None else seed
    spec = spec_from_config(pc)
    n = int(_as_list(cfg["mesh"]["n"])[0])
    g1 = TimeGrid.uniform(spec.T, int(t["steps1"]))
    g2 = TimeGrid.uniform(spec.T, int(t["steps2"]))
    flavor = _check_flavor(prm.get("flavor", "ventcel_weighted"))
    if "p_values" in prm and "q_values" in prm:
        p_star = q_star = float("nan")
        p_range, q_range = prm["p_values"], prm["q_values"]
    else:
        dt = min(g1.dt.min(), g2.dt.min())
        p_star, q_star, _ = optimize_parameters(flavor, spec, (spec.domain[3] - spec.domain[2]) / n, dt)
        # factors scale the margin above the admissible floor, so every candidate is valid
        p0, q0 = admissible_floor(flavor, spec)
        p_range = [p0 + (p_star - p0) * f for f in prm.get("p_factors", [1.0])]
        q_range = [q0 + (q_star - q0) * f for f in prm.get("q_factors", [1.0])]
    result = calibrate(spec, n, n, g1, g2, flavor, p_range, q_range,
                       fixed_iters=int(sc.get("iterations", 12)), seed=seed,
                       method=sc.get("method", "jacobi"))
    rows = [{"p": float(p), "q": float(q), "log10_error": float(np.log10(result.errors[iq, ip]))}
            for iq, q in enumerate(result.q_values) for ip, p in enumerate(result.p_values)]
    _maybe_write(cfg, rows, out_dir,
                 f"calibration surface after {result.iterations} iterations; optimized p={p_star:.6g} q={q_star:.6g}")
    return result, (p_star, q_star)


# -- nonconforming time grids -------------------------------------------------------------

TIME_GRID_NAMES = {1: "coarse-coarse", 2: "coarse-fine", 3: "fine-coarse", 4: "fine-fine"}


def run_timegrid_study(cfg: dict, out_dir=None, threads: int = 1) -> list[dict]:
    """Errors against a monodomain reference on a fine time grid for four grid pairings.

    Pairing 1 is coarse/coarse, 2 coarse/fine, 3 fine/coarse, 4 fine/fine
    (first entry for subdomain 1).  Each level halves both steps.  The
    weighted Ventcel flavor is used unless configured otherwise.
    """
    spec = spec_from_config(cfg["problem"])
    t, sc = cfg["time"], cfg["solver"]
    n = int(_as_list(cfg["mesh"]["n"])[0])
    mc, mf = int(t["coarse"]), int(t["fine"])
    levels = int(t.get("levels", 4))
    pairings = _as_list(t.get("pairings", [1, 2, 3, 4]))
    flavor = _check_flavor(cfg["params"].get("flavor", "ventcel_weighted"))

    mesh = build_mesh(spec.domain, n, n)
    m1, m2, iface = build_decomposed_mesh(spec, n, n)
    ref_steps = mf * int(t.get("reference_factor", 128))
    ref = solve_monodomain(spec, mesh, TimeGrid.uniform(spec.T, ref_steps))
    ref_fields = restrict(ref.final, mesh, m1, m2)
    log.info("timegrids reference with %d steps done", ref_steps)

    rows = []
    for level in range(levels):
        c, f = mc * 2**level, mf * 2**level
        steps = {1: (c, c), 2: (c, f), 3: (f, c), 4: (f, f)}
        for k in pairings:
            s1, s2 = steps[int(k)]
            g1, g2 = TimeGrid.uniform(spec.T, s1), TimeGrid.uniform(spec.T, s2)
            params, (p, q) = transmission(flavor, spec, iface, m1.hy, min(g1.dt.min(), g2.dt.min()),
                                          cfg["params"].get("p"), cfg["params"].get("q"))
            prob = build_interface_problem(spec, n, n, g1, g2, params, threads=threads)
            x, rep = prob.solve(sc.get("method", "gmres"), tol=sc.get("tol", 1e-8),
                                max_iter=sc.get("max_iter", 300))
            t1, t2 = prob.reconstruct(x)
            ec, ep = compute_errors([t1.final, t2.final], [m1, m2], reference=ref_fields)
            rows.append({"grid": int(k), "name": TIME_GRID_NAMES[int(k)], "level": level,
                         "steps1": s1, "steps2": s2, "dt_max": spec.T / min(s1, s2),
                         "p": p, "q": q, "iterations": rep.iterations, "converged": rep.converged,
                         "c_error": ec, "phi_error": ep})
            log.info("timegrids level=%d grid=%s done", level, k)
    _maybe_write(cfg, rows, out_dir,
                 f"nonconforming time grids, {flavor} conditions, errors against monodomain reference")
    return rows


def fitted_slopes(rows, key: str = "c_error") -> dict[int, float]:
    """Least-squares slope of ``log(error)`` against ``log(dt_max)`` per pairing."""
    out = {}
    for k in sorted({r["grid"] for r in rows}):
        sel = [r for r in rows if r["grid"] == k]
        x = np.log([r["dt_max"] for r in sel])
        y = np.log([r[key] for r in sel])
        out[k] = float(np.polyfit(x, y, 1)[0])
    return out


# -- single run ------------------------------------------------------------------------------

def run_solve(cfg: dict, out_dir=None, threads: int = 1, seed: int | None = None) -> dict:
    """One interface solve; writes the residual history."""
    spec = spec_from_config(cfg["problem"])
    t, sc, prm = cfg["time"], cfg["solver"], cfg["params"]
    n = int(_as_list(cfg["mesh"]["n"])[0])
    g1 = TimeGrid.uniform(spec.T, int(t["steps1"]))
    g2 = TimeGrid.uniform(spec.T, int(t["steps2"]))
    m1, m2, iface = build_decomposed_mesh(spec, n, n)
    flavor = _check_flavor(prm.get("flavor", "ventcel_weighted"))
    params, (p, q) = transmission(flavor, spec, iface, m1.hy, min(g1.dt.min(), g2.dt.min()),
                                  prm.get("p"), prm.get("q"))
    prob = build_interface_problem(spec, n, n, g1, g2, params, threads=threads)
    seed = sc.get("seed") if seed is None else seed
    x0 = prob.random_guess(seed) if seed is not None else None
    x, rep = prob.solve(sc.get("method", "jacobi"), x0=x0, tol=sc.get("tol", 1e-6),
                        max_iter=sc.get("max_iter", 200), seed=seed)
    summary = {"flavor": flavor, "p": p, "q": q, "method": rep.method,
               "iterations": rep.iterations, "converged": rep.converged}
    if spec.exact is not None:
        t1, t2 = prob.reconstruct(x)
        summary["c_error"], summary["phi_error"] = compute_errors(
            [t1.final, t2.final], [m1, m2], exact=spec.exact, subs=[spec.sub1, spec.sub2], t=spec.T)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        rep.to_csv(Path(out_dir) / cfg["output"].get("file", "solve.csv"))
    return summary
