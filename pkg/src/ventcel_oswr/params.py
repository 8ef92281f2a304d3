"""Transmission parameters and their empirical calibration."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .local_ventcel import FLAVORS, TransmissionParams
from .mesh import InterfaceMesh
from .mhfe import gauss_rule


def normal_velocity(sub, interface: InterfaceMesh, outward: float) -> np.ndarray:
    """Edge average of ``u . n`` on the interface, ``n = (outward, 0)`` (2-point Gauss)."""
    xq, wq = gauss_rule(2)
    y0, L = interface.points[:-1], interface.lengths
    out = np.zeros(interface.n_edges)
    for s, w in zip(xq, wq):
        y = y0 + s * L
        ux, _ = sub.velocity_at(np.full(y.shape, interface.x), y)
        out += w * ux
    return outward * out


def build_params(flavor: str, p_star: float, q_star: float, spec,
                 interface: InterfaceMesh) -> tuple[TransmissionParams, TransmissionParams]:
    """Coefficients ``(alpha_12, beta_12)`` and ``(alpha_21, beta_21)``.

    * ``ventcel_weighted``: ``alpha_ij = p - u_j.n_j / 2``, ``beta_ij = d_j q``
    * ``ventcel_one_sided``: ``alpha_ij = p``, ``beta_ij = q``
    * ``robin``: two-sided, ``alpha_12 = p - u_2.n_2 / 2``,
      ``alpha_21 = q - u_1.n_1 / 2``, ``beta = 0``
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")
    if p_star <= 0 or q_star < 0:
        raise ValueError("need p > 0 and q >= 0")
    un2 = normal_velocity(spec.sub2, interface, -1.0)  # u_2 . n_2
    un1 = normal_velocity(spec.sub1, interface, 1.0)   # u_1 . n_1
    if flavor == "ventcel_weighted":
        a12, a21 = p_star - un2 / 2.0, p_star - un1 / 2.0
        b12, b21 = spec.sub2.d_diag[1] * q_star, spec.sub1.d_diag[1] * q_star
    elif flavor == "ventcel_one_sided":
        a12 = a21 = np.full(interface.n_edges, p_star)
        b12 = b21 = q_star
    else:
        if q_star <= 0:
            raise ValueError("two-sided Robin needs a positive second parameter")
        a12, a21 = p_star - un2 / 2.0, q_star - un1 / 2.0
        b12 = b21 = 0.0
    for name, a in (("alpha_12", a12), ("alpha_21", a21)):
        if np.any(a <= 0):
            raise ValueError(f"{name} is not positive after the advection shift (min {a.min():g})")
    return (TransmissionParams(a12, float(b12), flavor), TransmissionParams(a21, float(b21), flavor))


def _frequency_grid(T, dt, H, h, n_time=160, n_space=80):
    wpos = np.geomspace(np.pi / T, np.pi / dt, n_time)
    kpos = np.geomspace(np.pi / H, np.pi / h, n_space)
    w = np.concatenate([-wpos[::-1], [0.0], wpos])
    k = np.concatenate([-kpos[::-1], kpos])
    return np.meshgrid(w, k)


def _symbol_coefficients(flavor, p, q, spec):
    """``(alpha_12, alpha_21, beta_12, beta_21)`` for a plane interface with normal +x."""
    a1, a2 = float(spec.sub1.velocity[0]), float(spec.sub2.velocity[0])
    d1, d2 = spec.sub1.d_diag[1], spec.sub2.d_diag[1]
    if flavor == "ventcel_weighted":
        return p + a2 / 2.0, p - a1 / 2.0, d2 * q, d1 * q
    if flavor == "ventcel_one_sided":
        return p, p, q, q
    if flavor == "robin":
        return p + a2 / 2.0, q - a1 / 2.0, 0.0, 0.0
    raise ValueError(f"unknown flavor {flavor!r}")


def admissible_floor(flavor: str, spec) -> tuple[float, float]:
    """Smallest ``(p, q)`` keeping both alphas positive for constant velocities."""
    a1, a2 = float(spec.sub1.velocity[0]), float(spec.sub2.velocity[0])
    if flavor == "ventcel_weighted":
        return max(0.0, a1 / 2.0, -a2 / 2.0), 0.0
    if flavor == "ventcel_one_sided":
        return 0.0, 0.0
    if flavor == "robin":
        return max(0.0, -a2 / 2.0), max(0.0, a1 / 2.0)
    raise ValueError(f"unknown flavor {flavor!r}")


def convergence_factor(flavor, p_star, q_star, spec, w, k) -> np.ndarray:
    """Modulus of the two-step convergence factor of the continuous iteration.

    Plane interface, constant coefficients on each side, Fourier frequency
    ``w`` in time and ``k`` along the interface.  The tangential part of each
    side's condition uses the coefficients of the neighbor, as in the
    discrete scheme.
    """
    s1, s2 = spec.sub1, spec.sub2
    (n1x, n1y), (n2x, n2y) = s1.d_diag, s2.d_diag
    (a1, b1), (a2, b2) = (float(v) for v in s1.velocity), (float(v) for v in s2.velocity)
    z1 = 1j * w * s1.omega + 1j * b1 * k + n1y * k**2
    z2 = 1j * w * s2.omega + 1j * b2 * k + n2y * k**2
    sig1 = 0.5 * (np.sqrt(a1**2 + 4.0 * n1x * z1) - a1)   # -phi.n_1 symbol of the left mode
    tau2 = -0.5 * (np.sqrt(a2**2 + 4.0 * n2x * z2) + a2)  # same for the right mode
    al12, al21, be12, be21 = _symbol_coefficients(flavor, p_star, q_star, spec)
    t12 = al12 + be12 * z2
    t21 = al21 + be21 * z1
    return np.abs((tau2 + t12) / (sig1 + t12) * (t21 - sig1) / (t21 - tau2))


def optimize_parameters(flavor: str, spec, h: float, dt: float,
                        starts=((2.0, 20.0), (5.0, 0.05), (1.0, 1.0), (10.0, 0.005))):
    """``(p*, q*)`` minimizing the maximal convergence factor over the
    frequencies resolved by mesh size ``h`` and time step ``dt``.

    Requires constant velocities.  Returns ``(p, q, max_rho)``.
    """
    from scipy.optimize import minimize

    if not (spec.sub1.constant_velocity and spec.sub2.constant_velocity):
        raise ValueError("parameter optimization needs constant velocities")
    xa, xb, yc, yd = spec.domain

    def objective_on(W, K):
        def objective(x):
            p, q = np.exp(x)
            al12, al21, _, _ = _symbol_coefficients(flavor, p, q, spec)
            if min(al12, al21) <= 0:
                return 10.0  # outside the admissible set
            return float(np.max(convergence_factor(flavor, p, q, spec, W, K)))
        return objective

    # multi-start search on a coarse frequency sample, then polish on the full one
    coarse = objective_on(*_frequency_grid(spec.T, dt, yd - yc, h, 40, 20))
    start = min((minimize(coarse, np.log(x0), method="Nelder-Mead",
                          options={"xatol": 1e-3, "fatol": 1e-6, "maxiter": 500})
                 for x0 in starts), key=lambda r: r.fun)
    best = minimize(objective_on(*_frequency_grid(spec.T, dt, yd - yc, h)), start.x, method="Nelder-Mead",
                    options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 2000})
    p, q = np.exp(best.x)
    return float(p), float(q), float(best.fun)


@dataclass
class CalibrationResult:
    p_values: np.ndarray
    q_values: np.ndarray
    errors: np.ndarray  # (len(q_values), len(p_values))
    best_p: float
    best_q: float
    iterations: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "q", "log10_error"])
            for iq, q in enumerate(self.q_values):
                for ip, p in enumerate(self.p_values):
                    e = self.errors[iq, ip]
                    w.writerow([f"{p:.6g}", f"{q:.6g}", f"{np.log10(e) if e > 0 else -np.inf:.6f}"])

    @property
    def best_index(self) -> tuple[int, int]:
        iq, ip = np.unravel_index(np.argmin(self.errors), self.errors.shape)
        return int(iq), int(ip)

    def is_interior(self) -> bool:
        iq, ip = self.best_index
        nq, np_ = self.errors.shape
        return 0 < iq < nq - 1 and 0 < ip < np_ - 1


def concentration_norm(states, meshes) -> float:
    """L2 norm of the piecewise constant concentrations of both subdomains."""
    if states is None:
        return 0.0
    return float(np.sqrt(sum(m.cell_area * np.sum(s.c**2) for s, m in zip(states, meshes))))


def calibrate(spec, nx: int, ny: int, grid1, grid2, flavor: str, p_range, q_range,
              fixed_iters: int = 12, seed: int = 0, method: str = "jacobi") -> CalibrationResult:
    """Error after ``fixed_iters`` iterations of the error equation over a (p, q) grid.

    The error equation (``f = 0``, ``c0 = 0``) is started from the seeded
    random interface guess; the recorded error is the L2 norm of the
    concentration at the final time.
    """
    from .interface_solver import build_interface_problem
    from .mesh import build_decomposed_mesh

    hom = spec.error_equation()
    m1, m2, iface = build_decomposed_mesh(hom, nx, ny)
    p_values = np.asarray(p_range, dtype=float)
    q_values = np.asarray(q_range, dtype=float)
    errors = np.full((q_values.size, p_values.size), np.inf)
    for iq, q in enumerate(q_values):
        for ip, p in enumerate(p_values):
            try:
                params = build_params(flavor, p, q, hom, iface)
            except ValueError:
                continue
            prob = build_interface_problem(hom, nx, ny, grid1, grid2, params)
            x0 = prob.random_guess(seed)
            rhs = np.zeros(prob.size)
            x, _ = prob.solve(method, rhs=rhs, x0=x0, tol=0.0, max_iter=fixed_iters)
            t1, t2 = prob.reconstruct(x)
            errors[iq, ip] = concentration_norm((t1.final, t2.final), (m1, m2))
    iq, ip = np.unravel_index(np.argmin(errors), errors.shape)
    return CalibrationResult(p_values, q_values, errors, float(p_values[ip]), float(q_values[iq]),
                             fixed_iters)
