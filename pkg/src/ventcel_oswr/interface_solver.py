"""Space-time interface problem in the Ventcel data of both subdomains.

The unknown is the pair ``(zeta_1, zeta_2)`` of piecewise-constant-in-time
interface traces, stacked subdomain-major, then time-major, then by edge.
The interface operator is

    S(zeta_1, zeta_2) = (zeta_1 - P_12 S_2(zeta_2, 0, 0), zeta_2 - P_21 S_1(zeta_1, 0, 0))

where ``S_i`` solves subdomain i over the whole window and returns the data
it sends across, and ``P`` are time projections.  Norms and inner products
are weighted by ``dt * |E|``.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import gmres
from .local_ventcel import SubdomainTrajectory, VentcelSubdomain
from .mesh import build_decomposed_mesh
from .timegrid import SpaceTimeTrace, TimeGrid, project


@dataclass
class IterationReport:
    method: str
    residuals: list[float]
    converged: bool
    errors: list[float] = field(default_factory=list)
    seed: int | None = None

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual", "error"])
            for k, r in enumerate(self.residuals):
                err = self.errors[k] if k < len(self.errors) else ""
                w.writerow([k, f"{r:.6e}", f"{err:.6e}" if err != "" else ""])


class InterfaceProblem:
    """Interface operator and solvers for two assembled subdomains."""

    def __init__(self, sub1: VentcelSubdomain, sub2: VentcelSubdomain, grid1: TimeGrid,
                 grid2: TimeGrid, source=None, initial=None, threads: int = 1):
        if sub1.ny != sub2.ny:
            raise ValueError("subdomains do not share the interface edges")
        self.subs = (sub1, sub2)
        self.grids = (grid1, grid2)
        self.source = source
        self.initial = initial
        self.threads = threads
        self.ny = sub1.ny
        self.n1 = grid1.steps * self.ny
        self.n2 = grid2.steps * self.ny
        L = sub1.lengths
        self.weights = np.concatenate([
            (grid1.dt[:, None] * L).ravel(), (grid2.dt[:, None] * L).ravel(),
        ])
        self.last_final = None

    @property
    def size(self) -> int:
        return self.n1 + self.n2

    def inner(self, a, b) -> float:
        return float(np.dot(self.weights * a, b))

    def norm(self, a) -> float:
        return float(np.sqrt(self.inner(a, a)))

    def split(self, z) -> tuple[SpaceTimeTrace, SpaceTimeTrace]:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.size,):
            raise ValueError(f"interface vector has shape {z.shape}, expected ({self.size},)")
        return (SpaceTimeTrace(self.grids[0], z[:self.n1].reshape(-1, self.ny)),
                SpaceTimeTrace(self.grids[1], z[self.n1:].reshape(-1, self.ny)))

    def join(self, t1: SpaceTimeTrace, t2: SpaceTimeTrace) -> np.ndarray:
        return np.concatenate([t1.values.ravel(), t2.values.ravel()])

    def _exchange(self, z1, z2, source, initial):
        """Data each side receives: ``(P_12 S_2(z2), P_21 S_1(z1))``."""
        sub1, sub2 = self.subs

        def run(sub, z):
            traj = sub.solve_window(z, source=source, initial=initial, store="final")
            from .vtv import extract_vtv
            return traj, extract_vtv(sub, traj)

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=2) as pool:
                f1 = pool.submit(run, sub1, z1)
                f2 = pool.submit(run, sub2, z2)
                (tr1, s1), (tr2, s2) = f1.result(), f2.result()
        else:
            tr1, s1 = run(sub1, z1)
            tr2, s2 = run(sub2, z2)
        self.last_final = (tr1.final, tr2.final)
        return project(s2, self.grids[0]), project(s1, self.grids[1])

    def apply(self, z) -> np.ndarray:
        """Homogeneous interface operator applied to a stacked vector."""
        z1, z2 = self.split(z)
        r1, r2 = self._exchange(z1, z2, None, None)
        return np.asarray(z, dtype=float) - self.join(r1, r2)

    def right_hand_side(self) -> np.ndarray:
        zero1 = SpaceTimeTrace(self.grids[0], np.zeros((self.grids[0].steps, self.ny)))
        zero2 = SpaceTimeTrace(self.grids[1], np.zeros((self.grids[1].steps, self.ny)))
        r1, r2 = self._exchange(zero1, zero2, self.source, self.initial)
        return self.join(r1, r2)

    def random_guess(self, seed: int) -> np.ndarray:
        """Uniform in [-1, 1] per entry from ``numpy.random.default_rng(seed)``."""
        return np.random.default_rng(seed).uniform(-1.0, 1.0, self.size)

    def reconstruct(self, z, store: str = "final") -> tuple[SubdomainTrajectory, SubdomainTrajectory]:
        """Final subdomain sweep with interface data ``z`` and the true data."""
        z1, z2 = self.split(z)
        sub1, sub2 = self.subs
        return (sub1.solve_window(z1, source=self.source, initial=self.initial, store=store),
                sub2.solve_window(z2, source=self.source, initial=self.initial, store=store))

    # -- solvers ------------------------------------------------------------

    def solve_jacobi(self, rhs=None, x0=None, tol: float = 1e-6, max_iter: int = 100,
                     error: Callable | None = None, seed: int | None = None):
        """Fixed-point iteration ``z <- z + (rhs - S z)``; identical to the
        Schwarz waveform relaxation exchange.

        Stops at the first iterate whose weighted residual, relative to the
        initial residual, is below ``tol``.  ``error(states)`` maps the final
        subdomain states of an iterate to an error value that is recorded
        per iteration (only meaningful for homogeneous problems, where the
        operator solves are the true solves).
        """
        rhs = self.right_hand_side() if rhs is None else rhs
        x = np.zeros(self.size) if x0 is None else np.asarray(x0, dtype=float).copy()
        errors = []
        if np.any(x):
            r = rhs - self.apply(x)
            if error is not None:
                errors.append(error(self.last_final))
        else:
            r = rhs.copy()
            if error is not None:
                errors.append(error(None))
        ref = self.norm(r)
        residuals = [1.0]
        converged = ref == 0.0
        k = 0
        while not converged and k < max_iter:
            k += 1
            x = x + r
            r = rhs - self.apply(x)
            residuals.append(self.norm(r) / ref)
            if error is not None:
                errors.append(error(self.last_final))
            converged = residuals[-1] < tol
        return x, IterationReport("jacobi", residuals, converged, errors, seed)

    def solve_gmres(self, rhs=None, x0=None, tol: float = 1e-6, max_iter: int = 100,
                    error: Callable | None = None, seed: int | None = None):
        """Unrestarted GMRES in the weighted inner product; same stopping rule as Jacobi."""
        rhs = self.right_hand_side() if rhs is None else rhs
        errors = []

        def record(k, xk):
            if not np.any(xk):
                errors.append(error(None))
            else:
                t1, t2 = self.reconstruct(xk)
                errors.append(error((t1.final, t2.final)))

        res = gmres(self.apply, rhs, inner=self.inner, tol=tol, max_iter=max_iter, x0=x0,
                    callback=record if error is not None else None)
        return res.x, IterationReport("gmres", res.residuals, res.converged, errors, seed)

    def solve(self, method: str = "jacobi", **kwargs):
        if method == "jacobi":
            return self.solve_jacobi(**kwargs)
        if method == "gmres":
            return self.solve_gmres(**kwargs)
        raise ValueError(f"unknown method {method!r}")


def build_interface_problem(spec, nx: int, ny: int, grid1: TimeGrid, grid2: TimeGrid,
                            params, threads: int = 1) -> InterfaceProblem:
    """Mesh, assemble both subdomains and wire up the interface problem.

    ``params`` is the pair ``(side1, side2)`` of :class:`TransmissionParams`
    (``alpha_12, beta_12`` and ``alpha_21, beta_21``).
    """
    m1, m2, iface = build_decomposed_mesh(spec, nx, ny)
    p1, p2 = params
    sub1 = VentcelSubdomain(m1, iface, spec.sub1, spec.sub2, p1, send_params=p2)
    sub2 = VentcelSubdomain(m2, iface, spec.sub2, spec.sub1, p2, send_params=p1)
    source = None if spec.homogeneous else spec.source
    initial = None if spec.homogeneous else spec.initial
    return InterfaceProblem(sub1, sub2, grid1, grid2, source, initial, threads)
