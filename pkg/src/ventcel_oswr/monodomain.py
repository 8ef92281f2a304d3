"""Reference solver on the undecomposed domain and error measures.

The monodomain discretization uses the same mixed hybrid elements as the
subdomain solver (four fluxes per cell, one concentration per cell, one
multiplier per interior edge) with homogeneous Dirichlet data on the whole
boundary.  Coefficients are taken cell by cell from the subdomain a cell
belongs to.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .linalg import TripletBuilder, factorize
from .local_ventcel import cell_averages
from .mesh import BOTTOM, FACE_SIGN, LEFT, RIGHT, TOP, SubdomainMesh
from .mhfe import edge_normal_flux, element_matrix_2d, gauss_rule, rt0_values
from .timegrid import TimeGrid


@dataclass
class MonodomainState:
    c: np.ndarray
    flux: np.ndarray  # (n_cells, 4), outward
    lam: np.ndarray   # every edge, zero on the boundary


@dataclass
class MonodomainTrajectory:
    mesh: SubdomainMesh
    grid: TimeGrid
    states: dict[int, MonodomainState] = field(default_factory=dict)

    @property
    def final(self) -> MonodomainState:
        return self.states[self.grid.steps]


def cell_side(spec, mesh: SubdomainMesh) -> np.ndarray:
    """Boolean per cell: True where the cell lies in the second subdomain."""
    return mesh.cell_centers[:, 0] > spec.interface_x


class MonodomainSolver:
    """Assembled monodomain problem; one factorization per distinct step size."""

    def __init__(self, spec, mesh: SubdomainMesh):
        self.spec = spec
        self.mesh = mesh
        nc = mesh.n_cells
        right = cell_side(spec, mesh)
        d1, d2 = spec.sub1.d_diag, spec.sub2.d_diag
        dxx = np.where(right, d2[0], d1[0])
        dyy = np.where(right, d2[1], d1[1])
        self.omega = np.where(right, spec.sub2.omega, spec.sub1.omega)
        self.A = element_matrix_2d(mesh.hx, mesh.hy, dxx, dyy)
        f1 = edge_normal_flux(spec.sub1.velocity_at, mesh)[mesh.cell_edges]
        f2 = edge_normal_flux(spec.sub2.velocity_at, mesh)[mesh.cell_edges]
        self.u_cell = np.where(right[:, None], f2, f1) * FACE_SIGN
        self.interior = mesh.interior_edges
        self.o_c = 4 * nc
        self.o_l = self.o_c + nc
        self.size = self.o_l + self.interior.size
        lam_col = -np.ones(mesh.n_edges, dtype=int)
        lam_col[self.interior] = self.o_l + np.arange(self.interior.size)
        self.lam_col = lam_col
        xq, wq = gauss_rule(2)
        ll = mesh.cell_lower_left
        self._quad = [(ll[:, 0] + a * mesh.hx, ll[:, 1] + b * mesh.hy, wa * wb * mesh.cell_area)
                      for a, wa in zip(xq, wq) for b, wb in zip(xq, wq)]
        self._factors = {}

    def matrix(self, dt: float):
        mesh = self.mesh
        nc = mesh.n_cells
        B = TripletBuilder((self.size, self.size))
        cells = np.arange(nc)
        frow = 4 * cells[:, None] + np.arange(4)
        B.add(frow[:, :, None], frow[:, None, :], self.A)
        lcol = self.lam_col[mesh.cell_edges]
        adv = -self.A * self.u_cell[:, None, :]
        mask = np.broadcast_to(lcol[:, None, :] >= 0, adv.shape)
        B.add(np.broadcast_to(frow[:, :, None], adv.shape)[mask],
              np.broadcast_to(lcol[:, None, :], adv.shape)[mask], adv[mask])
        B.add(frow, self.o_c + cells[:, None], -1.0)
        has = lcol >= 0
        B.add(frow[has], lcol[has], 1.0)
        B.add(self.o_c + cells[:, None], frow, -1.0)
        B.add(self.o_c + cells, self.o_c + cells, -mesh.cell_area * self.omega / dt)
        e = self.interior
        vertical = e < mesh.n_vertical
        k0, k1 = mesh.edge_cells[e, 0], mesh.edge_cells[e, 1]
        B.add(self.lam_col[e], 4 * k0 + np.where(vertical, RIGHT, TOP), 1.0)
        B.add(self.lam_col[e], 4 * k1 + np.where(vertical, LEFT, BOTTOM), 1.0)
        return B.tocsr()

    def factorization(self, dt: float):
        key = float(dt)
        if key not in self._factors:
            self._factors[key] = factorize(self.matrix(dt))
        return self._factors[key]

    def step(self, dt: float, c_prev: np.ndarray, t: float, with_source: bool = True) -> MonodomainState:
        b = np.zeros(self.size)
        mass = self.mesh.cell_area * self.omega / dt * c_prev
        if with_source:
            for x, y, w in self._quad:
                mass = mass + w * self.spec.source(x, y, t)
        b[self.o_c:self.o_l] = -mass
        x = self.factorization(dt).solve(b)
        lam = np.zeros(self.mesh.n_edges)
        lam[self.interior] = x[self.o_l:]
        return MonodomainState(x[self.o_c:self.o_l].copy(), x[:self.o_c].reshape(-1, 4).copy(), lam)


def solve_monodomain(spec, mesh: SubdomainMesh, grid: TimeGrid, store: str = "final") -> MonodomainTrajectory:
    """Backward Euler march on the full mesh; ``store`` is ``"final"`` or ``"all"``."""
    if abs(grid.T - spec.T) > 1e-12 * spec.T:
        raise ValueError(f"time grid ends at {grid.T}, problem at {spec.T}")
    solver = MonodomainSolver(spec, mesh)
    nc = mesh.n_cells
    with_data = not spec.homogeneous
    c = cell_averages(lambda x, y: spec.initial(x, y), mesh) if with_data else np.zeros(nc)
    traj = MonodomainTrajectory(mesh, grid)
    traj.states[0] = MonodomainState(c, np.zeros((nc, 4)), np.zeros(mesh.n_edges))
    t = grid.breakpoints
    for m, dt in enumerate(grid.dt, start=1):
        state = solver.step(dt, c, t[m], with_data)
        c = state.c
        if store == "all" or m == grid.steps:
            traj.states[m] = state
    return traj


def split_cells(mesh: SubdomainMesh, m1: SubdomainMesh, m2: SubdomainMesh):
    """Index arrays mapping the cells of ``m1`` and ``m2`` into ``mesh``."""
    if mesh.ny != m1.ny or mesh.ny != m2.ny or mesh.nx != m1.nx + m2.nx:
        raise ValueError("subdomain meshes do not tile the monodomain mesh")
    j1, i1 = np.divmod(np.arange(m1.n_cells), m1.nx)
    j2, i2 = np.divmod(np.arange(m2.n_cells), m2.nx)
    return j1 * mesh.nx + i1, j2 * mesh.nx + m1.nx + i2


def restrict(state, mesh, m1, m2):
    """Split a monodomain state into per-subdomain ``(c, flux)`` pairs."""
    idx1, idx2 = split_cells(mesh, m1, m2)
    return [(state.c[idx1], state.flux[idx1]), (state.c[idx2], state.flux[idx2])]


# -- error measures -------------------------------------------------------------

def _gauss_points(mesh: SubdomainMesh, order: int):
    xq, wq = gauss_rule(order)
    ll = mesh.cell_lower_left
    for a, wa in zip(xq, wq):
        for b, wb in zip(xq, wq):
            yield a, b, ll[:, 0] + a * mesh.hx, ll[:, 1] + b * mesh.hy, wa * wb * mesh.cell_area


def flux_field(flux: np.ndarray, mesh: SubdomainMesh, a: float, b: float) -> np.ndarray:
    """RT0 field at local point ``(a, b)`` of every cell, shape ``(n_cells, 2)``."""
    basis = rt0_values(a, b, mesh.hx, mesh.hy)  # (4, 2)
    return flux @ basis


def _pairs(fields):
    return [(f.c, f.flux) if hasattr(f, "c") else tuple(f) for f in fields]


def errors_vs_exact(fields, meshes, exact, subs, t: float, mode: str = "function",
                    order: int = 3) -> tuple[float, float]:
    """Relative L2 errors of ``c`` and ``phi`` against an analytic solution.

    ``fields`` holds per-mesh states (or ``(c, flux)`` pairs), ``subs`` the
    coefficients used for the exact flux on each mesh.  ``mode`` selects the
    concentration comparison: ``"function"`` integrates ``(c_h - c)^2`` by
    Gauss quadrature, ``"average"`` compares with cell averages of ``c``,
    ``"midpoint"`` with cell-center values.  The flux error always uses
    Gauss quadrature of the RT0 field.
    """
    if mode not in ("function", "average", "midpoint"):
        raise ValueError(f"unknown error mode {mode!r}")
    num_c = den_c = num_p = den_p = 0.0
    for (c, flux), mesh, sub in zip(_pairs(fields), meshes, subs):
        if c.shape != (mesh.n_cells,):
            raise ValueError("field does not match its mesh")
        avg = np.zeros(mesh.n_cells)
        for a, b, x, y, w in _gauss_points(mesh, order):
            ce = exact.c(x, y, t)
            den_c += np.sum(w * ce**2)
            if mode == "function":
                num_c += np.sum(w * (c - ce) ** 2)
            avg += w * ce / mesh.cell_area
            px, py = exact.phi(sub, x, y, t)
            ph = flux_field(flux, mesh, a, b)
            num_p += np.sum(w * ((ph[:, 0] - px) ** 2 + (ph[:, 1] - py) ** 2))
            den_p += np.sum(w * (px**2 + py**2))
        if mode == "average":
            num_c += mesh.cell_area * np.sum((c - avg) ** 2)
        elif mode == "midpoint":
            xc, yc = mesh.cell_centers.T
            num_c += mesh.cell_area * np.sum((c - exact.c(xc, yc, t)) ** 2)
    return float(np.sqrt(num_c / den_c)), float(np.sqrt(num_p / den_p))


def errors_vs_reference(fields, reference, meshes, order: int = 2) -> tuple[float, float]:
    """Relative L2 differences of ``c`` and ``phi`` between discrete fields on the same meshes."""
    num_c = den_c = num_p = den_p = 0.0
    for (c, flux), (cr, fr), mesh in zip(_pairs(fields), _pairs(reference), meshes):
        if c.shape != cr.shape or flux.shape != fr.shape or c.shape != (mesh.n_cells,):
            raise ValueError("incompatible meshes")
        num_c += mesh.cell_area * np.sum((c - cr) ** 2)
        den_c += mesh.cell_area * np.sum(cr**2)
        for a, b, _, _, w in _gauss_points(mesh, order):
            d = flux_field(flux - fr, mesh, a, b)
            r = flux_field(fr, mesh, a, b)
            num_p += np.sum(w * (d**2).sum(axis=1))
            den_p += np.sum(w * (r**2).sum(axis=1))
    return float(np.sqrt(num_c / den_c)), float(np.sqrt(num_p / den_p))


def compute_errors(fields, meshes, exact=None, reference=None, subs=None, t=None,
                   mode: str = "function") -> tuple[float, float]:
    """Dispatch to :func:`errors_vs_exact` or :func:`errors_vs_reference`."""
    if (exact is None) == (reference is None):
        raise ValueError("give exactly one of exact and reference")
    if exact is not None:
        if subs is None or t is None:
            raise ValueError("exact errors need the subdomain coefficients and the time")
        return errors_vs_exact(fields, meshes, exact, subs, t, mode)
    return errors_vs_reference(fields, reference, meshes)


def write_errors_csv(path, rows, header) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
