"""Subdomain problem with a Ventcel condition on the interface.

Mixed hybrid discretization in space, backward Euler in time.  Per time step
the unknowns are stacked as

    [flux (4 per cell), c (per cell), lambda on interior edges,
     lambda on interface edges, 1D interface flux (2 per interface edge),
     xi on interior interface points]

and the rows are scaled so that the matrix is symmetric whenever the
velocity vanishes.  A factorization is kept per distinct step size.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import Factorization, TripletBuilder, factorize
from .mesh import BOTTOM, LEFT, RIGHT, TOP, InterfaceMesh, SubdomainMesh
from .mhfe import element_matrix_1d, element_matrix_2d, gauss_rule, project_velocity
from .problem import Subdomain
from .timegrid import SpaceTimeTrace, TimeGrid

FLAVORS = ("robin", "ventcel_one_sided", "ventcel_weighted")


@dataclass(frozen=True)
class TransmissionParams:
    """Coefficients of one side's condition: ``alpha`` per interface edge, scalar ``beta``."""

    alpha: np.ndarray
    beta: float
    flavor: str = "ventcel_weighted"

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if np.any(a <= 0):
            raise ValueError(f"alpha must be positive, got min {a.min():g}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.flavor == "robin" and self.beta != 0:
            raise ValueError("Robin conditions have beta = 0")
        object.__setattr__(self, "alpha", a)

    def alpha_on(self, n_edges: int) -> np.ndarray:
        return np.broadcast_to(self.alpha, (n_edges,)) if self.alpha.size == 1 else self.alpha


@dataclass
class SubdomainState:
    """Unknowns of one subdomain at one time level.

    ``lam`` holds the edge multipliers for every edge (zero on Dirichlet
    edges); ``xi`` holds all interface points (zero at both ends).
    """

    c: np.ndarray
    flux: np.ndarray
    lam: np.ndarray
    phi_gamma: np.ndarray
    xi: np.ndarray


@dataclass
class SubdomainTrajectory:
    """Interface history of a window solve plus the retained full states.

    Interface arrays are indexed by time level ``0..M``; level 0 holds the
    initial trace (fluxes there are zero and unused).
    """

    grid: TimeGrid
    flux_gamma: np.ndarray
    lam_gamma: np.ndarray
    phi_gamma: np.ndarray
    xi: np.ndarray
    states: dict[int, SubdomainState] = field(default_factory=dict)

    @property
    def final(self) -> SubdomainState:
        return self.states[self.grid.steps]


def cell_averages(func, mesh: SubdomainMesh, *args, order: int = 2) -> np.ndarray:
    """Cell averages of ``func(x, y, *args)`` by tensor Gauss quadrature."""
    xq, wq = gauss_rule(order)
    ll = mesh.cell_lower_left
    out = np.zeros(mesh.n_cells)
    for xi, wi in zip(xq, wq):
        for yj, wj in zip(xq, wq):
            out += wi * wj * func(ll[:, 0] + xi * mesh.hx, ll[:, 1] + yj * mesh.hy, *args)
    return out


class VentcelSubdomain:
    """Assembled subdomain problem, reusable across outer iterations.

    Parameters
    ----------
    mesh, interface
        Subdomain mesh and the shared interface.
    own, neighbor
        Coefficients of this subdomain and of the one across the interface.
    params
        This side's transmission coefficients (``alpha_ij``, ``beta_ij``).
    send_params
        The receiving side's coefficients (``alpha_ji``, ``beta_ji``) used to
        form the data sent across the interface.
    """

    def __init__(self, mesh: SubdomainMesh, interface: InterfaceMesh, own: Subdomain,
                 neighbor: Subdomain, params: TransmissionParams,
                 send_params: TransmissionParams | None = None):
        if mesh.interface_face not in (LEFT, RIGHT):
            raise ValueError("subdomain mesh has no interface")
        self.mesh = mesh
        self.interface = interface
        self.own = own
        self.neighbor = neighbor
        self.params = params
        self.send_params = send_params
        ny = interface.n_edges
        nc = mesh.n_cells
        self.ny = ny

        dxx, dyy = own.d_diag
        self.omega = np.full(nc, own.omega)
        self.A = element_matrix_2d(mesh.hx, mesh.hy, np.full(nc, dxx), np.full(nc, dyy))
        vel = project_velocity(own.velocity_at, mesh, interface)
        vel_nb = project_velocity(neighbor.velocity_at, mesh, interface)
        self.u_cell = vel.cell
        self.u_gamma = vel.gamma
        self.u_gamma_nb = vel_nb.gamma
        self.d_gamma = np.full(ny, dyy)
        self.d_gamma_nb = np.full(ny, neighbor.d_diag[1])
        # the time-derivative weight in this side's condition is the neighbor's
        # porosity, the same one the neighbor uses when it sends data here
        self.omega_gamma_nb = np.full(ny, neighbor.omega)
        self.omega_gamma = np.full(ny, own.omega)
        self.lengths = interface.lengths

        # unknown layout
        self.interior = mesh.interior_edges
        self.o_c = 4 * nc
        self.o_li = self.o_c + nc
        self.o_lg = self.o_li + self.interior.size
        self.o_pg = self.o_lg + ny
        self.o_xi = self.o_pg + 2 * ny
        self.size = self.o_xi + (ny - 1)
        lam_col = -np.ones(mesh.n_edges, dtype=int)
        lam_col[self.interior] = self.o_li + np.arange(self.interior.size)
        lam_col[mesh.interface_edges] = self.o_lg + np.arange(ny)
        self.lam_col = lam_col
        self.face = mesh.interface_face
        self.gamma_cells = mesh.interface_cells

        xq, wq = gauss_rule(2)
        ll = mesh.cell_lower_left
        self._quad = [(ll[:, 0] + a * mesh.hx, ll[:, 1] + b * mesh.hy, wa * wb * mesh.cell_area)
                      for a, wa in zip(xq, wq) for b, wb in zip(xq, wq)]
        self._factors: dict[float, Factorization] = {}
        self._matrices = {}

    # -- assembly ---------------------------------------------------------

    def matrix(self, dt: float):
        """Sparse system matrix for step size ``dt``."""
        if dt <= 0:
            raise ValueError("time step must be positive")
        key = float(dt)
        if key in self._matrices:
            return self._matrices[key]
        mesh, ny = self.mesh, self.ny
        nc = mesh.n_cells
        B = TripletBuilder((self.size, self.size))
        cells = np.arange(nc)
        frow = 4 * cells[:, None] + np.arange(4)  # (nc, 4)

        # flux equations
        B.add(frow[:, :, None], frow[:, None, :], self.A)
        lcol = self.lam_col[mesh.cell_edges]  # (nc, 4)
        adv = -self.A * self.u_cell[:, None, :]
        mask = np.broadcast_to(lcol[:, None, :] >= 0, adv.shape)
        B.add(np.broadcast_to(frow[:, :, None], adv.shape)[mask],
              np.broadcast_to(lcol[:, None, :], adv.shape)[mask], adv[mask])
        B.add(frow, self.o_c + cells[:, None], -1.0)
        has = lcol >= 0
        B.add(frow[has], lcol[has], 1.0)

        # mass balance (negated)
        B.add(self.o_c + cells[:, None], frow, -1.0)
        B.add(self.o_c + cells, self.o_c + cells, -mesh.cell_area * self.omega / dt)

        # flux continuity on interior edges
        e = self.interior
        vertical = e < mesh.n_vertical
        k0, k1 = mesh.edge_cells[e, 0], mesh.edge_cells[e, 1]
        f0 = np.where(vertical, RIGHT, TOP)
        f1 = np.where(vertical, LEFT, BOTTOM)
        rows = self.lam_col[e]
        B.add(rows, 4 * k0 + f0, 1.0)
        B.add(rows, 4 * k1 + f1, 1.0)

        # interface condition (negated)
        beta = self.params.beta
        L = self.lengths
        k = np.arange(ny)
        lg = self.o_lg + k
        alpha = self.params.alpha_on(ny)
        B.add(lg, 4 * self.gamma_cells + self.face, 1.0)
        B.add(lg, lg, -(alpha * L + beta * self.omega_gamma_nb * L / dt))
        pg = self.o_pg + 2 * k[:, None] + np.arange(2)  # (ny, 2)
        if beta != 0.0:
            B.add(lg[:, None], pg, -beta)

        # 1D flux equations and point continuity, scaled by beta
        s = beta if beta != 0.0 else 1.0
        M1 = s * element_matrix_1d(L, self.d_gamma_nb)  # (ny, 2, 2)
        B.add(pg[:, :, None], pg[:, None, :], M1)
        pts = k[:, None] + np.arange(2)  # point index of (edge, end)
        inner = (pts > 0) & (pts < ny)
        xcol = self.o_xi + pts - 1
        adv1 = -M1 * self.u_gamma_nb[:, None, :]
        rr = np.broadcast_to(pg[:, :, None], adv1.shape)
        cc = np.broadcast_to(xcol[:, None, :], adv1.shape)
        m = np.broadcast_to(inner[:, None, :], adv1.shape)
        B.add(rr[m], cc[m], adv1[m])
        B.add(pg, lg[:, None], -s)
        B.add(pg[inner], xcol[inner], s)
        B.add(xcol[inner], pg[inner], s)

        A = B.tocsr()
        self._matrices[key] = A
        return A

    def factorization(self, dt: float) -> Factorization:
        key = float(dt)
        if key not in self._factors:
            self._factors[key] = factorize(self.matrix(dt))
        return self._factors[key]

    # -- time stepping ----------------------------------------------------

    def source_integrals(self, source, t: float) -> np.ndarray:
        out = np.zeros(self.mesh.n_cells)
        for x, y, w in self._quad:
            out += w * source(x, y, t)
        return out

    def initial_state(self, initial=None) -> SubdomainState:
        mesh = self.mesh
        nc, ny = mesh.n_cells, self.ny
        lam = np.zeros(mesh.n_edges)
        if initial is None:
            c = np.zeros(nc)
        else:
            c = cell_averages(initial, mesh)
            y = self.interface.midpoints
            lam[mesh.interface_edges] = initial(np.full(ny, self.interface.x), y)
        return SubdomainState(c, np.zeros((nc, 4)), lam, np.zeros((ny, 2)), np.zeros(ny + 1))

    def rhs(self, dt: float, previous: SubdomainState, zeta: np.ndarray,
            source_int: np.ndarray | None) -> np.ndarray:
        mesh, ny = self.mesh, self.ny
        b = np.zeros(self.size)
        mass = mesh.cell_area * self.omega / dt * previous.c
        if source_int is not None:
            mass = mass + source_int
        b[self.o_c:self.o_li] = -mass
        L = self.lengths
        lam_prev = previous.lam[mesh.interface_edges]
        b[self.o_lg:self.o_lg + ny] = -(L * zeta + self.params.beta * self.omega_gamma_nb * L / dt * lam_prev)
        return b

    def unpack(self, x: np.ndarray) -> SubdomainState:
        mesh, ny = self.mesh, self.ny
        lam = np.zeros(mesh.n_edges)
        lam[self.interior] = x[self.o_li:self.o_lg]
        lam[mesh.interface_edges] = x[self.o_lg:self.o_pg]
        xi = np.zeros(ny + 1)
        xi[1:-1] = x[self.o_xi:]
        return SubdomainState(
            c=x[self.o_c:self.o_li].copy(),
            flux=x[:self.o_c].reshape(-1, 4).copy(),
            lam=lam,
            phi_gamma=x[self.o_pg:self.o_xi].reshape(ny, 2).copy(),
            xi=xi,
        )

    def step(self, dt: float, previous: SubdomainState, zeta: np.ndarray,
             source=None, t: float | None = None) -> SubdomainState:
        """One backward Euler step with edge-average Ventcel data ``zeta``."""
        fint = None if source is None else self.source_integrals(source, t)
        x = self.factorization(dt).solve(self.rhs(dt, previous, np.asarray(zeta, dtype=float), fint))
        return self.unpack(x)

    def solve_window(self, zeta, grid: TimeGrid | None = None, source=None, initial=None,
                     store: str = "final") -> SubdomainTrajectory:
        """March over the whole time window.

        ``zeta`` is a :class:`SpaceTimeTrace` (or an ``(M, ny)`` array with
        ``grid`` given).  ``store`` selects retained full states: ``"final"``,
        ``"all"`` or ``"none"``.
        """
        if isinstance(zeta, SpaceTimeTrace):
            grid, values = zeta.grid, zeta.values
        else:
            values = np.asarray(zeta, dtype=float)
            if grid is None:
                raise ValueError("a time grid is required with raw zeta values")
        M, ny = grid.steps, self.ny
        if values.shape != (M, ny):
            raise ValueError(f"zeta has shape {values.shape}, expected {(M, ny)}")
        state = self.initial_state(initial)
        traj = SubdomainTrajectory(
            grid=grid,
            flux_gamma=np.zeros((M + 1, ny)),
            lam_gamma=np.zeros((M + 1, ny)),
            phi_gamma=np.zeros((M + 1, ny, 2)),
            xi=np.zeros((M + 1, ny + 1)),
        )
        self._record(traj, 0, state, store)
        t = grid.breakpoints
        for m, dt in enumerate(grid.dt, start=1):
            state = self.step(dt, state, values[m - 1], source, t[m])
            self._record(traj, m, state, store)
        return traj

    def _record(self, traj, m, state, store):
        traj.flux_gamma[m] = state.flux[self.gamma_cells, self.face]
        traj.lam_gamma[m] = state.lam[self.mesh.interface_edges]
        traj.phi_gamma[m] = state.phi_gamma
        traj.xi[m] = state.xi
        if store == "all" or (store == "final" and m == traj.grid.steps):
            traj.states[m] = state

    # -- data for the neighbor ---------------------------------------------

    def vtv(self, zeta, grid: TimeGrid | None = None, source=None, initial=None) -> SpaceTimeTrace:
        """Solve with data ``zeta`` and return the Ventcel data sent to the neighbor."""
        from .vtv import extract_vtv

        traj = self.solve_window(zeta, grid, source, initial, store="none")
        return extract_vtv(self, traj)
