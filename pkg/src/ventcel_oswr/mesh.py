"""Uniform rectangular meshes for the two-subdomain split at a vertical interface.

Cells are numbered row-major (``K = j * nx + i``).  Edges are numbered with
all vertical edges first (``j * (nx + 1) + i``) followed by all horizontal
edges (``nV + j * nx + i``).  Every edge carries one global orientation
(+x for vertical, +y for horizontal edges); per-cell outward quantities are
obtained with :data:`FACE_SIGN`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEFT, RIGHT, BOTTOM, TOP = 0, 1, 2, 3
FACE_SIGN = np.array([-1.0, 1.0, -1.0, 1.0])

INTERIOR, DIRICHLET, INTERFACE = 0, 1, 2


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class SubdomainMesh:
    """Tensor-product rectangle mesh of one subdomain (or of the whole domain).

    ``interface_face`` is ``RIGHT`` for the left subdomain, ``LEFT`` for the
    right subdomain and ``None`` for a monodomain mesh.
    """

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    interface_face: int | None = None
    cell_edges: np.ndarray = field(init=False, repr=False)
    edge_cells: np.ndarray = field(init=False, repr=False)
    edge_kind: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise MeshError("need at least one cell in each direction")
        nx, ny = self.nx, self.ny
        nv = (nx + 1) * ny
        i, j = np.meshgrid(np.arange(nx), np.arange(ny))
        i, j = i.ravel(), j.ravel()
        left = j * (nx + 1) + i
        bottom = nv + j * nx + i
        cell_edges = np.stack([left, left + 1, bottom, bottom + nx], axis=1)

        n_edges = nv + nx * (ny + 1)
        edge_cells = -np.ones((n_edges, 2), dtype=int)
        # column 0: cell on the negative side of the edge orientation
        cells = np.arange(nx * ny)
        edge_cells[cell_edges[:, RIGHT], 0] = cells
        edge_cells[cell_edges[:, LEFT], 1] = cells
        edge_cells[cell_edges[:, TOP], 0] = cells
        edge_cells[cell_edges[:, BOTTOM], 1] = cells

        kind = np.full(n_edges, INTERIOR)
        kind[(edge_cells < 0).any(axis=1)] = DIRICHLET
        if self.interface_face is not None:
            col = nx if self.interface_face == RIGHT else 0
            kind[np.arange(ny) * (nx + 1) + col] = INTERFACE

        object.__setattr__(self, "cell_edges", cell_edges)
        object.__setattr__(self, "edge_cells", edge_cells)
        object.__setattr__(self, "edge_kind", kind)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def h(self) -> float:
        """Maximal cell diameter."""
        return float(np.hypot(self.hx, self.hy))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_vertical(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def n_edges(self) -> int:
        return self.n_vertical + self.nx * (self.ny + 1)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def cell_centers(self) -> np.ndarray:
        xc = self.x0 + (np.arange(self.nx) + 0.5) * self.hx
        yc = self.y0 + (np.arange(self.ny) + 0.5) * self.hy
        X, Y = np.meshgrid(xc, yc)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    @property
    def cell_lower_left(self) -> np.ndarray:
        return self.cell_centers - 0.5 * np.array([self.hx, self.hy])

    @property
    def edge_lengths(self) -> np.ndarray:
        out = np.empty(self.n_edges)
        out[: self.n_vertical] = self.hy
        out[self.n_vertical:] = self.hx
        return out

    @property
    def edge_endpoints(self) -> np.ndarray:
        """Array ``(n_edges, 2, 2)``: start and end point of each edge."""
        nx, ny, nv = self.nx, self.ny, self.n_vertical
        out = np.empty((self.n_edges, 2, 2))
        i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny))
        x = self.x0 + i.ravel() * self.hx
        y = self.y0 + j.ravel() * self.hy
        out[:nv, 0] = np.stack([x, y], axis=1)
        out[:nv, 1] = np.stack([x, y + self.hy], axis=1)
        i, j = np.meshgrid(np.arange(nx), np.arange(ny + 1))
        x = self.x0 + i.ravel() * self.hx
        y = self.y0 + j.ravel() * self.hy
        out[nv:, 0] = np.stack([x, y], axis=1)
        out[nv:, 1] = np.stack([x + self.hx, y], axis=1)
        return out

    @property
    def edge_normals(self) -> np.ndarray:
        out = np.zeros((self.n_edges, 2))
        out[: self.n_vertical, 0] = 1.0
        out[self.n_vertical:, 1] = 1.0
        return out

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_kind == INTERIOR)

    @property
    def dirichlet_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_kind == DIRICHLET)

    @property
    def interface_edges(self) -> np.ndarray:
        """Interface edges ordered bottom to top."""
        return np.flatnonzero(self.edge_kind == INTERFACE)

    @property
    def interface_cells(self) -> np.ndarray:
        col = self.nx - 1 if self.interface_face == RIGHT else 0
        return np.arange(self.ny) * self.nx + col

    def summary(self) -> str:
        return (
            f"SubdomainMesh [{self.x0:g},{self.x1:g}]x[{self.y0:g},{self.y1:g}] "
            f"{self.nx}x{self.ny} cells, {self.n_edges} edges "
            f"(interior {self.interior_edges.size}, dirichlet {self.dirichlet_edges.size}, "
            f"interface {self.interface_edges.size}), h={self.h:.4g}"
        )


@dataclass(frozen=True)
class InterfaceMesh:
    """The edges of the vertical interface, ordered bottom to top.

    Edge ``k`` is ``[P_k, P_{k+1}]``; points 0 and ``ny`` lie on the boundary
    of the interface.
    """

    x: float
    points: np.ndarray
    cells_left: np.ndarray
    cells_right: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.points.size - 1

    @property
    def n_points(self) -> int:
        return self.points.size

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.points[:-1] + self.points[1:])

    @property
    def on_boundary(self) -> np.ndarray:
        flags = np.zeros(self.n_points, dtype=bool)
        flags[[0, -1]] = True
        return flags


def build_mesh(domain, nx: int, ny: int) -> SubdomainMesh:
    """Mesh of the whole rectangle ``domain = (xa, xb, yc, yd)``."""
    xa, xb, yc, yd = domain
    return SubdomainMesh(xa, xb, yc, yd, nx, ny)


def build_decomposed_mesh(spec, nx: int, ny: int):
    """Split an ``nx`` x ``ny`` mesh of ``spec.domain`` at ``spec.interface_x``.

    Returns ``(mesh1, mesh2, interface)``.
    """
    if nx < 2 or ny < 2:
        raise MeshError("nx and ny must be at least 2")
    xa, xb, yc, yd = spec.domain
    ratio = nx * (spec.interface_x - xa) / (xb - xa)
    nx1 = int(round(ratio))
    if abs(ratio - nx1) > 1e-9 or not 0 < nx1 < nx:
        raise MeshError(
            f"interface x={spec.interface_x} is not on a mesh line of the {nx}-column grid"
        )
    xg = xa + nx1 * (xb - xa) / nx
    m1 = SubdomainMesh(xa, xg, yc, yd, nx1, ny, interface_face=RIGHT)
    m2 = SubdomainMesh(xg, xb, yc, yd, nx - nx1, ny, interface_face=LEFT)
    points = yc + np.arange(ny + 1) * (yd - yc) / ny
    iface = InterfaceMesh(xg, points, m1.interface_cells, m2.interface_cells)
    return m1, m2, iface
