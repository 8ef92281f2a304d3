"""Lowest-order Raviart-Thomas elements on rectangles and on interface segments.

Local edge order on a cell is (left, right, bottom, top).  The basis
function ``w_E`` of a cell has unit outward flux through ``E`` and zero flux
through the other three edges:

    w_left   = (-(x1 - x) / |K|, 0)       w_right = ((x - x0) / |K|, 0)
    w_bottom = (0, -(y1 - y) / |K|)       w_top   = (0, (y - y0) / |K|)

On an interface edge ``E = [P1, P2]`` (bottom to top) the 1D basis
functions are described by their outward endpoint values, so that
``int_E d/dy v = v_P1 + v_P2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BOTTOM, FACE_SIGN, LEFT, RIGHT, TOP, InterfaceMesh, SubdomainMesh

GAUSS2 = np.polynomial.legendre.leggauss(2)


def gauss_rule(n: int):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def element_matrix_2d(hx, hy, dxx, dyy) -> np.ndarray:
    """``A_K[E, E'] = int_K D^{-1} w_E' . w_E`` for a diagonal ``D``.

    Arguments broadcast; the result has shape ``broadcast_shape + (4, 4)``.
    """
    hx, hy, dxx, dyy = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (hx, hy, dxx, dyy)))
    if np.any(hx <= 0) or np.any(hy <= 0):
        raise ValueError("cell sizes must be positive")
    if np.any(dxx <= 0) or np.any(dyy <= 0):
        raise ValueError("diffusion entries must be positive")
    a = hx / (dxx * hy)
    b = hy / (dyy * hx)
    A = np.zeros(hx.shape + (4, 4))
    A[..., LEFT, LEFT] = A[..., RIGHT, RIGHT] = a / 3.0
    A[..., LEFT, RIGHT] = A[..., RIGHT, LEFT] = -a / 6.0
    A[..., BOTTOM, BOTTOM] = A[..., TOP, TOP] = b / 3.0
    A[..., BOTTOM, TOP] = A[..., TOP, BOTTOM] = -b / 6.0
    return A


def element_matrix_1d(edge_len, d_tangential) -> np.ndarray:
    """``(1/6) D^{-1} |E| [[2, -1], [-1, 2]]``, broadcast over the inputs."""
    L = np.asarray(edge_len, dtype=float)
    D = np.asarray(d_tangential, dtype=float)
    if np.any(L <= 0) or np.any(D <= 0):
        raise ValueError("edge length and tangential diffusion must be positive")
    s = (L / (6.0 * D))[..., None, None]
    return s * np.array([[2.0, -1.0], [-1.0, 2.0]])


def rt0_values(local_x, local_y, hx, hy) -> np.ndarray:
    """Basis values at local coordinates in [0, 1]^2; shape ``(..., 4, 2)``."""
    sx = np.asarray(local_x, dtype=float)
    sy = np.asarray(local_y, dtype=float)
    area = hx * hy
    out = np.zeros(np.broadcast(sx, sy).shape + (4, 2))
    out[..., LEFT, 0] = -(1.0 - sx) * hx / area
    out[..., RIGHT, 0] = sx * hx / area
    out[..., BOTTOM, 1] = -(1.0 - sy) * hy / area
    out[..., TOP, 1] = sy * hy / area
    return out


@dataclass(frozen=True)
class VelocityDOFs:
    """Projection of a velocity field.

    ``cell`` has shape ``(n_cells, 4)``: outward normal flux through each face.
    ``gamma`` has shape ``(n_interface_edges, 2)``: outward endpoint values
    of the tangential component on each interface edge (bottom, top).
    """

    cell: np.ndarray
    gamma: np.ndarray | None = None


def edge_normal_flux(velocity, mesh: SubdomainMesh) -> np.ndarray:
    """``int_E u . n_E`` with the global edge orientation (2-point Gauss)."""
    ends = mesh.edge_endpoints
    normals = mesh.edge_normals
    L = mesh.edge_lengths
    gx, gw = GAUSS2
    flux = np.zeros(mesh.n_edges)
    for xq, wq in zip(0.5 * (gx + 1.0), 0.5 * gw):
        p = ends[:, 0] + xq * (ends[:, 1] - ends[:, 0])
        ux, uy = velocity(p[:, 0], p[:, 1])
        flux += wq * (ux * normals[:, 0] + uy * normals[:, 1])
    return flux * L


def project_velocity(velocity, mesh: SubdomainMesh, interface: InterfaceMesh | None = None,
                     gamma_velocity=None) -> VelocityDOFs:
    """Project ``velocity(x, y) -> (ux, uy)`` onto RT0 degrees of freedom.

    ``gamma_velocity`` (defaults to ``velocity``) is the field whose
    tangential component is interpolated on the interface.
    """
    flux = edge_normal_flux(velocity, mesh)
    cell = flux[mesh.cell_edges] * FACE_SIGN
    gamma = None
    if interface is not None:
        gv = gamma_velocity or velocity
        y = interface.points
        _, uy = gv(np.full(y.shape, interface.x), y)
        uy = np.asarray(uy, dtype=float)
        gamma = np.stack([-uy[:-1], uy[1:]], axis=1)
    return VelocityDOFs(cell, gamma)
