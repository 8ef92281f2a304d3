"""Ventcel data a subdomain sends to its neighbor, computed from a solved trajectory."""
from __future__ import annotations

import numpy as np

from .timegrid import SpaceTimeTrace


def tangential_trace_sum(phi_gamma, xi, u_own, u_nb, d_own, d_nb) -> np.ndarray:
    """Integral over each interface edge of the tangential divergence of the
    tangential trace of the subdomain flux.

    ``phi_gamma`` is ``(..., ny, 2)`` (outward endpoint values of the 1D
    flux), ``xi`` is ``(..., ny + 1)`` over interface points, ``u_own`` and
    ``u_nb`` are ``(ny, 2)`` outward endpoint values of the tangential
    velocities, ``d_own``/``d_nb`` the tangential diffusion per edge.  The
    two rows of the 1D mass relation are summed, so no mass system is solved.
    """
    xi = np.asarray(xi, dtype=float)
    xi_ends = np.stack([xi[..., :-1], xi[..., 1:]], axis=-1)
    ratio = np.asarray(d_own, dtype=float) / np.asarray(d_nb, dtype=float)
    adv_own = (u_own * xi_ends).sum(axis=-1)
    adv_nb = (u_nb * xi_ends).sum(axis=-1)
    return adv_own - ratio * adv_nb + ratio * np.asarray(phi_gamma).sum(axis=-1)


def extract_vtv(subdomain, trajectory, alpha=None, beta=None) -> SpaceTimeTrace:
    """Edge averages of ``phi_i . n_i + alpha_ji lambda + beta_ji (omega_i d_t lambda + div_tau phi)``.

    ``alpha``/``beta`` default to the subdomain's ``send_params`` (the
    coefficients of the receiving side).
    """
    if alpha is None or beta is None:
        sp = subdomain.send_params
        if sp is None:
            raise ValueError("no receiving-side parameters given")
        alpha = sp.alpha_on(subdomain.ny) if alpha is None else alpha
        beta = sp.beta if beta is None else beta
    L = subdomain.lengths
    dt = trajectory.grid.dt[:, None]
    lam = trajectory.lam_gamma
    values = trajectory.flux_gamma[1:] / L + alpha * lam[1:]
    if beta != 0.0:
        tts = tangential_trace_sum(trajectory.phi_gamma[1:], trajectory.xi[1:], subdomain.u_gamma,
                                   subdomain.u_gamma_nb, subdomain.d_gamma, subdomain.d_gamma_nb)
        values = values + beta * (subdomain.omega_gamma * (lam[1:] - lam[:-1]) / dt + tts / L)
    return SpaceTimeTrace(trajectory.grid, values)
