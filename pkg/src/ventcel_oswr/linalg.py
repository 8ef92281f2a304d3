"""Sparse assembly, cached direct factorizations and a weighted-inner-product GMRES."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(RuntimeError):
    pass


class TripletBuilder:
    """Collects ``(row, col, value)`` triplets; duplicates are summed."""

    def __init__(self, shape):
        self.shape = shape
        self._rows, self._cols, self._vals = [], [], []

    def add(self, rows, cols, vals):
        rows, cols, vals = np.broadcast_arrays(np.asarray(rows), np.asarray(cols), np.asarray(vals, dtype=float))
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(vals.ravel())

    def tocsr(self) -> sp.csr_matrix:
        if not self._rows:
            return sp.csr_matrix(self.shape)
        A = sp.coo_matrix(
            (np.concatenate(self._vals), (np.concatenate(self._rows), np.concatenate(self._cols))),
            shape=self.shape,
        ).tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A


@dataclass
class Factorization:
    """Sparse LU factors (SuperLU with COLAMD ordering) of a square matrix."""

    n: int
    _lu: object = field(repr=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=float))


def factorize(A) -> Factorization:
    A = sp.csc_matrix(A)
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {A.shape}")
    empty = np.flatnonzero(np.diff(sp.csr_matrix(A).indptr) == 0)
    if empty.size:
        raise SingularMatrixError(f"matrix is singular: row {empty[0]} is empty")
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularMatrixError(f"matrix is singular: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    bad = np.flatnonzero(diag <= n * np.finfo(float).eps * diag.max())
    if bad.size:
        row = int(np.flatnonzero(lu.perm_r == bad[0])[0])
        raise SingularMatrixError(f"matrix is numerically singular: zero pivot at row {row}")
    return Factorization(n, lu)


@dataclass
class GMRESResult:
    x: np.ndarray
    residuals: list[float]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1


def gmres(apply: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
          inner: Callable[[np.ndarray, np.ndarray], float] | None = None,
          tol: float = 1e-6, max_iter: int = 100, x0: np.ndarray | None = None,
          callback: Callable[[int, np.ndarray], None] | None = None) -> GMRESResult:
    """Full (unrestarted) GMRES with modified Gram-Schmidt Arnoldi.

    ``inner`` is the inner product defining the minimized residual norm
    (Euclidean by default).  ``residuals[k]`` is the residual of iterate k
    relative to the initial residual.  ``callback(k, x_k)`` is invoked for
    every iterate when given.
    """
    if inner is None:
        inner = np.dot
    b = np.asarray(rhs, dtype=float)
    x0 = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()

    def norm(v):
        return np.sqrt(max(inner(v, v), 0.0))

    r0 = b - apply(x0) if np.any(x0) else b.copy()
    beta = norm(r0)
    residuals = [1.0]
    if callback is not None:
        callback(0, x0)
    if beta == 0.0:
        return GMRESResult(x0, residuals, True)

    V = [r0 / beta]
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta

    def iterate(k):
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k])
        return x0 + sum(yi * vi for yi, vi in zip(y, V))

    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        j = k - 1
        w = apply(V[j])
        for i in range(k):
            H[i, j] = inner(w, V[i])
            w = w - H[i, j] * V[i]
        h_next = norm(w)
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        denom = np.hypot(H[j, j], h_next)
        cs[j], sn[j] = H[j, j] / denom, h_next / denom
        H[j, j] = denom
        g[k] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        residuals.append(abs(g[k]) / beta)
        breakdown = h_next <= 1e-14 * beta
        if callback is not None:
            callback(k, iterate(k))
        if residuals[-1] < tol or breakdown:
            converged = True
            break
        V.append(w / h_next)
    return GMRESResult(iterate(k), residuals, converged)
