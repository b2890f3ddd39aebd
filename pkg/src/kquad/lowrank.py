"""Incremental Nystrom/Cholesky engine.

CholeskyState tracks the selected nodes S and the lower-triangular factor L
of k(S,S).  The residual diagonal d = k(x,x) - k_S(x,x) is obtained from a
kernel row followed by a forward substitution; accepted pivots append the
row [c^T sqrt(d)] to L.  nystrom_direct is the independent pseudoinverse
formulation used to cross-check the iterative path.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from . import _accel
from .errors import NonPositivePivotError
from .kernels import KernelSpec

# Proposals whose residual falls below PIVOT_RTOL * k(s,s) are treated as
# zero-residual: never accepted, so sqrt(d) cannot see a negative roundoff.
PIVOT_RTOL = 1e-12


class CholeskyState:
    """Selected nodes with the running Cholesky factor of k(S,S).

    Single-writer: the sampling loop owns the state; concurrent reads are
    safe only while no extension is in flight.
    """

    def __init__(self, kernel: KernelSpec, capacity: int = 64):
        self.kernel = kernel
        self.size = 0
        self._nodes = np.zeros((capacity, kernel.dim))
        self._L = np.zeros((capacity, capacity))

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes[: self.size].copy()

    @property
    def factor(self) -> np.ndarray:
        return self._L[: self.size, : self.size].copy()

    def _grow(self):
        cap = self._L.shape[0] * 2
        nodes = np.zeros((cap, self.kernel.dim))
        L = np.zeros((cap, cap))
        nodes[: self.size] = self._nodes[: self.size]
        L[: self.size, : self.size] = self._L[: self.size, : self.size]
        self._nodes, self._L = nodes, L

    def probe(self, x: np.ndarray) -> float:
        """Residual diagonal at x; leaves c = L^{-1} k(S,x) in the next row.

        A subsequent commit(x, d) reuses that row, so probe/commit pairs
        must not interleave with other probes.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        i = self.size
        if i == self._L.shape[0]:
            self._grow()
        kxx = self.kernel.diag(x)
        if i == 0:
            return kxx
        accel = self.kernel.accel
        if accel is not None and _accel.use_compiled():
            kind, p1, s = accel
            return float(_accel.core().residual_probe(
                self._L, self._nodes, i, x[None, :], kind, p1, s, kxx,
                self._L[i]))
        b = self.kernel.cross_eval(self._nodes[:i], x[None, :])[:, 0]
        c = solve_triangular(self._L[:i, :i], b, lower=True,
                             check_finite=False)
        self._L[i, :i] = c
        return kxx - float(c @ c)

    def commit(self, x: np.ndarray, d: float) -> None:
        """Accept the most recent probe as node number size+1."""
        if d <= 0:
            raise NonPositivePivotError(f"non-positive pivot d={d}")
        i = self.size
        self._nodes[i] = x
        self._L[i, i] = np.sqrt(d)
        self.size = i + 1

    def residual_diag_batch(self, pts: np.ndarray) -> np.ndarray:
        """Residual diagonal at many probe points (does not touch state)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        kdiag = self.kernel.diag_batch(pts)
        i = self.size
        if i == 0:
            return kdiag
        accel = self.kernel.accel
        if accel is not None and _accel.use_compiled():
            kind, p1, s = accel
            out = np.empty(pts.shape[0])
            _accel.core().residual_diag_many(
                self._L, self._nodes, i, np.ascontiguousarray(pts), kind, p1,
                s, kdiag, out)
            return out
        B = self.kernel.cross_eval(self._nodes[:i], pts)
        C = solve_triangular(self._L[:i, :i], B, lower=True,
                             check_finite=False)
        return kdiag - np.sum(C * C, axis=0)


def residual_kernel(state: CholeskyState, x) -> tuple[float, np.ndarray]:
    """(d, c) with c = L^{-1} k(S,x) and d = k(x,x) - ||c||^2."""
    d = state.probe(x)
    c = state._L[state.size, : state.size].copy()
    return float(d), c


def extend(state: CholeskyState, x, d: float, c: np.ndarray) -> CholeskyState:
    """Append node x with the (d, c) pair produced by residual_kernel."""
    if d <= 0:
        raise NonPositivePivotError(f"non-positive pivot d={d}")
    i = state.size
    if i == state._L.shape[0]:
        state._grow()
    state._L[i, :i] = c
    state.commit(np.atleast_1d(np.asarray(x, dtype=float)), d)
    return state


def nystrom_direct(kernel: KernelSpec, S, x, y) -> float:
    """k(x,S) k(S,S)^+ k(S,y) via spectral pseudoinverse.

    Independent of the iterative Cholesky path; eigenvalues below
    1e-12 * lambda_max are treated as zero.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] == 0:
        return 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    K = kernel.gram(S)
    w, V = np.linalg.eigh(K)
    thresh = 1e-12 * max(float(w.max()), 0.0)
    inv = np.where(w > thresh, 1.0 / np.where(w > thresh, w, 1.0), 0.0)
    kx = kernel.cross_eval(x[None, :], S)[0]
    ky = kernel.cross_eval(S, y[None, :])[:, 0]
    return float(kx @ V @ (inv * (V.T @ ky)))
