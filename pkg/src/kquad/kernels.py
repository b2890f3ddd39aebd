"""Kernel definitions: periodic Sobolev, tensor products, Matern 5/2,
Gaussian, and user-supplied black-box kernels.

Every kernel is wrapped in an immutable KernelSpec carrying the metadata the
samplers and quadrature code need: a known bound on the diagonal, optional
analytic embedding values, and (when the Mercer law is known) the eigenvalue
sequence used by the bound checker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from . import _accel
from .errors import DimensionMismatchError, UnsupportedSmoothnessError

ZETA = {2: math.pi**2 / 6, 4: math.pi**4 / 90, 6: math.pi**6 / 945}

# Leading coefficient (-1)^(s-1) (2*pi)^(2s) / (2s)! of the Bernoulli form.
_SOB_COEF = {
    1: 2 * math.pi**2,
    2: -2 * math.pi**4 / 3,
    3: 4 * math.pi**6 / 45,
}


def _bernoulli_even(s: int, u):
    """B_{2s}(u) for s in {1,2,3}; u may be an array."""
    if s == 1:
        return u * u - u + 1.0 / 6.0
    if s == 2:
        return u**4 - 2 * u**3 + u * u - 1.0 / 30.0
    if s == 3:
        return u**6 - 3 * u**5 + 2.5 * u**4 - 0.5 * u * u + 1.0 / 42.0
    raise UnsupportedSmoothnessError(f"unsupported smoothness s={s}")


def sobolev_value(s: int, t):
    """Periodic Sobolev kernel at lag t (vectorized in t)."""
    if s not in (1, 2, 3):
        raise UnsupportedSmoothnessError(f"unsupported smoothness s={s}")
    u = t - np.floor(t)
    return 1.0 + _SOB_COEF[s] * _bernoulli_even(s, u)


def sobolev_kernel(s: int, x: float, y: float) -> float:
    """Periodic Sobolev kernel on [0,1) via the Bernoulli closed form."""
    return float(sobolev_value(s, float(x) - float(y)))


def product_kernel(base: "KernelSpec", x, y) -> float:
    """Coordinatewise product of a 1-d base kernel over matching dims."""
    if base.dim != 1:
        raise DimensionMismatchError("product kernel requires a 1-d base")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionMismatchError(f"point shapes differ: {x.shape} vs {y.shape}")
    out = 1.0
    for a, b in zip(x, y):
        out *= base.evaluate(np.array([a]), np.array([b]))
    return float(out)


def matern52_value(bandwidth: float, r):
    """Matern 5/2 radial profile at (unscaled) distance r."""
    t = np.sqrt(5.0) * np.asarray(r, dtype=float) / bandwidth
    return (1.0 + t + t * t / 3.0) * np.exp(-t)


def matern52_kernel(bandwidth: float, x, y) -> float:
    """Matern 5/2 kernel with r = ||x-y|| / bandwidth."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(matern52_value(bandwidth, np.linalg.norm(x - y)))


def gaussian_kernel(lengthscale: float, x, y) -> float:
    """Squared-exponential kernel exp(-||x-y||^2 / (2 l^2))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r2 = float(np.sum((x - y) ** 2))
    return math.exp(-0.5 * r2 / lengthscale**2)


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric PSD kernel plus the metadata the pipeline relies on.

    evaluate takes two points (1-d float arrays) and returns a float.
    cross, when present, evaluates the full matrix k(A[i], B[j]) in one
    vectorized call; a generic loop fallback is used otherwise.
    accel identifies the kernel to the compiled sampling core.
    """

    dim: int
    evaluate: Callable[[np.ndarray, np.ndarray], float]
    diagonal_bound: float
    name: str = "blackbox"
    params: dict = field(default_factory=dict)
    stationary: bool = False
    embedding: Optional[Callable[[np.ndarray], float]] = None
    trace_T: Optional[float] = None
    eigenvalues: Optional[Callable[[int], float]] = None
    cross: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    accel: Optional[tuple] = None  # (kind code, float param, int param)

    def diag(self, x) -> float:
        if self.stationary:
            return self.diagonal_bound
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.evaluate(x, x))

    def diag_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.stationary:
            return np.full(pts.shape[0], self.diagonal_bound)
        return np.array([self.evaluate(p, p) for p in pts])

    def cross_eval(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix k(a[i], b[j]); a is (m,dim), b is (n,dim)."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if self.cross is not None:
            return self.cross(a, b)
        out = np.empty((a.shape[0], b.shape[0]))
        for i, p in enumerate(a):
            for j, q in enumerate(b):
                out[i, j] = self.evaluate(p, q)
        return out

    def gram(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        g = self.cross_eval(pts, pts)
        return 0.5 * (g + g.T)


def _sobolev_eigenvalue(s: int):
    def lam(i: int) -> float:
        # Sorted Mercer spectrum against Unif[0,1]: 1, then m^{-2s} twice
        # (cosine and sine modes) for m = 1, 2, ...
        if i < 1:
            raise ValueError("eigenvalue index is 1-based")
        if i == 1:
            return 1.0
        return float(i // 2) ** (-2 * s)

    return lam


def sobolev(s: int) -> KernelSpec:
    """Periodic Sobolev kernel on [0,1] with smoothness s in {1,2,3}."""
    if s not in (1, 2, 3):
        raise UnsupportedSmoothnessError(f"unsupported smoothness s={s}")
    bound = 1.0 + 2.0 * ZETA[2 * s]

    def ev(x, y):
        return float(sobolev_value(s, x[0] - y[0]))

    def cross(a, b):
        return sobolev_value(s, a[:, :1] - b[:, 0][None, :])

    return KernelSpec(
        dim=1,
        evaluate=ev,
        diagonal_bound=bound,
        name="sobolev",
        params={"s": s},
        stationary=True,
        embedding=lambda x: 1.0,  # T1 = 1: every oscillatory mode integrates to 0
        trace_T=bound,
        eigenvalues=_sobolev_eigenvalue(s),
        cross=cross,
        accel=(_accel.KIND_SOBOLEV1, 0.0, s),
    )


def sobolev_product(s: int, dim: int = 3) -> KernelSpec:
    """Tensor product of 1-d periodic Sobolev kernels on [0,1]^dim."""
    if s not in (1, 2, 3):
        raise UnsupportedSmoothnessError(f"unsupported smoothness s={s}")
    bound = (1.0 + 2.0 * ZETA[2 * s]) ** dim

    def ev(x, y):
        if x.shape[0] != dim or y.shape[0] != dim:
            raise DimensionMismatchError(f"expected {dim}-d points")
        return float(np.prod(sobolev_value(s, x - y)))

    def cross(a, b):
        out = np.ones((a.shape[0], b.shape[0]))
        for l in range(dim):
            out *= sobolev_value(s, a[:, l][:, None] - b[:, l][None, :])
        return out

    return KernelSpec(
        dim=dim,
        evaluate=ev,
        diagonal_bound=bound,
        name="sobolev-product",
        params={"s": s, "dim": dim},
        stationary=True,
        embedding=lambda x: 1.0,
        trace_T=bound,
        cross=cross,
        accel=(_accel.KIND_SOBOLEV_PROD, 0.0, s),
    )


def matern52(bandwidth: float, dim: int = 2) -> KernelSpec:
    """Matern 5/2 kernel; unit diagonal."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")

    def ev(x, y):
        return float(matern52_value(bandwidth, np.linalg.norm(x - y)))

    def cross(a, b):
        return matern52_value(bandwidth, cdist(a, b))

    return KernelSpec(
        dim=dim,
        evaluate=ev,
        diagonal_bound=1.0,
        name="matern52",
        params={"bandwidth": bandwidth, "dim": dim},
        stationary=True,
        cross=cross,
        accel=(_accel.KIND_MATERN52, float(bandwidth), 0),
    )


def gaussian(lengthscale: float, dim: int = 1) -> KernelSpec:
    """Squared-exponential kernel; unit diagonal."""
    if lengthscale <= 0:
        raise ValueError("lengthscale must be positive")

    def ev(x, y):
        return gaussian_kernel(lengthscale, x, y)

    def cross(a, b):
        return np.exp(-0.5 * cdist(a, b, "sqeuclidean") / lengthscale**2)

    return KernelSpec(
        dim=dim,
        evaluate=ev,
        diagonal_bound=1.0,
        name="gaussian",
        params={"lengthscale": lengthscale, "dim": dim},
        stationary=True,
        cross=cross,
        accel=(_accel.KIND_GAUSSIAN, float(lengthscale), 0),
    )


def blackbox(evaluate, dim: int, diagonal_bound: float, name: str = "blackbox",
             stationary: bool = False, **extra) -> KernelSpec:
    """Wrap a user-supplied kernel; a diagonal bound must be declared."""
    if diagonal_bound <= 0:
        raise ValueError("diagonal_bound must be positive")

    def ev(x, y):
        v = float(evaluate(x, y))
        if not math.isfinite(v):
            raise ValueError("kernel returned a non-finite value")
        return v

    return KernelSpec(dim=dim, evaluate=ev, diagonal_bound=diagonal_bound,
                      name=name, stationary=stationary, **extra)


def from_gram(gram: np.ndarray) -> KernelSpec:
    """Kernel over index points 0..m-1 backed by an explicit Gram matrix.

    Points are 1-d coordinates holding the atom index; this is the finite
    oracle substrate used by the exactness tests.
    """
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram must be square")
    if not np.allclose(gram, gram.T, atol=1e-12):
        raise ValueError("gram must be symmetric")

    def ev(x, y):
        return float(gram[int(round(x[0])), int(round(y[0]))])

    def cross(a, b):
        ia = np.rint(a[:, 0]).astype(int)
        ib = np.rint(b[:, 0]).astype(int)
        return gram[np.ix_(ia, ib)]

    return KernelSpec(
        dim=1,
        evaluate=ev,
        diagonal_bound=float(np.max(np.diag(gram))),
        name="gram",
        params={"size": gram.shape[0]},
        cross=cross,
    )


_BY_NAME = {
    "sobolev": lambda p: (sobolev(int(p.get("s", 1))) if int(p.get("dim", 1)) == 1
                          else sobolev_product(int(p.get("s", 1)), int(p["dim"]))),
    "matern52": lambda p: matern52(float(p.get("bandwidth", 2.0)), int(p.get("dim", 2))),
    "gaussian": lambda p: gaussian(float(p.get("lengthscale", 1.0)), int(p.get("dim", 1))),
}


def by_name(name: str, params: dict) -> KernelSpec:
    """Kernel lookup for the CLI config (e.g. kernel=sobolev, s=3, dim=1)."""
    try:
        factory = _BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; known: {sorted(_BY_NAME)}") from None
    return factory(params)
