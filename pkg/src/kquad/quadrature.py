"""Optimal quadrature weights, the worst-case error functional, and rule
application.

The embedding Tg(x) = integral of k(x,y) g(y) dmu(y) is either analytic
(periodic Sobolev kernels with g = 1 under the uniform measure integrate
every oscillatory mode to zero, so Tg = 1) or numeric: midpoint-rule grids
for dim <= 2 and Monte Carlo with a reported standard error for dim >= 3.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .domains import MeasureSpec, grid_points, sample_mu_many
from .errors import SingularGramError
from .kernels import KernelSpec

EPS_MACH = 2.0**-52
MC_RELATIVE_SE_LIMIT = 1e-4


class EmbeddingProvider:
    """Evaluates Tg and carries <g, Tg>, the squared norm of Tg in the RKHS.

    The numeric double quadrature behind <g, Tg> is expensive, so it is
    computed on first access of gram_constant and cached.
    """

    def __init__(self, mode: str, values_batch: Callable, gram,
                 g: Optional[Callable] = None, std_error: float = 0.0,
                 notes: Optional[list] = None):
        self.mode = mode  # "analytic" | "numeric"
        self.values_batch = values_batch
        self._gram = gram  # float, or a thunk evaluated lazily
        self.g = g
        self.std_error = std_error
        self.notes = notes if notes is not None else []

    @property
    def gram_constant(self) -> float:
        if callable(self._gram):
            self._gram = float(self._gram())
        if self._gram < -1e-12:
            raise ValueError("gram_constant is a squared norm and must be >= 0")
        return max(self._gram, 0.0)

    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.values_batch(x[None, :])[0])


def embedding(provider: EmbeddingProvider, x) -> float:
    """Tg at a single point."""
    return provider.value(x)


def analytic_embedding(kernel: KernelSpec, measure: MeasureSpec) -> EmbeddingProvider:
    """Constant analytic embedding (g = 1) for kernels that declare one."""
    if kernel.embedding is None:
        raise ValueError(f"kernel {kernel.name!r} has no analytic embedding")
    const = float(kernel.embedding(np.zeros(kernel.dim)))
    # <g, Tg> = integral of Tg against mu = const * mass for g = 1.
    return EmbeddingProvider(
        mode="analytic",
        values_batch=lambda pts: np.full(np.atleast_2d(pts).shape[0], const),
        gram=const * measure.mass,
    )


def numeric_embedding(kernel: KernelSpec, measure: MeasureSpec,
                      g: Optional[Callable] = None, per_dim: int = 256,
                      mc_samples: int = 10**6,
                      rng: Optional[np.random.Generator] = None) -> EmbeddingProvider:
    """Quadrature-backed embedding for arbitrary kernel/measure pairs.

    g defaults to the constant 1.  The dim <= 2 grid path integrates against
    density-weighted midpoint cells; dim >= 3 uses Monte Carlo and records
    the standard error (a note is kept when it exceeds the relative limit).
    """
    notes: list = []
    if measure.dim <= 2:
        pts, w = grid_points(measure, per_dim)
        se = 0.0
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        pts = sample_mu_many(measure, rng, mc_samples)
        w = np.full(mc_samples, measure.mass / mc_samples)
        se = -1.0  # filled per-query below; flat weight MC
    gvals = np.ones(pts.shape[0]) if g is None else np.asarray(
        [g(p) for p in pts], dtype=float)
    wg = w * gvals

    def values_batch(xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        out = np.empty(xs.shape[0])
        chunk = max(1, int(2**22 // max(len(pts), 1)))
        for a in range(0, xs.shape[0], chunk):
            out[a:a + chunk] = kernel.cross_eval(xs[a:a + chunk], pts) @ wg
        return out

    if measure.dim >= 3:
        # Standard error of the MC embedding at a representative point.
        probe = pts[0]
        vals = kernel.cross_eval(probe[None, :], pts)[0] * gvals * measure.mass
        est = float(np.mean(vals))
        se = float(np.std(vals) / math.sqrt(len(vals)))
        if abs(est) > 0 and se > MC_RELATIVE_SE_LIMIT * abs(est):
            notes.append(f"embedding standard error {se:.3g} exceeds "
                         f"{MC_RELATIVE_SE_LIMIT:g} of value {est:.3g}")

    def gram_thunk():
        # <g, Tg> by the same backend: outer sum of Tg over the grid.
        return float(np.sum(wg * values_batch(pts)))

    return EmbeddingProvider(mode="numeric", values_batch=values_batch,
                             gram=gram_thunk, g=g, std_error=max(se, 0.0),
                             notes=notes)


@dataclass
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kernel: KernelSpec
    embedding_values: np.ndarray

    def __post_init__(self):
        if len(self.weights) != len(self.nodes):
            raise ValueError("weights and nodes must have equal length")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")


def optimal_weights(kernel: KernelSpec, S, embedding_values) -> np.ndarray:
    """Solve (k(S,S) + 10 eps_mach trace(k(S,S)) I) w = Tg(S) by Cholesky."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    q = np.asarray(embedding_values, dtype=float)
    K = kernel.gram(S)
    reg = 10.0 * EPS_MACH * float(np.trace(K))
    try:
        cf = cho_factor(K + reg * np.eye(len(K)), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularGramError(f"Gram factorization failed: {exc}") from exc
    return cho_solve(cf, q)


def make_rule(kernel: KernelSpec, S, provider: EmbeddingProvider) -> QuadratureRule:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    tg = provider.values_batch(S)
    w = optimal_weights(kernel, S, tg)
    return QuadratureRule(nodes=S, weights=w, kernel=kernel,
                          embedding_values=tg)


def worst_case_error(kernel: KernelSpec, rule: QuadratureRule,
                     gram_constant: float) -> float:
    """RKHS worst-case error over the unit ball:
    sqrt(<g,Tg> - 2 w^T Tg(S) + w^T k(S,S) w), clamped at zero."""
    if len(rule.nodes) == 0:
        return math.sqrt(max(gram_constant, 0.0))
    K = kernel.gram(rule.nodes)
    w = rule.weights
    err2 = gram_constant - 2.0 * float(w @ rule.embedding_values) \
        + float(w @ K @ w)
    if err2 < -1e-8:
        warnings.warn(f"worst-case error squared is {err2:.3g} < -1e-8; "
                      "check embedding consistency", stacklevel=2)
    return math.sqrt(max(err2, 0.0))


def apply_rule(rule: QuadratureRule, f) -> float:
    """Weighted sum of f over the nodes."""
    vals = np.asarray([f(p) for p in rule.nodes], dtype=float)
    return float(rule.weights @ vals)


def rule_to_csv(rule: QuadratureRule, path, provenance: dict) -> None:
    """One row per node (coordinates, weight); provenance in header comments."""
    with open(path, "w", newline="") as fh:
        for key in sorted(provenance):
            fh.write(f"# {key}={provenance[key]}\n")
        writer = csv.writer(fh)
        dim = rule.nodes.shape[1]
        writer.writerow([f"x{l}" for l in range(dim)] + ["weight"])
        for p, w in zip(rule.nodes, rule.weights):
            writer.writerow([repr(float(v)) for v in p] + [repr(float(w))])
