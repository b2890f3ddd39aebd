"""Numeric embodiment of the eigenvalue recurrence behind the main error
bound: the map applied to a truncated spectrum, a checker for the
node-count condition, and aggregation of empirical error curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .quadrature import EmbeddingProvider, make_rule, worst_case_error


@dataclass(frozen=True)
class EigenvalueSequence:
    """Truncated nonincreasing spectrum plus the analytic mass beyond it.

    tail_extra is the exact sum of all dropped eigenvalues; it enters every
    denominator but is held fixed under iteration, which only slows the
    decay of the stored entries (a conservative choice for bound checking).
    """

    values: np.ndarray
    tail_extra: float = 0.0
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) == 0:
            raise ValueError("values must be a nonempty 1-d array")
        if np.any(v < 0):
            raise ValueError("eigenvalues must be nonnegative")
        if np.any(np.diff(v) > 1e-12 * max(v[0], 1.0)):
            raise ValueError("eigenvalues must be nonincreasing")
        object.__setattr__(self, "values", v)

    def total(self) -> float:
        return float(self.values.sum()) + self.tail_extra

    def tail_sum(self, r: int) -> float:
        """Sum of eigenvalues of index > r (0-based count of leading terms)."""
        if r < 0:
            raise ValueError("r must be >= 0")
        if r >= len(self.values):
            return self.tail_extra
        return float(self.values[r:].sum()) + self.tail_extra


def sobolev_sequence(s: int, n_terms: int = 10**4) -> EigenvalueSequence:
    """Mercer spectrum of the periodic Sobolev kernel against Unif[0,1].

    Sorted values are 1 followed by m^{-2s} twice for m = 1, 2, ...; the
    mass beyond the stored modes is the Hurwitz zeta tail 2 zeta(2s, M+1).
    """
    m_max = (n_terms - 1) // 2
    modes = np.arange(1, m_max + 1, dtype=float) ** (-2 * s)
    values = np.concatenate([[1.0], np.repeat(modes, 2)])
    tail = 2.0 * float(_hurwitz_zeta(2 * s, m_max + 1))
    return EigenvalueSequence(values=values, tail_extra=tail,
                              label=f"sobolev-s{s}")


def phi_step(seq: EigenvalueSequence) -> EigenvalueSequence:
    """One application of lambda_j <- lambda_j - lambda_j^2 / sum(lambda).

    A zero-total spectrum is a fixed point.  The update preserves
    nonnegativity and ordering and strictly decreases the stored mass when
    any entry is positive.
    """
    total = seq.total()
    if total <= 0.0:
        return seq
    v = seq.values
    new = v - v * v / total
    assert np.all(new >= -1e-15 * max(v[0], 1.0)), "nonnegativity violated"
    assert np.all(np.diff(new) <= 1e-12 * max(v[0], 1.0)), "ordering violated"
    assert np.all(new <= v + 1e-15), "entries may not increase"
    if np.any(v > 0):
        assert new.sum() < v.sum(), "trace must strictly decrease"
    new = np.maximum(new, 0.0)
    new = np.minimum.accumulate(new)  # scrub roundoff-level order violations
    return EigenvalueSequence(values=new, tail_extra=seq.tail_extra,
                              label=seq.label)


@dataclass(frozen=True)
class BoundReport:
    r: int
    delta: float
    tail: float
    n_condition: int
    lambda1_after: float
    threshold: float
    passed: bool
    degenerate: bool = False
    a: float = 0.0
    epsilon: float = 0.0
    n_refined: int = 0

    def summary(self) -> str:
        if self.degenerate:
            return (f"r={self.r} delta={self.delta:g}: degenerate tail "
                    "(zero mass beyond rank r); condition is vacuous")
        status = "PASS" if self.passed else "FAIL"
        return (f"r={self.r} delta={self.delta:g}: n={self.n_condition} "
                f"lambda1={self.lambda1_after:.3e} <= "
                f"threshold={self.threshold:.3e} [{status}] "
                f"(refined split a={self.a:.3e}, eps={self.epsilon:g}, "
                f"n={self.n_refined})")


def check_bound(seq: EigenvalueSequence, r: int, delta: float) -> BoundReport:
    """Iterate the recurrence for the node count given by the sufficient
    condition and verify lambda_1 lands below delta * tail(r)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    tail = seq.tail_sum(r)
    lam1 = float(seq.values[0])
    if tail <= 0.0 or lam1 <= 0.0:
        return BoundReport(r=r, delta=delta, tail=tail, n_condition=0,
                           lambda1_after=lam1, threshold=0.0, passed=True,
                           degenerate=True)
    n = math.ceil(r * math.log(2.0 * lam1 / (delta * tail)) + 2.0 / delta)
    n = max(n, 0)
    cur = seq
    for _ in range(n):
        cur = phi_step(cur)
    lam1_n = float(cur.values[0])
    threshold = delta * tail
    a = 0.5 * delta * tail
    eps = 0.5 * delta
    n_refined = max(math.ceil(r * math.log(lam1 / a) + 1.0 / eps), 0)
    return BoundReport(r=r, delta=delta, tail=tail, n_condition=n,
                       lambda1_after=lam1_n, threshold=threshold,
                       passed=bool(lam1_n <= threshold), a=a, epsilon=eps,
                       n_refined=n_refined)


@dataclass(frozen=True)
class ErrorCurveRow:
    n: int
    mean: float
    q10: float
    q90: float
    mean_time: float


def empirical_error_curve(traces, kernel, provider: EmbeddingProvider):
    """Aggregate worst-case errors of sampled rules, grouped by node count.

    Returns rows sorted by n with mean and 10%/90% quantiles over trials.
    """
    by_n: dict = {}
    for tr in traces:
        rule = make_rule(kernel, tr.nodes, provider)
        err = worst_case_error(kernel, rule, provider.gram_constant)
        by_n.setdefault(len(tr.nodes), []).append((err, tr.wall_time))
    rows = []
    for n in sorted(by_n):
        errs = np.array([e for e, _ in by_n[n]])
        times = np.array([t for _, t in by_n[n]])
        rows.append(ErrorCurveRow(n=n, mean=float(errs.mean()),
                                  q10=float(np.quantile(errs, 0.10)),
                                  q90=float(np.quantile(errs, 0.90)),
                                  mean_time=float(times.mean())))
    return rows


def fit_loglog_slope(ns, values, n_lo: int = 8, n_hi: int = 128) -> float:
    """Least-squares slope of log2(value) against log2(n) on [n_lo, n_hi].

    Node counts below 8 are excluded by default: preasymptotic effects
    dominate there.
    """
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray(values, dtype=float)
    keep = (ns >= n_lo) & (ns <= n_hi) & (vals > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two points inside the fit window")
    x = np.log2(ns[keep])
    y = np.log2(vals[keep])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
