"""Spaces and measures: unit boxes with uniform measure, a crescent region
with density x^2 + y^2, and finite discrete spaces.

Sampling from the base measure uses rejection against a uniform proposal on
the bounding box; sampling from the diagonal measure k(x,x) dmu(x) adds one
more rejection layer (skipped entirely for stationary kernels, whose
diagonal is constant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMeasureError
from .kernels import KernelSpec

DEFAULT_PROPOSAL_CAP = 10**6

# Crescent geometry: outer disc minus an offset inner disc.  The exact
# coordinates are presentational; these constants are the reference shape,
# sized so the bandwidth-2 Matern kernel retains spatial structure across
# the region.
CRESCENT_OUTER_RADIUS = 2.0
CRESCENT_INNER_CENTER = (1.0, 0.0)
CRESCENT_INNER_RADIUS = 1.6


@dataclass(frozen=True)
class DiscreteSpace:
    """Finite substrate: atoms with nonnegative weights (mu atoms)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights must have equal length")
        if np.any(w < 0) or not np.isfinite(w.sum()) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive finite sum")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class MeasureSpec:
    """A Borel measure given by a bounding box, a density, and a sampler.

    density is taken w.r.t. Lebesgue measure on the bounding box (or as atom
    weights for discrete spaces); base_sampler draws from mu normalized to a
    probability measure.  mass is the total measure mu(X).
    """

    dim: int
    membership: Callable[[np.ndarray], bool]
    density: Callable[[np.ndarray], float]
    density_bound: float
    bounding_box: np.ndarray  # shape (dim, 2)
    base_sampler: Callable[[np.random.Generator], np.ndarray]
    mass: float = 1.0
    uniform: bool = False
    atoms: Optional[np.ndarray] = None
    atom_weights: Optional[np.ndarray] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    membership_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    density_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # Points on the topological boundary of X (envelope optimizers need
    # them: for curved regions the binding maxima often sit on the rim).
    boundary_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.membership_batch is not None:
            return self.membership_batch(pts)
        return np.array([self.membership(p) for p in pts], dtype=bool)

    def density_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.density_batch is not None:
            return self.density_batch(pts)
        return np.array([self.density(p) for p in pts])


def unit_box(dim: int) -> MeasureSpec:
    """Uniform probability measure on [0,1]^dim."""
    box = np.tile([0.0, 1.0], (dim, 1))

    def member(p):
        return bool(np.all((p >= 0.0) & (p <= 1.0)))

    return MeasureSpec(
        dim=dim,
        membership=member,
        density=lambda p: 1.0,
        density_bound=1.0,
        bounding_box=box,
        base_sampler=lambda rng: rng.random(dim),
        mass=1.0,
        uniform=True,
        name="box",
        params={"dim": dim},
        membership_batch=lambda P: np.all((P >= 0.0) & (P <= 1.0), axis=1),
        density_batch=lambda P: np.ones(P.shape[0]),
    )


def _crescent_member__batch(P: np.ndarray) -> np.ndarray:
    r_out = P[:, 0] ** 2 + P[:, 1] ** 2
    dx = P[:, 0] - CRESCENT_INNER_CENTER[0]
    dy = P[:, 1] - CRESCENT_INNER_CENTER[1]
    r_in = dx * dx + dy * dy
    return (r_out <= CRESCENT_OUTER_RADIUS**2) & (r_in >= CRESCENT_INNER_RADIUS**2)


@lru_cache(maxsize=1)
def crescent() -> MeasureSpec:
    """Crescent region with measure density x^2 + y^2 (not normalized)."""
    R = CRESCENT_OUTER_RADIUS
    box = np.array([[-R, R], [-R, R]])
    bound = R * R  # sup of x^2+y^2 on the outer disc

    def member(p):
        return bool(_crescent_member__batch(p[None, :])[0])

    def dens(p):
        return float(p[0] ** 2 + p[1] ** 2)

    def sampler(rng):
        for _ in range(DEFAULT_PROPOSAL_CAP):
            p = (rng.random(2) * 2.0 - 1.0) * R
            u = rng.random()
            if u * bound <= dens(p) and member(p):
                return p
        raise DegenerateMeasureError("crescent sampler never accepted")

    # Total mass of (x^2+y^2) dx dy over the crescent, by midpoint rule.
    g = ((np.arange(2048) + 0.5) / 2048 * 2.0 - 1.0) * R
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = _crescent_member__batch(pts)
    cell = (2.0 * R / 2048) ** 2
    mass = float(np.sum((pts[inside, 0] ** 2 + pts[inside, 1] ** 2)) * cell)

    # Boundary arcs, cut at the cusps where the two circles intersect.
    cx, _cy = CRESCENT_INNER_CENTER
    r_in = CRESCENT_INNER_RADIUS
    theta_cusp = math.acos((R * R + cx * cx - r_in * r_in) / (2.0 * R * cx))
    phi_cusp = math.acos((r_in * r_in + cx * cx - R * R) / (2.0 * r_in * cx))

    def boundary(rng, count):
        # Chebyshev-clustered parameters: quadratically denser toward the
        # cusps, where the residual field develops spikes much narrower
        # than any uniform spacing.
        half = count // 2
        t = 0.5 * (1.0 - np.cos(np.pi * (np.arange(half) + 0.5) / half))
        th = theta_cusp + (2 * math.pi - 2 * theta_cusp) * t
        outer = np.column_stack([np.cos(th), np.sin(th)]) * (R * (1 - 1e-12))
        t = 0.5 * (1.0 - np.cos(np.pi * (np.arange(count - half) + 0.5)
                                / (count - half)))
        ph = phi_cusp + (2 * math.pi - 2 * phi_cusp) * t
        inner = np.column_stack([cx + (r_in * (1 + 1e-12)) * np.cos(ph),
                                 (r_in * (1 + 1e-12)) * np.sin(ph)])
        return np.vstack([outer, inner])

    return MeasureSpec(
        dim=2,
        membership=member,
        density=dens,
        density_bound=bound,
        bounding_box=box,
        base_sampler=sampler,
        mass=mass,
        uniform=False,
        name="crescent",
        params={},
        membership_batch=_crescent_member__batch,
        density_batch=lambda P: P[:, 0] ** 2 + P[:, 1] ** 2,
        boundary_sampler=boundary,
    )


def from_discrete(space: DiscreteSpace) -> MeasureSpec:
    """Embed a finite space as a MeasureSpec with categorical sampling."""
    pts = space.points
    w = space.weights
    cum = np.cumsum(w) / w.sum()
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    box = np.column_stack([lo, hi])

    def member(p):
        return bool(np.any(np.all(np.abs(pts - p) < 1e-9, axis=1)))

    def dens(p):
        hits = np.all(np.abs(pts - p) < 1e-9, axis=1)
        return float(w[hits].sum())

    def sampler(rng):
        idx = int(np.searchsorted(cum, rng.random(), side="right"))
        return pts[min(idx, len(w) - 1)].copy()

    return MeasureSpec(
        dim=pts.shape[1],
        membership=member,
        density=dens,
        density_bound=float(w.max()),
        bounding_box=box,
        base_sampler=sampler,
        mass=float(w.sum()),
        uniform=False,
        atoms=pts,
        atom_weights=w,
        name="discrete",
        params={"size": len(w)},
    )


def sample_mu(measure: MeasureSpec, rng: np.random.Generator,
              cap: int = DEFAULT_PROPOSAL_CAP) -> np.ndarray:
    """One draw from mu normalized to a probability measure."""
    if measure.uniform or measure.atoms is not None:
        return measure.base_sampler(rng)
    lo = measure.bounding_box[:, 0]
    span = measure.bounding_box[:, 1] - lo
    for _ in range(cap):
        p = lo + span * rng.random(measure.dim)
        u = rng.random()
        if u * measure.density_bound <= measure.density(p) and measure.membership(p):
            return p
    raise DegenerateMeasureError(
        f"no acceptance within {cap} proposals for measure {measure.name!r}")


def sample_mu_many(measure: MeasureSpec, rng: np.random.Generator,
                   n: int) -> np.ndarray:
    """n iid draws from mu (chunked rejection for non-uniform densities)."""
    if n == 0:
        return np.empty((0, measure.dim))
    lo = measure.bounding_box[:, 0]
    span = measure.bounding_box[:, 1] - lo
    if measure.uniform:
        return lo + span * rng.random((n, measure.dim))
    if measure.atoms is not None:
        cum = np.cumsum(measure.atom_weights) / measure.atom_weights.sum()
        idx = np.searchsorted(cum, rng.random(n), side="right")
        return measure.atoms[np.minimum(idx, len(cum) - 1)].copy()
    out = np.empty((n, measure.dim))
    have = 0
    budget = DEFAULT_PROPOSAL_CAP
    while have < n and budget > 0:
        m = min(max(4 * (n - have), 256), 1 << 16)
        budget -= m
        P = lo + span * rng.random((m, measure.dim))
        u = rng.random(m)
        ok = (u * measure.density_bound <= measure.density_at(P)) & measure.contains(P)
        take = min(int(ok.sum()), n - have)
        out[have:have + take] = P[ok][:take]
        have += take
    if have < n:
        raise DegenerateMeasureError("batch sampling exhausted its proposal budget")
    return out


def sample_diagonal(measure: MeasureSpec, kernel: KernelSpec,
                    rng: np.random.Generator,
                    cap: int = DEFAULT_PROPOSAL_CAP) -> np.ndarray:
    """One draw from k(x,x) dmu(x), normalized.

    Stationary kernels have a constant diagonal, so the diagonal measure is
    mu itself and no extra rejection layer is needed.
    """
    if kernel.stationary:
        return sample_mu(measure, rng, cap)
    for _ in range(cap):
        p = sample_mu(measure, rng, cap)
        u = rng.random()
        if u * kernel.diagonal_bound <= kernel.diag(p):
            return p
    raise DegenerateMeasureError(
        f"diagonal sampler stalled after {cap} proposals for {measure.name!r}")


def grid_points(measure: MeasureSpec, per_dim: int):
    """Midpoint-rule quadrature grid restricted to the space.

    Returns (points, weights) with weights = density * cell volume, so that
    sum(w * f(points)) approximates the integral of f against mu.
    """
    lo = measure.bounding_box[:, 0]
    hi = measure.bounding_box[:, 1]
    axes = [(np.arange(per_dim) + 0.5) / per_dim * (hi[l] - lo[l]) + lo[l]
            for l in range(measure.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    cell = float(np.prod((hi - lo) / per_dim))
    inside = measure.contains(pts)
    pts = pts[inside]
    w = measure.density_at(pts) * cell
    return pts, w


def diagonal_trace(measure: MeasureSpec, kernel: KernelSpec,
                   per_dim: int = 512, mc_samples: int = 10**6,
                   rng: Optional[np.random.Generator] = None) -> float:
    """Trace of the integral operator: integral of k(x,x) against mu.

    Uses the kernel's analytic value when available (stationary kernels on
    probability measures), a grid for dim <= 2, and Monte Carlo above.
    """
    if kernel.stationary:
        return kernel.diagonal_bound * measure.mass
    if measure.atoms is not None:
        return float(np.sum(measure.atom_weights * kernel.diag_batch(measure.atoms)))
    if kernel.trace_T is not None:
        return kernel.trace_T
    if measure.dim <= 2:
        pts, w = grid_points(measure, per_dim)
        return float(np.sum(w * kernel.diag_batch(pts)))
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = sample_mu_many(measure, rng, mc_samples)
    return float(np.mean(kernel.diag_batch(pts)) * measure.mass)
