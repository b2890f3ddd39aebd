"""Invariant suite behind the `check` subcommand.

Each check returns (name, passed, detail).  The discrete exactness check
compares the rejection samplers against brute-force enumeration of the
first-two-node distribution on a small random PSD Gram matrix.
"""

from __future__ import annotations

import numpy as np

from . import kernels, theory
from .domains import DiscreteSpace, from_discrete, unit_box
from .lowrank import CholeskyState, extend, nystrom_direct, residual_kernel
from .quadrature import analytic_embedding, make_rule, worst_case_error
from .samplers import (SamplerConfig, make_rng, rpcholesky_discrete,
                       rpcholesky_rejection, run_sampler, trial_rng)


def enumerate_first_two(space: DiscreteSpace, kernel) -> np.ndarray:
    """Exact joint law P[s1 = a, s2 = b] of the first two sampled nodes."""
    pts, w = space.points, space.weights
    m = len(w)
    diag = kernel.diag_batch(pts)
    first = w * diag
    first = first / first.sum()
    P = np.zeros((m, m))
    cross = kernel.cross_eval(pts, pts)
    for a in range(m):
        if first[a] <= 0 or diag[a] <= 0:
            continue
        resid = np.maximum(diag - cross[a] ** 2 / diag[a], 0.0)
        second = w * resid
        total = second.sum()
        if total > 0:
            P[a] = first[a] * second / total
    return P


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def random_psd_gram(rng: np.random.Generator, m: int = 5) -> np.ndarray:
    A = rng.normal(size=(m, m + 2))
    G = A @ A.T / (m + 2)
    return 0.5 * (G + G.T)


def pair_histogram(sampler_fn, space, kernel, runs: int, seed: int) -> np.ndarray:
    """Empirical first-two-node distribution over many seeded runs."""
    m = len(space.weights)
    counts = np.zeros((m, m))
    for t in range(runs):
        trace = sampler_fn(trial_rng(seed, t))
        a = int(round(trace.nodes[0, 0]))
        b = int(round(trace.nodes[1, 0]))
        counts[a, b] += 1
    return counts / runs


def check_kernel_symmetry_psd(seed: int = 0):
    rng = make_rng(seed)
    specs = [kernels.sobolev(1), kernels.sobolev(2), kernels.sobolev(3),
             kernels.sobolev_product(1, 3), kernels.matern52(2.0, 2),
             kernels.gaussian(0.7, 2)]
    worst_sym = 0.0
    worst_eig = 0.0
    for spec in specs:
        for _ in range(8):
            pts = rng.random((8, spec.dim))
            G = spec.cross_eval(pts, pts)
            sym = float(np.max(np.abs(G - G.T))) / (1.0 + float(np.max(np.abs(G))))
            worst_sym = max(worst_sym, sym)
            lam = np.linalg.eigvalsh(0.5 * (G + G.T))
            worst_eig = max(worst_eig, -float(lam.min()) / float(np.trace(G)))
    ok = worst_sym <= 1e-12 and worst_eig <= 1e-8
    return ("kernel symmetry/PSD", ok,
            f"max relative asymmetry {worst_sym:.2e}, "
            f"worst -lambda_min/trace {worst_eig:.2e}")


def check_cholesky_reconstruction(seed: int = 1):
    rng = make_rng(seed)
    worst = 0.0
    for spec in (kernels.sobolev(1), kernels.matern52(2.0, 2)):
        state = CholeskyState(spec, capacity=12)
        for _ in range(12):
            x = rng.random(spec.dim)
            d, c = residual_kernel(state, x)
            if d > 1e-10:
                extend(state, x, d, c)
        L = state.factor
        G = spec.gram(state.nodes)
        worst = max(worst, float(np.linalg.norm(L @ L.T - G) /
                                 max(np.linalg.norm(G), 1e-30)))
    ok = worst <= 1e-10
    return ("Cholesky reconstruction L L^T = k(S,S)", ok,
            f"worst relative Frobenius error {worst:.2e}")


def check_residual_monotonicity(seed: int = 2):
    rng = make_rng(seed)
    spec = kernels.sobolev(2)
    probes = rng.random((64, 1))
    state = CholeskyState(spec, capacity=16)
    prev = state.residual_diag_batch(probes)
    worst = 0.0
    for _ in range(16):
        x = rng.random(1)
        d = state.probe(x)
        if d <= 1e-12 * spec.diag(x):
            continue
        state.commit(x, d)
        cur = state.residual_diag_batch(probes)
        worst = max(worst, float(np.max(cur - prev)))
        prev = cur
    ok = worst <= 1e-8
    return ("residual monotonicity", ok, f"max increase {worst:.2e}")


def check_weight_optimality(seed: int = 3):
    rng = make_rng(seed)
    spec = kernels.sobolev(1)
    measure = unit_box(1)
    provider = analytic_embedding(spec, measure)
    S = rng.random((6, 1))
    rule = make_rule(spec, S, provider)
    base = worst_case_error(spec, rule, provider.gram_constant)
    worst_gap = 0.0
    for _ in range(100):
        w = rule.weights + rng.normal(scale=0.05, size=len(rule.weights))
        perturbed = type(rule)(nodes=rule.nodes, weights=w, kernel=spec,
                               embedding_values=rule.embedding_values)
        err = worst_case_error(spec, perturbed, provider.gram_constant)
        worst_gap = max(worst_gap, base - err)
    ok = worst_gap <= 1e-10
    return ("weight optimality", ok,
            f"max improvement found by perturbation {worst_gap:.2e}")


def check_determinism(seed: int = 4):
    measure = unit_box(1)
    spec = kernels.sobolev(1)
    cfg = SamplerConfig(n=12, seed=seed)
    mismatches = []
    for name in ("rpc-rejection", "rpc-optimized", "iid", "cvs"):
        a = run_sampler(name, measure, spec, cfg, trial_rng(seed, 0))
        b = run_sampler(name, measure, spec, cfg, trial_rng(seed, 0))
        if not a.same_draws(b):
            mismatches.append(name)
    gram = random_psd_gram(make_rng(seed))
    space = DiscreteSpace(np.arange(5.0)[:, None], np.ones(5))
    k = kernels.from_gram(gram)
    a = rpcholesky_discrete(space, k, 3, trial_rng(seed, 1))
    b = rpcholesky_discrete(space, k, 3, trial_rng(seed, 1))
    if not a.same_draws(b):
        mismatches.append("rpc-discrete")
    ok = not mismatches
    return ("determinism (seed -> identical trace)", ok,
            "all samplers reproduce" if ok else f"mismatch: {mismatches}")


def check_nystrom_equivalence(seed: int = 5, instances: int = 25):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(instances):
        spec = kernels.sobolev(int(rng.integers(1, 4)))
        S = rng.random((int(rng.integers(1, 8)), 1))
        state = CholeskyState(spec, capacity=len(S))
        for p in S:
            d, c = residual_kernel(state, p)
            if d > 1e-12:
                extend(state, p, d, c)
        x = rng.random(1)
        y = rng.random(1)
        direct = nystrom_direct(spec, state.nodes, x, y)
        cx = np.linalg.solve(state.factor, spec.cross_eval(state.nodes, x[None, :])[:, 0]) if state.size else np.zeros(0)
        cy = np.linalg.solve(state.factor, spec.cross_eval(state.nodes, y[None, :])[:, 0]) if state.size else np.zeros(0)
        iterative = float(cx @ cy)
        kxy = spec.evaluate(x, y)
        worst = max(worst, abs(direct - iterative) / (1.0 + abs(kxy)))
    ok = worst <= 1e-8
    return ("Nystrom direct vs iterative", ok, f"worst relative gap {worst:.2e}")


def check_discrete_exactness(seed: int = 6, runs: int = 50_000):
    rng = make_rng(seed)
    gram = random_psd_gram(rng)
    space = DiscreteSpace(np.arange(5.0)[:, None], np.full(5, 0.2))
    k = kernels.from_gram(gram)
    measure = from_discrete(space)
    exact = enumerate_first_two(space, k)
    cfg = SamplerConfig(n=2, seed=seed)
    emp = pair_histogram(
        lambda r: rpcholesky_rejection(measure, k, cfg, r), space, k, runs, seed)
    tv = tv_distance(exact.ravel(), emp.ravel())
    ok = tv < 0.02
    return ("discrete exactness (rejection vs enumeration)", ok,
            f"TV distance {tv:.4f} over {runs} runs")


def check_theory_sweep(quick: bool = True):
    rs = (1, 5, 20, 50) if quick else tuple(range(1, 51))
    failures = 0
    total = 0
    for s in (1, 2, 3):
        seq = theory.sobolev_sequence(s)
        for r in rs:
            for delta in (0.5, 0.1, 0.02):
                rep = theory.check_bound(seq, r, delta)
                total += 1
                if not rep.passed:
                    failures += 1
    ok = failures == 0
    return ("eigenvalue bound sweep", ok, f"{total - failures}/{total} configurations pass")


ALL_CHECKS = (
    check_kernel_symmetry_psd,
    check_cholesky_reconstruction,
    check_residual_monotonicity,
    check_weight_optimality,
    check_determinism,
    check_nystrom_equivalence,
    check_discrete_exactness,
    check_theory_sweep,
)


def run_all(emit=print) -> bool:
    """Run every check; emit one line each; True iff all pass."""
    all_ok = True
    for fn in ALL_CHECKS:
        name, ok, detail = fn()
        all_ok = all_ok and ok
        emit(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
