"""Compare the compiled sampling core against the numpy fallback.

Times the residual probe microkernel and full sampler runs on both
backends.  Run from the repository root:

    python3 benchmarks/compare_backends.py
"""

import time

import numpy as np

from kquad import _accel, kernels, unit_box
from kquad.lowrank import CholeskyState, extend, residual_kernel
from kquad.samplers import SamplerConfig, rpcholesky_optimized, rpcholesky_rejection, trial_rng


def build_state(kernel, pts):
    state = CholeskyState(kernel, capacity=len(pts))
    for p in pts:
        d, c = residual_kernel(state, p)
        if d > 1e-12:
            extend(state, p, d, c)
    return state


def time_probe(kernel, n_nodes, n_probes=20000):
    rng = np.random.default_rng(0)
    state = build_state(kernel, rng.random((n_nodes, kernel.dim)))
    probes = rng.random((n_probes, kernel.dim))
    t0 = time.perf_counter()
    for p in probes:
        state.probe(p)
    return (time.perf_counter() - t0) / n_probes


def time_sampler(fn, kernel, measure, n, seed=5):
    cfg = SamplerConfig(n=n, seed=seed)
    t0 = time.perf_counter()
    fn(measure, kernel, cfg, trial_rng(seed, 0))
    return time.perf_counter() - t0


def run(backend):
    _accel.set_backend(backend)
    rows = {}
    k1s1 = kernels.sobolev(1)  # slow spectral decay keeps rejection feasible
    k1s3 = kernels.sobolev(3)
    k3 = kernels.sobolev_product(3, 3)
    rows["probe sobolev-1d i=64 (us)"] = time_probe(k1s3, 64) * 1e6
    rows["probe sobolev-3d i=128 (us)"] = time_probe(k3, 128) * 1e6
    rows["rejection 1d s=1 n=96 (s)"] = time_sampler(
        rpcholesky_rejection, k1s1, unit_box(1), 96)
    rows["optimized 1d s=3 n=128 (s)"] = time_sampler(
        rpcholesky_optimized, k1s3, unit_box(1), 128)
    rows["optimized 3d s=3 n=200 (s)"] = time_sampler(
        rpcholesky_optimized, k3, unit_box(3), 200)
    return rows


def main():
    if not _accel.have_compiled():
        print("extension not built; only the python backend is available")
        print(run("python"))
        return
    compiled = run("compiled")
    fallback = run("python")
    _accel.set_backend("auto")
    width = max(len(k) for k in compiled)
    print(f"{'benchmark':<{width}}  {'compiled':>10}  {'python':>10}  {'speedup':>8}")
    for key in compiled:
        c, p = compiled[key], fallback[key]
        print(f"{key:<{width}}  {c:>10.3f}  {p:>10.3f}  {p / c:>7.1f}x")


if __name__ == "__main__":
    main()
