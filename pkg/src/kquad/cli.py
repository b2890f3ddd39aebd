"""Command-line front end.

Subcommands: sample, quadrature, benchmark, crescent, check.  Configuration
is a plain key=value file plus command-line overrides; every CSV artifact
carries a provenance header (config hash, seed, code version) and is
reproducible byte-for-byte given the same seed and clock readings.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, _accel, checks, kernels
from .domains import MeasureSpec, crescent, grid_points, unit_box
from .errors import AcceptanceStalledError, ConfigError
from .lowrank import CholeskyState
from .quadrature import (EmbeddingProvider, analytic_embedding, make_rule,
                         numeric_embedding, rule_to_csv, worst_case_error)
from .samplers import (SAMPLER_NAMES, SamplerConfig, run_sampler, trial_rng)

DEFAULT_N_GRID = (8, 16, 32, 64, 128)
CRESCENT_N_GRID = (5, 10, 25, 50, 100)


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: str = "sobolev"
    s: int = 3
    dim: int = 1
    bandwidth: float = 2.0
    lengthscale: float = 1.0
    domain: str = "box"
    sampler: str = "rpc-optimized"
    n_grid: tuple = DEFAULT_N_GRID
    n: int = 0  # 0 means: use the largest entry of n_grid
    trials: int = 100
    seed: int = 0
    out: str = "out"
    trials_max: int = 100
    proposal_cap: int = 10**7
    mcmc_steps_factor: int = 10
    g: str = "one"
    embed_grid: int = 256
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.kernel not in ("sobolev", "matern52", "gaussian"):
            raise ConfigError("kernel", f"unknown kernel {self.kernel!r}")
        if self.kernel == "sobolev" and self.s not in (1, 2, 3):
            raise ConfigError("s", "smoothness must be 1, 2, or 3")
        if self.dim < 1:
            raise ConfigError("dim", "dimension must be >= 1")
        if self.domain not in ("box", "crescent"):
            raise ConfigError("domain", f"unknown domain {self.domain!r}")
        if self.sampler not in SAMPLER_NAMES:
            raise ConfigError("sampler", f"unknown sampler {self.sampler!r}")
        if len(self.n_grid) == 0 or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid", "must be a nonempty strictly increasing list")
        if any(n <= 0 for n in self.n_grid):
            raise ConfigError("n_grid", "entries must be positive")
        if self.n < 0:
            raise ConfigError("n", "must be positive (or omitted)")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if not 25 <= self.trials_max <= 1000:
            raise ConfigError("trials_max", "must lie in [25, 1000]")
        if self.proposal_cap < 1:
            raise ConfigError("proposal_cap", "must be >= 1")
        if self.mcmc_steps_factor < 1:
            raise ConfigError("mcmc_steps_factor", "must be >= 1")
        if self.g != "one":
            raise ConfigError("g", "only the constant reference g=one is supported")
        if self.embed_grid < 256:
            raise ConfigError("embed_grid", "numeric embedding needs >= 256 points per dim")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        return self

    def canonical(self) -> str:
        items = []
        for key, val in sorted(vars(self).items()):
            if key in ("out", "workers"):  # execution details, not the experiment
                continue
            if key == "n_grid":
                val = ",".join(str(v) for v in val)
            items.append(f"{key}={val}")
        return ";".join(items)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def sampler_config(self, n: int) -> SamplerConfig:
        return SamplerConfig(n=n, trials_max=self.trials_max,
                             proposal_cap=self.proposal_cap,
                             mcmc_steps_factor=self.mcmc_steps_factor,
                             seed=self.seed)


_INT_KEYS = {"s", "dim", "n", "trials", "seed", "trials_max", "proposal_cap",
             "mcmc_steps_factor", "embed_grid", "workers"}
_FLOAT_KEYS = {"bandwidth", "lengthscale"}


def _coerce(key: str, raw: str):
    if key == "n_grid":
        try:
            return tuple(int(tok) for tok in raw.replace(" ", "").split(",") if tok)
        except ValueError:
            raise ConfigError(key, f"cannot parse {raw!r} as an integer list")
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(key, f"cannot parse {raw!r} as an integer")
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(key, f"cannot parse {raw!r} as a number")
    return raw


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    values: dict = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
            key, raw = line.split("=", 1)
            key = key.strip()
            if key not in ExperimentConfig.__dataclass_fields__:
                raise ConfigError(key, "unknown configuration key")
            values[key] = _coerce(key, raw.strip())
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    return ExperimentConfig(**values).validate()


def build_measure(cfg: ExperimentConfig) -> MeasureSpec:
    if cfg.domain == "box":
        return unit_box(cfg.dim)
    return crescent()


def build_kernel(cfg: ExperimentConfig):
    params = {"s": cfg.s, "dim": cfg.dim, "bandwidth": cfg.bandwidth,
              "lengthscale": cfg.lengthscale}
    if cfg.domain == "crescent":
        params["dim"] = 2
    return kernels.by_name(cfg.kernel, params)


def build_embedding(cfg: ExperimentConfig, kernel, measure) -> EmbeddingProvider:
    if kernel.embedding is not None and measure.uniform:
        return analytic_embedding(kernel, measure)
    return numeric_embedding(kernel, measure, per_dim=cfg.embed_grid)


def _provenance(cfg: ExperimentConfig, extra: dict | None = None) -> dict:
    prov = {
        "version": __version__,
        "backend": _accel.active_backend(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "kernel": cfg.kernel,
        "domain": cfg.domain,
        "sampler": cfg.sampler,
        "n_grid": ",".join(str(n) for n in cfg.n_grid),
        "trials": cfg.trials,
    }
    if extra:
        prov.update(extra)
    return prov


def _write_csv(path: Path, provenance: dict, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key in sorted(provenance):
            fh.write(f"# {key}={provenance[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _summarize(rows: list) -> list:
    """(n, trial, err, time) rows -> (n, mean, q10, q90, mean_time)."""
    by_n: dict = {}
    for n, _trial, err, dt in rows:
        by_n.setdefault(n, []).append((err, dt))
    out = []
    for n in sorted(by_n):
        errs = np.array([e for e, _ in by_n[n]], dtype=float)
        times = np.array([t for _, t in by_n[n]], dtype=float)
        good = errs[np.isfinite(errs)]
        out.append((n, float(good.mean()) if len(good) else float("nan"),
                    float(np.quantile(good, 0.10)) if len(good) else float("nan"),
                    float(np.quantile(good, 0.90)) if len(good) else float("nan"),
                    float(times.mean())))
    return out


def run_benchmark(cfg: ExperimentConfig, clock=time.perf_counter):
    """Sample/weight/error sweep over (n_grid x trials); writes errors.csv
    and summary.csv under cfg.out.  Deterministic given (config, seed) and
    the clock readings."""
    measure = build_measure(cfg)
    kernel = build_kernel(cfg)
    provider = build_embedding(cfg, kernel, measure)

    def one(task):
        ni, n, trial = task
        rng = trial_rng(cfg.seed, ni * cfg.trials + trial)
        scfg = cfg.sampler_config(n)
        t0 = clock()
        try:
            trace = run_sampler(cfg.sampler, measure, kernel, scfg, rng)
        except AcceptanceStalledError:
            return (n, trial, float("nan"), clock() - t0)
        dt = clock() - t0
        rule = make_rule(kernel, trace.nodes, provider)
        err = worst_case_error(kernel, rule, provider.gram_constant)
        return (n, trial, err, dt)

    tasks = [(ni, n, t) for ni, n in enumerate(cfg.n_grid)
             for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(one, tasks))
    else:
        rows = [one(t) for t in tasks]
    rows.sort(key=lambda r: (r[0], r[1]))
    summary = _summarize(rows)
    out = Path(cfg.out)
    prov = _provenance(cfg)
    _write_csv(out / "errors.csv", prov, ["n", "trial", "err", "time"], rows)
    _write_csv(out / "summary.csv", prov,
               ["n", "mean", "q10", "q90", "mean_time"], summary)
    return rows, summary


CRESCENT_INTEGRAND = "sin(x)*exp(y)"


def _crescent_f(p: np.ndarray) -> float:
    return float(np.sin(p[0]) * np.exp(p[1]))


def crescent_reference_integral(measure, per_dim: int = 2048) -> float:
    pts, w = grid_points(measure, per_dim)
    return float(np.sum(w * np.sin(pts[:, 0]) * np.exp(pts[:, 1])))


def run_crescent_demo(cfg: ExperimentConfig, clock=time.perf_counter):
    """Oddly-shaped-region demo: node sets, the residual-diagonal field of a
    20-node run, and relative-error curves for three schemes."""
    measure = crescent()
    kernel = kernels.matern52(cfg.bandwidth, dim=2)
    provider = numeric_embedding(kernel, measure, per_dim=cfg.embed_grid)
    reference = crescent_reference_integral(measure)
    out = Path(cfg.out)
    prov = _provenance(cfg, {"domain": "crescent", "kernel": "matern52",
                             "integrand": CRESCENT_INTEGRAND,
                             "reference": repr(reference)})

    # Single demo run: 20 nodes plus the residual field they induce.
    demo_cfg = cfg.sampler_config(20)
    trace = run_sampler("rpc-rejection", measure, kernel, demo_cfg,
                        trial_rng(cfg.seed, 0))
    state = CholeskyState(kernel, capacity=20)
    for x in trace.nodes:
        d = state.probe(x)
        state.commit(x, d)
    resid_at_nodes = state.residual_diag_batch(trace.nodes)
    _write_csv(out / "crescent_nodes.csv", prov,
               ["index", "x", "y", "residual_diag"],
               [(i, float(p[0]), float(p[1]), float(r))
                for i, (p, r) in enumerate(zip(trace.nodes, resid_at_nodes))])
    gpts, _gw = grid_points(measure, 160)
    field = state.residual_diag_batch(gpts)
    _write_csv(out / "crescent_field.csv", prov, ["x", "y", "residual_diag"],
               [(float(p[0]), float(p[1]), float(v))
                for p, v in zip(gpts, field)])

    schemes = ("rpc", "iid-kq", "mc")
    rows = []
    stream = 1
    for n in cfg.n_grid:
        scfg = cfg.sampler_config(n)
        for trial in range(cfg.trials):
            for scheme in schemes:
                rng = trial_rng(cfg.seed, stream)
                stream += 1
                t0 = clock()
                # The optimized implementation draws from the same node
                # distribution as plain rejection; it is the only tractable
                # choice once the residual mass collapses at larger n.
                name = "rpc-optimized" if scheme == "rpc" else "iid"
                trace = run_sampler(name, measure, kernel, scfg, rng)
                dt = clock() - t0
                if scheme == "mc":
                    est = measure.mass * float(
                        np.mean(np.sin(trace.nodes[:, 0]) * np.exp(trace.nodes[:, 1])))
                else:
                    rule = make_rule(kernel, trace.nodes, provider)
                    est = float(rule.weights @ (np.sin(rule.nodes[:, 0])
                                                * np.exp(rule.nodes[:, 1])))
                rel = abs(est - reference) / abs(reference)
                rows.append((scheme, n, trial, rel, dt))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    by_key: dict = {}
    for scheme, n, _trial, rel, dt in rows:
        by_key.setdefault((scheme, n), []).append((rel, dt))
    summary = []
    for (scheme, n) in sorted(by_key):
        rels = np.array([r for r, _ in by_key[(scheme, n)]])
        times = np.array([t for _, t in by_key[(scheme, n)]])
        summary.append((scheme, n, float(rels.mean()),
                        float(np.quantile(rels, 0.10)),
                        float(np.quantile(rels, 0.90)), float(times.mean())))
    _write_csv(out / "crescent_errors.csv", prov,
               ["scheme", "n", "trial", "rel_err", "time"], rows)
    _write_csv(out / "crescent_summary.csv", prov,
               ["scheme", "n", "mean_rel_err", "q10", "q90", "mean_time"],
               summary)
    return rows, summary


def run_sample(cfg: ExperimentConfig):
    measure = build_measure(cfg)
    kernel = build_kernel(cfg)
    n = cfg.n if cfg.n > 0 else cfg.n_grid[-1]
    trace = run_sampler(cfg.sampler, measure, kernel, cfg.sampler_config(n),
                        trial_rng(cfg.seed, 0))
    out = Path(cfg.out)
    prov = _provenance(cfg, {"n": n, "wall_time": repr(trace.wall_time)})
    dim = trace.nodes.shape[1]
    rows = [tuple(float(v) for v in p) + (prop,)
            for p, prop in zip(trace.nodes,
                               trace.proposals_per_node or [1] * n)]
    _write_csv(out / "nodes.csv", prov,
               [f"x{l}" for l in range(dim)] + ["proposals"], rows)
    return trace


def run_quadrature(cfg: ExperimentConfig):
    measure = build_measure(cfg)
    kernel = build_kernel(cfg)
    provider = build_embedding(cfg, kernel, measure)
    n = cfg.n if cfg.n > 0 else cfg.n_grid[-1]
    trace = run_sampler(cfg.sampler, measure, kernel, cfg.sampler_config(n),
                        trial_rng(cfg.seed, 0))
    rule = make_rule(kernel, trace.nodes, provider)
    err = worst_case_error(kernel, rule, provider.gram_constant)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rule_to_csv(rule, out / "rule.csv",
                _provenance(cfg, {"n": n, "worst_case_error": repr(err)}))
    return rule, err


def run_check(cfg: ExperimentConfig, emit=print) -> int:
    ok = checks.run_all(emit=emit)
    emit("all checks passed" if ok else "CHECK FAILURES PRESENT")
    return 0 if ok else 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="key=value file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--sampler", type=str, default=None)
    p.add_argument("--n-grid", dest="n_grid", type=str, default=None,
                   help="comma-separated node counts, e.g. 8,16,32")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--kernel", type=str, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--domain", type=str, default=None)
    p.add_argument("--workers", type=int, default=None)


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("seed", "out", "sampler", "trials", "n", "kernel", "s", "dim",
            "domain", "workers")
    ov = {k: getattr(args, k) for k in keys}
    if args.n_grid is not None:
        ov["n_grid"] = _coerce("n_grid", args.n_grid)
    return ov


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kquad",
        description="Kernel quadrature with randomly pivoted Cholesky sampling")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("sample", "draw one node set and write nodes.csv"),
            ("quadrature", "draw nodes, solve weights, write rule.csv"),
            ("benchmark", "error/time sweep over n_grid; errors.csv + summary.csv"),
            ("crescent", "oddly-shaped-region demo CSVs"),
            ("check", "run the invariant suite")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "crescent" and args.n_grid is None:
            cfg = replace(cfg, n_grid=CRESCENT_N_GRID).validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.command == "sample":
        trace = run_sample(cfg)
        print(f"wrote {Path(cfg.out) / 'nodes.csv'} "
              f"({len(trace.nodes)} nodes, {trace.wall_time:.3f}s)")
    elif args.command == "quadrature":
        _rule, err = run_quadrature(cfg)
        print(f"wrote {Path(cfg.out) / 'rule.csv'} (worst-case error {err:.6g})")
    elif args.command == "benchmark":
        _rows, summary = run_benchmark(cfg)
        for n, mean, _q10, _q90, mean_time in summary:
            print(f"n={n:5d}  mean_err={mean:.6g}  mean_time={mean_time:.4f}s")
    elif args.command == "crescent":
        _rows, summary = run_crescent_demo(cfg)
        for scheme, n, mean, _q10, _q90, _t in summary:
            print(f"{scheme:7s} n={n:4d}  mean_rel_err={mean:.6g}")
    elif args.command == "check":
        return run_check(cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
