"""Kernel quadrature with randomly pivoted Cholesky node sampling.

Continuous node selection by rejection sampling against the kernel
diagonal, optimal quadrature weights, worst-case error evaluation in the
RKHS, baseline samplers, and a CLI harness for reproducible benchmarks.
"""

__version__ = "0.1.0"

from ._accel import active_backend, have_compiled, set_backend
from .domains import DiscreteSpace, MeasureSpec, crescent, from_discrete, unit_box
from .kernels import (KernelSpec, gaussian, matern52, matern52_kernel,
                      product_kernel, sobolev, sobolev_kernel, sobolev_product)
from .lowrank import CholeskyState, extend, nystrom_direct, residual_kernel
from .quadrature import (EmbeddingProvider, QuadratureRule, analytic_embedding,
                         apply_rule, embedding, make_rule, numeric_embedding,
                         optimal_weights, worst_case_error)
from .samplers import (SampleTrace, SamplerConfig, cvs_mcmc, iid_sampler,
                       make_rng, rpcholesky_discrete, rpcholesky_optimized,
                       rpcholesky_rejection, run_sampler, trial_rng)
from .theory import (EigenvalueSequence, check_bound, empirical_error_curve,
                     fit_loglog_slope, phi_step, sobolev_sequence)

__all__ = [
    "__version__",
    "active_backend", "have_compiled", "set_backend",
    "DiscreteSpace", "MeasureSpec", "crescent", "from_discrete", "unit_box",
    "KernelSpec", "gaussian", "matern52", "matern52_kernel", "product_kernel",
    "sobolev", "sobolev_kernel", "sobolev_product",
    "CholeskyState", "extend", "nystrom_direct", "residual_kernel",
    "EmbeddingProvider", "QuadratureRule", "analytic_embedding", "apply_rule",
    "embedding", "make_rule", "numeric_embedding", "optimal_weights",
    "worst_case_error",
    "SampleTrace", "SamplerConfig", "cvs_mcmc", "iid_sampler", "make_rng",
    "rpcholesky_discrete", "rpcholesky_optimized", "rpcholesky_rejection",
    "run_sampler", "trial_rng",
    "EigenvalueSequence", "check_bound", "empirical_error_curve",
    "fit_loglog_slope", "phi_step", "sobolev_sequence",
]
