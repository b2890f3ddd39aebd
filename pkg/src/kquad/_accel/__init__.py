"""Backend selection for the sampling inner loop.

The compiled extension is optional: if it is missing (or disabled via the
KQUAD_PURE_PYTHON environment variable) every caller falls back to the
vectorized numpy path.  `benchmarks/compare_backends.py` measures the gap.
"""

import os

KIND_SOBOLEV1 = 0
KIND_SOBOLEV_PROD = 1
KIND_MATERN52 = 2
KIND_GAUSSIAN = 3

try:
    from . import _core  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on build environment
    _core = None

_FORCED: str | None = None
if os.environ.get("KQUAD_PURE_PYTHON"):
    _FORCED = "python"


def have_compiled() -> bool:
    """True if the extension module was importable."""
    return _core is not None


def use_compiled() -> bool:
    """Whether the compiled path is in effect right now."""
    if _FORCED == "python":
        return False
    if _FORCED == "compiled" and _core is None:
        raise RuntimeError("compiled backend requested but extension missing")
    return _core is not None


def active_backend() -> str:
    return "compiled" if use_compiled() else "python"


def set_backend(mode: str) -> None:
    """Force 'python' or 'compiled', or restore 'auto' selection."""
    global _FORCED
    if mode not in ("auto", "python", "compiled"):
        raise ValueError(f"unknown backend mode: {mode!r}")
    if mode == "compiled" and _core is None:
        raise RuntimeError("compiled backend requested but extension missing")
    _FORCED = None if mode == "auto" else mode


def core():
    """The extension module; callers must check use_compiled() first."""
    return _core
