"""Kernel backend selection: compiled extension when available, pure Python otherwise.

Override with the SPLATFLOW_BACKEND environment variable ("cython" or "python").
Both backends produce bit-identical output; see benchmarks/bench_kernels.py for
the speed gap.
"""

from __future__ import annotations

import os
import warnings

from . import _kernels_py

_BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels

    _BACKENDS["cython"] = _kernels
    _DEFAULT = "cython"
except ImportError:  # extension not built
    _DEFAULT = "python"
    warnings.warn("splatflow: compiled kernels unavailable, falling back to the "
                  "slow pure-Python compositing path")

_env = os.environ.get("SPLATFLOW_BACKEND", "").strip().lower()
if _env:
    if _env not in _BACKENDS:
        raise ImportError(f"SPLATFLOW_BACKEND={_env!r} requested but not available "
                          f"(have: {sorted(_BACKENDS)})")
    _DEFAULT = _env


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def default_backend() -> str:
    return _DEFAULT


def get_backend(name: str | None = None):
    """Return the kernel module for `name` (default: best available)."""
    if name is None or name == "auto":
        name = _DEFAULT
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r} (have: {sorted(_BACKENDS)})") from None
