"""Walk-kernel backend selection.

The compiled Cython core is preferred when the extension built; the pure
Python module is the reference implementation and the fallback.  Both produce
bit-identical results (same RNG, same processing order), which the parity
tests assert, so selection never changes simulation output.

Set RAPTORWALK_ENGINE=python or =compiled to force a backend.  Tracing is
only implemented by the pure backend, so kernels are fetched per run through
`get_engine(trace=...)`.
"""

from __future__ import annotations

import os

from . import pure

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

_FORCED = os.environ.get("RAPTORWALK_ENGINE", "").strip().lower()
if _FORCED == "python":
    _default = pure
elif _FORCED == "compiled":
    if _compiled is None:
        raise ImportError("RAPTORWALK_ENGINE=compiled but the extension is missing")
    _default = _compiled
else:
    _default = _compiled if _compiled is not None else pure


def backend_name() -> str:
    return _default.BACKEND


def have_compiled() -> bool:
    return _compiled is not None


def get_engine(trace: bool = False):
    """Kernel module to use; tracing forces the pure backend."""
    return pure if trace else _default


def get_backend(name: str):
    """Fetch a backend by name ("python" or "compiled"); for the benchmark."""
    if name == "python":
        return pure
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled backend not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
