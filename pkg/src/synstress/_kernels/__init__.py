"""Backend selection for the hot policy kernels.

Imports the compiled extension when it is available and falls back to the
pure-numpy implementation otherwise.  Set SYNSTRESS_BACKEND=numpy or
SYNSTRESS_BACKEND=compiled to force a choice (forcing "compiled" raises if
the extension was not built).
"""
import os

from . import py_backend

_forced = os.environ.get("SYNSTRESS_BACKEND")

if _forced == "numpy":
    _impl = py_backend
    BACKEND = "numpy"
elif _forced == "compiled":
    from . import _core as _impl  # noqa: F401

    BACKEND = "compiled"
elif _forced:
    raise ImportError(f"unknown SYNSTRESS_BACKEND value: {_forced!r}")
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = py_backend
        BACKEND = "numpy"

mlp_forward = _impl.mlp_forward
mlp_state_grad = _impl.mlp_state_grad

__all__ = ["BACKEND", "mlp_forward", "mlp_state_grad"]
