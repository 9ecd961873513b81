"""Kernel backend selection.

The compiled extension is preferred when present; ``MIXRES_BACKEND`` forces
a choice (``compiled`` or ``numpy``).  Two-layer networks are cheap and
stay on the vectorized numpy path under either backend; only the residual
network kernels have a compiled twin.
"""

from __future__ import annotations

import os

from . import kernels_np

_compiled = None
try:
    from .. import _kernels as _compiled  # type: ignore[no-redef]
except ImportError:
    _compiled = None

_requested = os.environ.get("MIXRES_BACKEND", "auto").strip().lower() or "auto"
if _requested in ("", "auto"):
    _active = "compiled" if _compiled is not None else "numpy"
elif _requested == "compiled":
    if _compiled is None:
        raise ImportError(
            "MIXRES_BACKEND=compiled but the mixres._kernels extension is not built"
        )
    _active = "compiled"
elif _requested == "numpy":
    _active = "numpy"
else:
    raise ValueError(
        f"MIXRES_BACKEND={_requested!r} not understood; use 'compiled' or 'numpy'"
    )

_impl = _compiled if _active == "compiled" else kernels_np

resnet_forward = _impl.resnet_forward
resnet_backward = _impl.resnet_backward
two_layer_forward = kernels_np.two_layer_forward
two_layer_backward = kernels_np.two_layer_backward


def active_backend() -> str:
    """Name of the kernel implementation in use: 'compiled' or 'numpy'."""
    return _active


def compiled_available() -> bool:
    return _compiled is not None
