"""Kernel selection: compiled extension when available, numpy fallback
otherwise. Set ``ANCHORROUTE_PURE_PYTHON=1`` to force the fallback (the
benchmark suite uses this to compare the two)."""

from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("ANCHORROUTE_PURE_PYTHON", "") in ("1", "true", "yes"):
    _impl = _kernel_py
else:
    try:
        from . import _kernel_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernel_py

cnl_kernel = _impl.cnl_kernel
IMPLEMENTATION = _impl.IMPLEMENTATION


def available_kernels() -> dict[str, object]:
    """All importable kernel implementations, keyed by name."""
    kernels = {"python": _kernel_py.cnl_kernel}
    try:
        from . import _kernel_cy  # type: ignore[attr-defined]

        kernels["cython"] = _kernel_cy.cnl_kernel
    except ImportError:
        pass
    return kernels
