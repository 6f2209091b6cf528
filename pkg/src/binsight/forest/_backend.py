"""Kernel selection.

The compiled extension is used when it imports; otherwise the numpy
kernel.  ``BINSIGHT_BACKEND=python`` forces the fallback and
``BINSIGHT_BACKEND=compiled`` makes a missing extension an error.
"""

from __future__ import annotations

import os

from . import _pytree

try:
    from . import _ctree
except ImportError:  # extension not built
    _ctree = None

KERNELS = {"python": _pytree}
if _ctree is not None:
    KERNELS["compiled"] = _ctree


def get_kernel(name=None):
    name = name or os.environ.get("BINSIGHT_BACKEND", "auto")
    if name == "auto":
        return _ctree if _ctree is not None else _pytree
    try:
        return KERNELS[name]
    except KeyError:
        if name == "compiled":
            raise ImportError("binsight compiled kernel is not built; "
                              "reinstall with a C compiler and Cython available") from None
        raise ValueError(f"unknown backend {name!r}") from None


def kernel_name(kernel) -> str:
    return "compiled" if kernel is _ctree and _ctree is not None else "python"
