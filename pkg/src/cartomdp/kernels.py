"""Kernel dispatch: the compiled extension when built, else the numpy twin.

Set ``CARTOMDP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from ._pykernels import INF

if os.environ.get("CARTOMDP_PURE_PYTHON"):
    from ._pykernels import minplus_matmul, tree_eval_grad

    KERNEL_BACKEND = "python"
else:
    try:
        from ._ckernels import minplus_matmul, tree_eval_grad

        KERNEL_BACKEND = "cython"
    except ImportError:  # extension not built
        from ._pykernels import minplus_matmul, tree_eval_grad

        KERNEL_BACKEND = "python"

INF = int(INF)

__all__ = ["INF", "KERNEL_BACKEND", "minplus_matmul", "tree_eval_grad"]
