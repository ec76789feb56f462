"""Backend selection for the execution kernel.

The compiled ``_kernel`` extension is used when it imports; otherwise the
pure-Python ``_kernel_py`` module takes over.  Setting
``FAULTLINE_PURE_PYTHON=1`` forces the fallback.
"""

import os
import types

from . import _kernel_py

from ._kernel_py import (  # noqa: F401  (re-exported constants)
    MUL, ADD, SHIFT, AND, OR, XOR, ADDR,
    C_ALU, C_MUL, C_TAKEN, C_NOT_TAKEN, C_JUMP, C_LOAD, C_STORE, C_SYSTEM,
    ST_LIMIT, ST_EXIT, ST_MISALIGNED, ST_ACCESS, ST_ILLEGAL, ST_ECALL,
    KIND_NAMES, decode,
)

_compiled: types.ModuleType | None
try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("FAULTLINE_PURE_PYTHON"):
    _active = _compiled
    BACKEND = "cython"
else:
    _active = _kernel_py
    BACKEND = "python"

run_kernel = _active.run_kernel
shift_add_iterations = _active.shift_add_iterations
ripple_iterations = _active.ripple_iterations


def available_backends() -> dict:
    out = {"python": _kernel_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def backend(name: str) -> types.ModuleType:
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None
