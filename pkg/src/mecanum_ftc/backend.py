"""Kernel backend selection.

The compiled extension is preferred when importable; set
``MECANUM_FTC_BACKEND=python`` (or ``compiled``) to force a choice, or call
:func:`use` at runtime (handy for benchmarking both in one process).
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _kernels
except ImportError:
    _kernels = None

_IMPLS = {"python": _pykernels}
if _kernels is not None:
    _IMPLS["compiled"] = _kernels

_forced = os.environ.get("MECANUM_FTC_BACKEND", "").strip().lower()
if _forced:
    if _forced not in _IMPLS:
        raise ImportError(
            f"MECANUM_FTC_BACKEND={_forced!r} is unavailable "
            f"(choices: {sorted(_IMPLS)})"
        )
    _active_name = _forced
else:
    _active_name = "compiled" if "compiled" in _IMPLS else "python"


def available() -> tuple[str, ...]:
    return tuple(sorted(_IMPLS))


def name() -> str:
    return _active_name


def use(backend: str) -> None:
    global _active_name
    if backend not in _IMPLS:
        raise ValueError(f"unknown backend {backend!r} (choices: {sorted(_IMPLS)})")
    _active_name = backend


def get(backend: str | None = None):
    """Implementation module for ``backend`` (default: the active one)."""
    return _IMPLS[backend or _active_name]


def admm_solve_box(*args, backend: str | None = None):
    return get(backend).admm_solve_box(*args)


def bank_filter_step(*args, backend: str | None = None):
    return get(backend).bank_filter_step(*args)
