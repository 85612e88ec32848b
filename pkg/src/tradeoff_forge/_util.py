"""Comparison tolerances and small runtime helpers.

Point-equality rules used across the curve machinery:

* power values may live at arbitrary magnitudes (the practical preset sits
  around 1e-13 J), so power comparisons are purely relative -- an absolute
  floor there would merge every distinct vertex of a joule-scale curve;
* delay and slope comparisons use the same relative tolerance plus a small
  absolute floor, which only matters when both operands are near zero
  (zero-slope segments), a regime a relative test cannot handle.
"""

from __future__ import annotations

import os

REL_TOL = 1e-9
ABS_FLOOR = 1e-12

THREADS_ENV = "TRADEOFF_FORGE_THREADS"


def close_rel(a: float, b: float, rel: float = REL_TOL) -> bool:
    """Purely relative equality; exact zeros compare equal only to zeros."""
    if a == b:
        return True
    return abs(a - b) <= rel * max(abs(a), abs(b))


def close_abs_rel(a: float, b: float, rel: float = REL_TOL, floor: float = ABS_FLOOR) -> bool:
    """Relative equality with an absolute floor for near-zero operands."""
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), floor)


def power_close(a: float, b: float) -> bool:
    return close_rel(a, b)


def delay_close(a: float, b: float) -> bool:
    return close_abs_rel(a, b)


def slope_close(a: float, b: float) -> bool:
    return close_abs_rel(a, b)


def point_close(p, q) -> bool:
    """Equality of two (power, delay) performance points."""
    return power_close(p.power, q.power) and delay_close(p.delay, q.delay)


def worker_count() -> int:
    """Worker cap for the embarrassingly parallel paths.

    Defaults to 1 (fully sequential, deterministic ordering either way);
    the environment variable raises the cap.
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
