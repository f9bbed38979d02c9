"""Derivative-free bisection for the monotone threshold equations."""

from __future__ import annotations

from typing import Callable

from .errors import NoRoot

MAX_ITER = 200


def bisect_increasing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float = 0.0,
    *,
    max_iter: int = MAX_ITER,
    what: str = "f",
) -> float:
    """Return x in [lo, hi] with f(x) = target for nondecreasing f.

    Raises NoRoot(side="low") when f < target on the whole interval and
    NoRoot(side="high") when f > target everywhere. Bisection runs until the
    bracket stops shrinking in floating point, then the endpoint with the
    smaller residual is returned.
    """
    g_lo = float(f(lo)) - target
    g_hi = float(f(hi)) - target
    if g_lo > 0:
        raise NoRoot(what, "high")
    if g_hi < 0:
        raise NoRoot(what, "low")
    if g_lo == 0:
        return lo
    if g_hi == 0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = float(f(mid)) - target
        if g_mid == 0:
            return mid
        if g_mid < 0:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    # a large residual here means f jumps across target inside the bracket
    return lo if abs(g_lo) <= abs(g_hi) else hi


def last_true(pred: Callable[[float], bool], lo: float, hi: float, *, max_iter: int = MAX_ITER) -> float | None:
    """Largest x in [lo, hi] with pred(x) true, for pred true-then-false.

    Returns None when pred(lo) is already false.
    """
    if not pred(lo):
        return None
    if pred(hi):
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo
