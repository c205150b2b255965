from __future__ import annotations

from typing import Callable

from .errors import QuadratureFailure


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-8,
                     max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature of a scalar function with absolute tolerance ``tol``."""
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _refine(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _refine(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth <= 0:
        raise QuadratureFailure(f"adaptive Simpson did not converge on [{a}, {b}]")
    return (_refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))
