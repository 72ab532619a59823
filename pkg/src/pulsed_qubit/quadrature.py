"""Adaptive Simpson quadrature, vectorized across the active intervals.

Each pass evaluates the integrand on the quarter points of every interval
that has not yet converged, so ``f`` must accept and return numpy arrays.
Real and complex integrands are both supported.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

DEFAULT_TOL = 1e-12
DEFAULT_REL_TOL = 1e-13


class QuadratureError(ArithmeticError):
    pass


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise QuadratureError("integrand is not finite")


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
    breakpoints: Iterable[float] = (),
    min_panels: int = 4,
    max_depth: int = 48,
    max_evals: int = 50_000_000,
) -> complex | float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Parameters
    ----------
    f : callable
        Vectorized integrand.
    a, b : float
        Finite limits; ``a > b`` flips the sign.
    tol : float
        Absolute error target for the whole integral. Each panel gets a share
        proportional to its width.
    rel_tol : float
        Relative floor: the effective target is
        ``max(tol, rel_tol * integral(|f|))``, so large integrals do not ask
        for more digits than a double holds.
    breakpoints : iterable of float
        Points inside ``(a, b)`` where ``f`` or its derivatives jump. Panels
        are split there before refinement starts.
    min_panels : int
        Initial number of equal panels between consecutive breakpoints.
        Oscillatory integrands should pass roughly a few panels per period.
    max_depth : int
        Maximum bisection depth per initial panel.
    """
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, tol, rel_tol, breakpoints, min_panels, max_depth, max_evals)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise QuadratureError("integration limits must be finite")

    edges = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    nodes = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(np.linspace(lo, hi, max(int(min_panels), 1) + 1)[:-1])
    nodes.append(np.array([b]))
    grid = np.concatenate(nodes)

    lo = grid[:-1]
    # widths are carried and halved exactly; recomputing hi - lo far from the
    # origin leaves an absolute roundoff that never shrinks with the panel
    h = grid[1:] - lo
    mid = lo + 0.5 * h
    f_lo = np.asarray(f(lo))
    f_hi = np.asarray(f(grid[1:]))
    f_mid = np.asarray(f(mid))
    _check_finite(f_lo, f_mid, f_hi)
    whole = h / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    width_total = b - a
    scale = float(np.sum(h / 6.0 * (np.abs(f_lo) + 4.0 * np.abs(f_mid) + np.abs(f_hi))))
    tol = max(tol, rel_tol * scale)
    panel_tol = tol * h / width_total

    total = 0.0
    evals = 3 * lo.size
    depth = 0
    while lo.size:
        lq = lo + 0.25 * h
        rq = mid + 0.25 * h
        f_lq = np.asarray(f(lq))
        f_rq = np.asarray(f(rq))
        evals += 2 * lo.size
        _check_finite(f_lq, f_rq)
        left = h / 12.0 * (f_lo + 4.0 * f_lq + f_mid)
        right = h / 12.0 * (f_mid + 4.0 * f_rq + f_hi)
        both = left + right
        diff = both - whole
        done = np.abs(diff) <= 15.0 * panel_tol
        depth += 1
        if depth >= max_depth or evals > max_evals:
            if not np.all(done):
                raise QuadratureError(
                    f"adaptive Simpson did not reach tol={tol:g} "
                    f"(depth {depth}, {evals} evaluations)"
                )
        # Richardson-corrected value of the accepted panels
        total = total + np.sum(both[done] + diff[done] / 15.0)
        keep = ~done
        if not keep.any():
            break
        half = 0.5 * h[keep]
        lo = np.concatenate([lo[keep], mid[keep]])
        h = np.concatenate([half, half])
        mid = np.concatenate([lq[keep], rq[keep]])
        f_lo, f_mid, f_hi = (
            np.concatenate([f_lo[keep], f_mid[keep]]),
            np.concatenate([f_lq[keep], f_rq[keep]]),
            np.concatenate([f_mid[keep], f_hi[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        half_tol = 0.5 * panel_tol[keep]
        panel_tol = np.concatenate([half_tol, half_tol])
    if np.iscomplexobj(total):
        return complex(total)
    return float(total)
