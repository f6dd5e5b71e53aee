"""Derivative-free minimisation used by the compiler and the error fits."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize


def simplex_minimize(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    step: float | Sequence[float] = 0.05,
    bounds: Optional[Sequence[tuple[float, float]]] = None,
    fatol: float = 1e-9,
    max_evals: int = 10_000,
    restarts: int = 6,
) -> tuple[np.ndarray, float, int]:
    """Nelder-Mead with restarts from a shrinking simplex around the best point.

    Returns ``(x_best, f_best, n_evals)``.
    """
    x = np.asarray(x0, dtype=float)
    step = np.broadcast_to(np.asarray(step, dtype=float), x.shape).copy()
    best_f = f(x)
    evals = 1
    if x.size == 0:
        return x, best_f, evals
    for _ in range(restarts + 1):
        budget = max_evals - evals
        if budget <= x.size + 1:
            break
        simplex = np.vstack([x, x + np.diag(step)])
        if bounds is not None:
            lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds])
            hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])
            simplex = np.clip(simplex, lo, hi)
        res = minimize(
            f,
            x,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "initial_simplex": simplex,
                "maxfev": budget,
                "xatol": 1e-14,
                "fatol": fatol * 1e-3,
                "adaptive": x.size > 4,
            },
        )
        evals += res.nfev
        improved = best_f - res.fun
        if res.fun < best_f:
            x, best_f = np.asarray(res.x, dtype=float), float(res.fun)
        if best_f <= fatol or improved <= fatol * 1e-3:
            break
        step = step * 0.1
    return x, best_f, evals
