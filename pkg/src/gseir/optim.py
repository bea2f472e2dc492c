"""Box-bounded Nelder-Mead simplex search.

Trial points are projected back onto the box before evaluation. Coefficients
follow the dimension-adaptive scheme of Gao & Han (2012), which behaves better
than the textbook values beyond a handful of dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def nelder_mead(
    func: Callable[[np.ndarray], float],
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    *,
    initial_step: float = 0.05,
    xrtol: float = 1e-8,
    max_iter: int = 2000,
) -> SimplexResult:
    """Minimize ``func`` inside ``[lower, upper]``.

    Convergence is declared when every vertex lies within ``xrtol`` of the best
    one, measured relative to the box width in each coordinate.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if lower.shape != upper.shape or np.any(lower > upper):
        raise ValueError("bounds must satisfy lower <= upper elementwise")
    width = np.where(upper > lower, upper - lower, 1.0)
    n = lower.size
    x0 = np.clip(np.asarray(x0, dtype=np.float64), lower, upper)

    rho, chi = 1.0, 1.0 + 2.0 / n
    psi, sigma = 0.75 - 1.0 / (2.0 * n), 1.0 - 1.0 / n

    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        return float(func(x))

    sim = np.empty((n + 1, n))
    sim[0] = x0
    for k in range(n):
        v = x0.copy()
        step = initial_step * width[k]
        # step inward when the start sits on the upper face
        v[k] = v[k] + step if v[k] + step <= upper[k] else v[k] - step
        sim[k + 1] = v
    fsim = np.array([f(v) for v in sim])

    converged = False
    it = 0
    while it < max_iter:
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        if np.max(np.abs(sim[1:] - sim[0]) / width) <= xrtol:
            converged = True
            break
        it += 1

        centroid = sim[:-1].mean(axis=0)
        xr = np.clip(centroid + rho * (centroid - sim[-1]), lower, upper)
        fr = f(xr)
        if fr < fsim[0]:
            xe = np.clip(centroid + rho * chi * (centroid - sim[-1]), lower, upper)
            fe = f(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-1]:
            xc = np.clip(centroid + psi * rho * (centroid - sim[-1]), lower, upper)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
                continue
        else:
            xc = np.clip(centroid - psi * (centroid - sim[-1]), lower, upper)
            fc = f(xc)
            if fc < fsim[-1]:
                sim[-1], fsim[-1] = xc, fc
                continue
        # shrink towards the best vertex
        for k in range(1, n + 1):
            sim[k] = sim[0] + sigma * (sim[k] - sim[0])
            fsim[k] = f(sim[k])

    best = int(np.argmin(fsim))
    return SimplexResult(sim[best].copy(), float(fsim[best]), it, nfev, converged)
