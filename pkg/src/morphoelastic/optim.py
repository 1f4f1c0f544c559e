"""Limited-memory BFGS with Armijo backtracking against an infinite barrier.

The objective may return ``inf`` for inadmissible points; backtracking then
shrinks the step until the trial point is admissible and decreases the
objective sufficiently.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tolerances import ARMIJO_C1, LBFGS_MEMORY, MIN_MAX_ITER, MIN_STEP_FLOOR


class LineSearchFailure(RuntimeError):
    pass


class MaxIterationsError(RuntimeError):
    pass


@dataclass
class OptimResult:
    x: np.ndarray
    f: float
    gnorm: float
    iterations: int
    evaluations: int
    energies: list = field(default_factory=list)


def _two_loop(g, pairs, gamma):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * s.dot(q)
        alphas.append(a)
        q -= a * y
    r = gamma * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * y.dot(r)
        r += (a - b) * s
    return -r


def lbfgs(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    gtol: float,
    max_iter: int = MIN_MAX_ITER,
    memory: int = LBFGS_MEMORY,
    initial_step: float = 1e-2,
    callback: Callable[[np.ndarray, float], None] | None = None,
) -> OptimResult:
    """Minimize ``fun`` until ``max|grad| <= gtol``.

    ``initial_step`` bounds the max-norm of the very first trial step, before
    any curvature information is available.
    """
    x = np.array(x0, dtype=float)
    f = fun(x)
    n_eval = 1
    if not math.isfinite(f):
        raise ValueError("initial point is inadmissible (infinite objective)")
    g = grad(x)
    energies = [f]
    pairs: deque = deque(maxlen=memory)
    gamma = None

    for it in range(max_iter + 1):
        gmax = float(np.max(np.abs(g))) if g.size else 0.0
        if gmax <= gtol:
            return OptimResult(x, f, gmax, it, n_eval, energies)
        if it == max_iter:
            break

        for attempt in ("lbfgs", "steepest"):
            if attempt == "lbfgs" and pairs:
                d = _two_loop(g, list(pairs), gamma)
            else:
                d = -g * (initial_step / gmax) if gamma is None else -gamma * g
            slope = g.dot(d)
            if slope >= 0:
                pairs.clear()
                continue
            alpha = 1.0
            accepted = False
            dmax = float(np.max(np.abs(d)))
            while alpha * dmax >= MIN_STEP_FLOOR:
                x_new = x + alpha * d
                f_new = fun(x_new)
                n_eval += 1
                if math.isfinite(f_new) and f_new <= f + ARMIJO_C1 * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
            pairs.clear()
        else:
            raise LineSearchFailure(
                f"no admissible descent step above {MIN_STEP_FLOOR:g} "
                f"(iteration {it}, max|g| = {gmax:.3e}, f = {f!r})"
            )

        g_new = grad(x_new)
        s = x_new - x
        yv = g_new - g
        sy = s.dot(yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            pairs.append((s, yv, 1.0 / sy))
            gamma = sy / yv.dot(yv)
        x, f, g = x_new, f_new, g_new
        energies.append(f)
        if callback is not None:
            callback(x, f)

    raise MaxIterationsError(f"L-BFGS did not converge in {max_iter} iterations (max|g| = {gmax:.3e})")
