"""Empirical time-step refinement study for the growth tensor."""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import tensor as T
from .growth import MorphoProblem, Trajectory, run_morpho

REPORT_SCHEMA = "morphoelastic.convergence/1"


def cauchy_difference(coarse: Trajectory, fine: Trajectory) -> float:
    """``max`` over coarse time nodes and cells of ``|G_coarse - G_fine|``.

    The fine grid must refine the coarse one by an integer factor, so the
    piecewise affine interpolants are compared at the coarse nodes.
    """
    ratio, rem = divmod(fine.n_steps, coarse.n_steps)
    if rem or ratio < 1:
        raise ValueError("fine grid must refine the coarse grid by an integer factor")
    err = 0.0
    for j in range(coarse.n_steps + 1):
        t = coarse.grid.times[j]
        diff = coarse.G_hat(t) - fine.G_hat(t)
        err = max(err, float(np.max(T.frob(diff))))
    return err


def convergence_study(make_problem: Callable[[int], MorphoProblem], N0: int, levels: int) -> dict:
    """Run ``N0, 2 N0, ...`` steps (``levels`` runs) and report successive differences."""
    if levels < 2:
        raise ValueError("a convergence study needs at least two levels")
    Ns = [N0 * 2**k for k in range(levels)]
    trajs, seconds = [], []
    for N in Ns:
        start = time.perf_counter()
        trajs.append(run_morpho(make_problem(N)))
        seconds.append(time.perf_counter() - start)
    errors = [cauchy_difference(trajs[k], trajs[k + 1]) for k in range(levels - 1)]
    ratios = [errors[k] / errors[k + 1] if errors[k + 1] > 0 else None for k in range(levels - 2)]
    return {
        "schema": REPORT_SCHEMA,
        "levels": levels,
        "N": Ns,
        "tau": [trajs[k].grid.tau for k in range(levels)],
        "errors": errors,
        "ratios": ratios,
        "strictly_decreasing": all(errors[k + 1] < errors[k] for k in range(len(errors) - 1)),
        "final_min_detG": [float(np.min(t.detG[-1])) for t in trajs],
        "seconds": seconds,
    }


def write_report(report: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path
