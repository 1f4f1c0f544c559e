"""Nutrient-driven solution operator and a derivative-free optimal-control search."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .growth import MorphoProblem, MorphoStepper, TimeGrid, Trajectory
from .mesh import Mesh

ScalarField = Callable[[float, np.ndarray], np.ndarray]


@dataclass
class ControlFamily:
    """Controls ``mu_c(t, x) = sum_k c_k b_k(t, x)`` with ``c`` in a box."""

    basis: Sequence[ScalarField]
    lo: np.ndarray
    hi: np.ndarray
    names: Sequence[str] = ()

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if not (len(self.basis) == len(self.lo) == len(self.hi)):
            raise ValueError("basis and box bounds must have the same length")
        if np.any(self.hi < self.lo) or not np.all(np.isfinite(np.r_[self.lo, self.hi])):
            raise ValueError("control box must be bounded with lo <= hi")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def control(self, c: Sequence[float]) -> ScalarField:
        c = np.asarray(c, dtype=float)

        def mu(t, x):
            out = np.zeros(len(x))
            for ck, b in zip(c, self.basis):
                out = out + ck * np.asarray(b(t, x), dtype=float)
            return out

        return mu


def control_average(mu: ScalarField, grid: TimeGrid, points: np.ndarray) -> np.ndarray:
    """``(N, k)`` array of interval averages ``mu_i``, i = 1..N, by the midpoint rule."""
    t = grid.times
    return np.stack([np.asarray(mu(0.5 * (t[i - 1] + t[i]), points), dtype=float) for i in range(1, grid.N + 1)])


def solve_given_control(mu: ScalarField, problem: MorphoProblem, growth_uses: str = "current") -> Trajectory:
    """Run the scheme with the rate evaluated at the averaged control.

    ``growth_uses="current"`` feeds ``mu_i`` into the update of ``G_i``;
    ``"previous"`` feeds ``mu_{i-1}`` (with ``mu_0 = mu(0)``).
    """
    if growth_uses not in ("current", "previous"):
        raise ValueError("growth_uses must be 'current' or 'previous'")
    stepper = MorphoStepper(problem)
    pts = problem.mesh.quad_points
    averages = control_average(mu, problem.grid, pts)
    mu0 = np.asarray(mu(0.0, pts), dtype=float)
    stepper.traj.mu.append(mu0)
    for i in range(1, problem.grid.N + 1):
        if growth_uses == "current":
            fed = averages[i - 1]
        else:
            fed = mu0 if i == 1 else averages[i - 2]
        stepper.step(mu_qp=fed, mu_record=averages[i - 1])
    return stepper.traj


@dataclass
class ObjectiveJ:
    """``b1 int detG(T) + b2 int int |y - y_target|^p + b3 int int |mu|^p``."""

    beta1: float = 1.0
    beta2: float = 0.0
    beta3: float = 0.0
    p: float = 4.0
    y_target: Callable[[float, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if min(self.beta1, self.beta2, self.beta3) < 0:
            raise ValueError("objective weights must be nonnegative")


@dataclass(frozen=True)
class JTerms:
    volume: float
    tracking: float
    control: float

    @property
    def total(self) -> float:
        return self.volume + self.tracking + self.control


def evaluate_J(traj: Trajectory, obj: ObjectiveJ) -> JTerms:
    """Objective of a completed trajectory.

    Time integrals use the backward rectangle rule over steps 1..N, space
    integrals the centroid rule. ``traj.mu[i]`` holds per-tet control values.
    """
    mesh: Mesh = traj.mesh
    vol = mesh.volumes
    tau = traj.grid.tau
    N = traj.n_steps
    volume = obj.beta1 * float(np.dot(vol, traj.detG[N]))
    tracking = 0.0
    if obj.beta2:
        xc = mesh.centroids
        for i in range(1, N + 1):
            yc = mesh.centroid_values(traj.y[i])
            target = xc if obj.y_target is None else np.asarray(obj.y_target(traj.grid.times[i], xc))
            dist = np.linalg.norm(yc - target, axis=1)
            tracking += tau * float(np.dot(vol, dist**obj.p))
        tracking *= obj.beta2
    control = 0.0
    if obj.beta3:
        for i in range(1, N + 1):
            control += tau * float(np.dot(vol, np.abs(traj.mu[i]) ** obj.p))
        control *= obj.beta3
    return JTerms(volume, tracking, control)


@dataclass
class Candidate:
    index: int
    c: np.ndarray
    terms: JTerms

    @property
    def J(self) -> float:
        return self.terms.total


@dataclass
class ControlResult:
    c: np.ndarray
    J: float
    terms: JTerms
    trajectory: Trajectory
    evaluated: list = field(default_factory=list)
    budget_exhausted: bool = False


class _Evaluator:
    def __init__(self, family, obj, problem, growth_uses, threads):
        self.family = family
        self.obj = obj
        self.problem = problem
        self.growth_uses = growth_uses
        self.threads = max(1, int(threads))
        self.cache: dict[tuple, tuple[Candidate, Trajectory]] = {}
        self.order: list[Candidate] = []

    def _forward(self, c):
        traj = solve_given_control(self.family.control(c), self.problem, self.growth_uses)
        return traj, evaluate_J(traj, self.obj)

    def evaluate(self, cs: list[np.ndarray]) -> list[Candidate]:
        fresh = []
        for c in cs:
            key = tuple(float(v) for v in c)
            if key not in self.cache and key not in [tuple(map(float, f)) for f in fresh]:
                fresh.append(np.asarray(c, dtype=float))
        if self.threads > 1 and len(fresh) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(self._forward, fresh))
        else:
            results = [self._forward(c) for c in fresh]
        for c, (traj, terms) in zip(fresh, results):
            cand = Candidate(len(self.order), c, terms)
            if not terms.total >= 0:
                raise ValueError(f"objective is negative or undefined for control {c}")
            self.order.append(cand)
            self.cache[tuple(float(v) for v in c)] = (cand, traj)
        return [self.cache[tuple(float(v) for v in c)][0] for c in cs]

    def best(self) -> tuple[Candidate, Trajectory]:
        cand = min(self.order, key=lambda k: (k.J, k.index))
        return cand, self.cache[tuple(float(v) for v in cand.c)][1]


def optimize_control(
    family: ControlFamily,
    obj: ObjectiveJ,
    problem: MorphoProblem,
    method: str = "grid",
    points: int = 3,
    budget: int = 50,
    min_step: float = 1e-3,
    growth_uses: str = "current",
    threads: int = 1,
) -> ControlResult:
    """Search the coefficient box for the smallest objective.

    ``grid`` evaluates all ``points**dim`` tensor-grid coefficients;
    ``pattern`` runs a compass search from the box centre until the step falls
    below ``min_step`` (relative to the box width) or ``budget`` forward
    solves are spent.
    """
    ev = _Evaluator(family, obj, problem, growth_uses, threads)
    exhausted = False
    if method == "grid":
        axes = [np.linspace(lo, hi, points) if hi > lo else np.array([lo]) for lo, hi in zip(family.lo, family.hi)]
        ev.evaluate([np.array(c) for c in itertools.product(*axes)])
    elif method == "pattern":
        width = family.hi - family.lo
        x = 0.5 * (family.lo + family.hi)
        step = 0.5
        fx = ev.evaluate([x])[0].J
        while step >= min_step:
            if len(ev.order) >= budget:
                exhausted = True
                break
            improved = False
            for k in range(family.dim):
                if width[k] == 0:
                    continue
                for sign in (1.0, -1.0):
                    trial = x.copy()
                    trial[k] = np.clip(trial[k] + sign * step * width[k], family.lo[k], family.hi[k])
                    if np.array_equal(trial, x):
                        continue
                    if len(ev.order) >= budget and tuple(trial) not in ev.cache:
                        exhausted = True
                        break
                    ft = ev.evaluate([trial])[0].J
                    if ft < fx:
                        x, fx, improved = trial, ft, True
                        break
                if exhausted or improved:
                    break
            if exhausted:
                break
            if not improved:
                step *= 0.5
    else:
        raise ValueError(f"unknown search method {method!r}")
    best, traj = ev.best()
    return ControlResult(best.c, best.J, best.terms, traj, list(ev.order), exhausted)


BASIS = {
    "const": lambda T: (lambda t, x: np.ones(len(x))),
    "time": lambda T: (lambda t, x: np.full(len(x), t / T)),
    "sin_t": lambda T: (lambda t, x: np.full(len(x), math.sin(math.pi * t / T))),
    "x": lambda T: (lambda t, x: np.asarray(x)[:, 0]),
    "y": lambda T: (lambda t, x: np.asarray(x)[:, 1]),
    "z": lambda T: (lambda t, x: np.asarray(x)[:, 2]),
}
