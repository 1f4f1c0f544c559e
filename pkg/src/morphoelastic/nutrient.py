"""Nutrient field: implicit Euler reaction-diffusion coupled to the growth scheme.

One step solves ``mu_i - nu tau Lap mu_i = F_i`` with
``F_i = mu_{i-1} + tau (h_i - H((kappa *_tau y)_{i-1}))`` and Dirichlet data on
the whole boundary, using P1 elements with a lumped mass matrix. Lumping
keeps the discrete maximum principle on Kuhn meshes, whose P1 stiffness
matrix has non-positive off-diagonal entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .growth import MorphoProblem, MorphoStepper, Trajectory
from .mesh import Mesh
from .tolerances import CG_RTOL, LINEAR_RESIDUAL_REL

ScalarField = Callable[[float, np.ndarray], np.ndarray]


class NutrientSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Consumption:
    """``H(v) = hc / (1 + |v - xc|^2)``, bounded by |hc| and Lipschitz."""

    hc: float = 0.0
    xc: tuple = (0.5, 0.5, 0.5)

    @property
    def bound(self) -> float:
        return abs(self.hc)

    @property
    def lip_bound(self) -> float:
        # max_r 2r/(1+r^2)^2 is attained at r = 1/sqrt(3)
        return abs(self.hc) * 9.0 / (8.0 * math.sqrt(3.0))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        d2 = np.sum((np.asarray(v, dtype=float) - np.asarray(self.xc)) ** 2, axis=-1)
        return self.hc / (1.0 + d2)


def _const(value: float) -> ScalarField:
    return lambda t, x: np.full(len(x), float(value))


@dataclass
class NutrientProblem:
    nu: float = 0.1
    source: ScalarField = field(default_factory=lambda: _const(0.0))
    consumption: Consumption = field(default_factory=Consumption)
    mu_D: ScalarField = field(default_factory=lambda: _const(1.0))
    mu0: Callable[[np.ndarray], np.ndarray] = field(default_factory=lambda: (lambda x: np.ones(len(x))))

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError(f"diffusivity nu must be positive, got {self.nu}")

    def interval_average(self, fun: ScalarField, t0: float, t1: float, x: np.ndarray) -> np.ndarray:
        """``(1/tau) int_{t0}^{t1} fun dt`` by the midpoint rule."""
        return np.asarray(fun(0.5 * (t0 + t1), x), dtype=float)


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    B = mesh.shape_gradients
    ke = mesh.volumes[:, None, None] * np.einsum("tai,tbi->tab", B, B)
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()
    cols = np.tile(mesh.tets, (1, 4)).ravel()
    return sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)


def lumped_mass(mesh: Mesh) -> np.ndarray:
    m = np.zeros(mesh.n_vertices)
    for a in range(4):
        np.add.at(m, mesh.tets[:, a], mesh.volumes / 4.0)
    return m


def kappa_conv_y(history, kappa: np.ndarray, tau: float, i: int) -> np.ndarray:
    """``(kappa *_tau y)_{i-1} = sum_{j=0}^{i-1} tau kappa_j y_{i-1-j}``."""
    if i < 1 or len(history) < i:
        raise ValueError(f"history must hold steps 0..{i - 1}")
    out = np.zeros_like(history[0])
    for j in range(i):
        out += tau * kappa[j] * history[i - 1 - j]
    return out


class NutrientSolver:
    """Factorization-free solver for ``(M + nu tau K) mu = M F`` with Dirichlet rows."""

    def __init__(self, mesh: Mesh, nu: float, tau: float):
        if nu <= 0 or tau <= 0:
            raise ValueError("nu and tau must be positive")
        self.mesh = mesh
        self.mass = lumped_mass(mesh)
        self.A = (sp.diags(self.mass) + nu * tau * assemble_stiffness(mesh)).tocsr()
        bnd = np.zeros(mesh.n_vertices, dtype=bool)
        bnd[mesh.boundary_nodes] = True
        self.boundary = bnd
        self.interior = np.flatnonzero(~bnd)
        self.A_II = self.A[self.interior][:, self.interior].tocsr()
        self.A_IB = self.A[self.interior][:, np.flatnonzero(bnd)].tocsr()
        self.precond = sp.diags(1.0 / self.A_II.diagonal())
        self.last_residual = 0.0

    def solve(self, F: np.ndarray, mu_D: np.ndarray, guess: np.ndarray | None = None) -> np.ndarray:
        mu = np.empty(self.mesh.n_vertices)
        mu[self.boundary] = mu_D[self.boundary]
        if self.interior.size == 0:
            return mu
        rhs = self.mass[self.interior] * F[self.interior] - self.A_IB @ mu[self.boundary]
        x0 = None if guess is None else guess[self.interior]
        x, info = cg(self.A_II, rhs, x0=x0, rtol=CG_RTOL, atol=0.0, maxiter=10 * self.interior.size,
                     M=self.precond)
        if info != 0:
            raise NutrientSolveError(f"conjugate gradients did not converge (info={info})")
        bnorm = np.linalg.norm(rhs)
        res = np.linalg.norm(rhs - self.A_II @ x)
        self.last_residual = res / bnorm if bnorm > 0 else res
        if self.last_residual > LINEAR_RESIDUAL_REL and res > 0:
            raise NutrientSolveError(f"linear residual {self.last_residual:.3e} above tolerance")
        mu[self.interior] = x
        return mu


def nutrient_step(
    mu_prev: np.ndarray,
    source: np.ndarray,
    consumption: np.ndarray,
    mu_D: np.ndarray,
    nu: float,
    tau: float,
    mesh: Mesh,
    solver: NutrientSolver | None = None,
) -> np.ndarray:
    """One implicit Euler step; ``source`` and ``consumption`` are nodal values."""
    solver = solver or NutrientSolver(mesh, nu, tau)
    F = mu_prev + tau * source - tau * consumption
    return solver.solve(F, mu_D, guess=mu_prev)


def stability_bounds(traj: Trajectory, problem: NutrientProblem) -> np.ndarray:
    """Step-wise max-norm bounds on the nutrient from the discrete maximum principle.

    ``|mu_i| <= max(|mu_D,i|, |mu_{i-1}| + tau |h_i - H_i|)``, accumulated with
    the exact source samples of the run.
    """
    mesh = traj.mesh
    grid = traj.grid
    tau = grid.tau
    x = mesh.vertices
    kappa = traj.kappa
    if kappa is None:
        raise ValueError("trajectory carries no kappa samples")
    bounds = [float(np.max(np.abs(traj.mu[0])))]
    for i in range(1, len(traj.mu)):
        t0, t1 = grid.times[i - 1], grid.times[i]
        h = problem.interval_average(problem.source, t0, t1, x)
        H = problem.consumption(kappa_conv_y(traj.y, kappa, tau, i))
        muD = problem.interval_average(problem.mu_D, t0, t1, x)[mesh.boundary_nodes]
        bounds.append(max(float(np.max(np.abs(muD))), bounds[-1] + tau * float(np.max(np.abs(h - H)))))
    return np.array(bounds)


@dataclass
class CoupledProblem:
    morpho: MorphoProblem
    nutrient: NutrientProblem
    growth_uses: str = "previous"  # "previous" -> mu_{i-1}; "current" -> mu_i


def run_coupled(problem: CoupledProblem) -> Trajectory:
    """Staggered growth / equilibrium / nutrient stepping.

    With ``growth_uses="previous"`` step i updates G with ``mu_{i-1}``, then
    solves for ``y_i``, then advances the nutrient using ``(kappa *_tau y)_{i-1}``.
    """
    if problem.growth_uses not in ("previous", "current"):
        raise ValueError("growth_uses must be 'previous' or 'current'")
    mp = problem.morpho
    npb = problem.nutrient
    mesh = mp.mesh
    grid = mp.grid
    tau = grid.tau
    stepper = MorphoStepper(mp)
    kappa = stepper.kappa
    solver = NutrientSolver(mesh, npb.nu, tau)
    x = mesh.vertices
    mu = np.asarray(npb.mu0(x), dtype=float)
    stepper.traj.mu.append(mu)

    for i in range(1, grid.N + 1):
        t0, t1 = grid.times[i - 1], grid.times[i]
        y_hist = stepper.traj.y
        src = npb.interval_average(npb.source, t0, t1, x)
        cons = npb.consumption(kappa_conv_y(y_hist, kappa, tau, i))
        muD = npb.interval_average(npb.mu_D, t0, t1, x)
        if problem.growth_uses == "current":
            mu_new = nutrient_step(mu, src, cons, muD, npb.nu, tau, mesh, solver)
            stepper.step(mu_qp=mesh.centroid_values(mu_new), mu_record=mu_new)
        else:
            stepper.step(mu_qp=mesh.centroid_values(mu))
            mu_new = nutrient_step(mu, src, cons, muD, npb.nu, tau, mesh, solver)
            stepper.traj.mu.append(mu_new)
        mu = mu_new
    return stepper.traj
