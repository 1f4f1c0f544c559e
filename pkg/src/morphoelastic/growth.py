"""Growth-tensor dynamics and the staggered morphoelastic time stepping.

Each step first advances the growth tensor with an exponential update driven
by the space-time mollified deformation gradient of the *previous* steps, then
re-equilibrates the deformation for the new growth tensor.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .fem import Load, MinimizeOptions, min_elastic_det, minimize_energy, total_energy
from .hyperelastic import EnergyDensity, GrowthField
from .mesh import Mesh
from .tolerances import DET_IDENTITY_REL

log = logging.getLogger(__name__)

LOG2 = math.log(2.0)


class InvariantViolation(RuntimeError):
    """A per-step invariant failed; ``dump`` holds the offending values."""

    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


class StepFailure(RuntimeError):
    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


# --------------------------------------------------------------------------
# growth rate


@dataclass(frozen=True)
class GrowthRate:
    """``M(G, H, mu) = sat(a0 Id + a1 sym(H) + a2 (Id - G) + a3 tanh(mu) Id)``.

    ``sat(X) = X / sqrt(1 + |X|^2 / rho^2)`` keeps ``|M| < rho`` and is
    1-Lipschitz, so the Lipschitz constant of M with respect to
    ``(G, H, mu)`` is at most ``sqrt(a1^2 + a2^2 + 3 a3^2)``.
    """

    alpha0: float = 0.0
    alpha1: float = 0.5
    alpha2: float = 0.5
    alpha3: float = 0.0
    rho: float = 1.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("saturation radius rho must be positive")

    @property
    def M_bound(self) -> float:
        return self.rho

    @property
    def lip_bound(self) -> float:
        return math.sqrt(self.alpha1**2 + self.alpha2**2 + 3.0 * self.alpha3**2)

    @property
    def tau_star(self) -> float:
        return LOG2 / self.M_bound

    def raw(self, G: np.ndarray, H: np.ndarray, mu: np.ndarray | None = None) -> np.ndarray:
        G = np.asarray(G, dtype=float)
        X = self.alpha0 * T.IDENTITY + self.alpha1 * T.sym(H) + self.alpha2 * (T.IDENTITY - G)
        if mu is not None:
            X = X + (self.alpha3 * np.tanh(np.asarray(mu, dtype=float)))[..., None, None] * T.IDENTITY
        return X

    def __call__(self, G: np.ndarray, H: np.ndarray, mu: np.ndarray | None = None) -> np.ndarray:
        X = self.raw(G, H, mu)
        nrm = T.frob(X)
        return X / np.sqrt(1.0 + (nrm / self.rho) ** 2)[..., None, None]


# --------------------------------------------------------------------------
# convolution kernel


def bump_mollifier(radius: float) -> Callable[[np.ndarray], np.ndarray]:
    """``c (1 - |x|^2/r^2)^2`` on the ball of radius r, normalized to unit integral."""
    c = 105.0 / (32.0 * math.pi * radius**3)

    def phi(x):
        r2 = np.sum(np.asarray(x) ** 2, axis=-1) / radius**2
        return np.where(r2 < 1.0, c * (1.0 - r2) ** 2, 0.0)

    return phi


def exponential_memory(t_rel: float) -> Callable[[np.ndarray], np.ndarray]:
    """``kappa(t) = exp(-t / t_rel) / t_rel``."""
    if t_rel <= 0:
        raise ValueError("relaxation time must be positive")
    return lambda t: np.exp(-np.asarray(t, dtype=float) / t_rel) / t_rel


@dataclass
class ConvolutionKernel:
    kappa: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    radius: float
    phi_integral: float = 1.0

    @classmethod
    def default(cls, radius: float = 0.4, t_rel: float = 0.5) -> "ConvolutionKernel":
        return cls(kappa=exponential_memory(t_rel), phi=bump_mollifier(radius), radius=radius)

    def kappa_samples(self, grid: "TimeGrid") -> np.ndarray:
        return np.asarray(self.kappa(grid.times), dtype=float)


def mollifier_matrix(phi, mesh: Mesh, points: np.ndarray | None = None) -> np.ndarray:
    """``(n_points, n_tets)`` weights ``vol_t * phi(x_q - x_t)``."""
    pts = mesh.quad_points if points is None else np.asarray(points, dtype=float).reshape(-1, 3)
    diff = pts[:, None, :] - mesh.centroids[None, :, :]
    return phi(diff) * mesh.volumes[None, :]


def spatial_mollify(field: np.ndarray, phi, mesh: Mesh, points: np.ndarray | None = None,
                    weights: np.ndarray | None = None) -> np.ndarray:
    """``(phi * field)(x_q)`` for an element-constant field extended by zero outside the mesh."""
    w = mollifier_matrix(phi, mesh, points) if weights is None else weights
    return np.einsum("qt,tij->qij", w, field)


def time_conv_step(history, kappa: np.ndarray, tau: float, i: int) -> np.ndarray:
    """``sum_{j=0}^{i-1} tau kappa_j history[i-1-j]``."""
    if i < 1 or len(history) < i:
        raise ValueError(f"history must hold steps 0..{i - 1}")
    out = np.zeros_like(history[0])
    for j in range(i):
        out += tau * kappa[j] * history[i - 1 - j]
    return out


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if self.N < 1 or self.T <= 0:
            raise ValueError("time grid needs T > 0 and N >= 1")

    @property
    def tau(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.N + 1)

    def check(self, M_bound: float) -> None:
        tau_star = LOG2 / M_bound
        if self.tau >= tau_star:
            raise ValueError(
                f"time step tau = {self.tau:g} violates tau < tau* = (log 2)/|M|_inf = {tau_star:g}"
            )


def exp_update(G_prev: GrowthField, M: np.ndarray, tau: float) -> GrowthField:
    """``G_i = expm(tau M) G_{i-1}`` at every quadrature point."""
    mmax = float(np.max(T.frob(M))) if M.size else 0.0
    if tau * mmax > LOG2:
        warnings.warn(f"tau*|M| = {tau * mmax:g} exceeds log 2", RuntimeWarning, stacklevel=2)
    return GrowthField.from_tensors(T.expm(tau * M) @ G_prev.G)


# --------------------------------------------------------------------------
# a-priori bounds


def gronwall_bounds(G0_norm: float, M_bound: float, tau: float, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Step-wise bounds on ``|G_m|`` and ``|G_m - G_{m-1}|/tau``.

    Obtained by running the summed energy inequality for ``|G|^2`` with
    equality, which dominates every discrete solution when
    ``tau < (log 2)/M_bound``.
    """
    a = math.expm1(tau * M_bound)
    if a >= 1.0:
        raise ValueError("Gronwall bound requires tau < (log 2)/M_bound")
    u = np.empty(N + 1)
    u[0] = G0_norm**2
    acc = 0.0
    for m in range(1, N + 1):
        u[m] = ((1.0 + a) * u[0] + 2.0 * acc) / (1.0 - a)
        acc += a * u[m]
    g = np.sqrt(u)
    rate = np.concatenate([[0.0], a / tau * g[:-1]])
    return g, rate


# --------------------------------------------------------------------------
# trajectory


@dataclass
class Trajectory:
    grid: TimeGrid
    mesh: Mesh
    y: list = field(default_factory=list)
    G: list = field(default_factory=list)
    detG: list = field(default_factory=list)
    KH: list = field(default_factory=list)
    M: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    kappa: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return len(self.G) - 1

    def _locate(self, t: float) -> tuple[int, float]:
        tau = self.grid.tau
        if t <= 0:
            return 1, 0.0
        i = min(max(int(math.ceil(t / tau - 1e-12)), 1), self.n_steps)
        return i, (t - (i - 1) * tau) / tau

    def _node(self, t: float) -> int | None:
        k = t / self.grid.tau
        r = round(k)
        if abs(k - r) <= 1e-12 * max(1.0, k) and 0 <= r <= self.n_steps:
            return int(r)
        return None

    def _hat(self, seq, t):
        node = self._node(t)
        if node is not None:
            return seq[node]
        if t <= 0:
            return seq[0]
        i, a = self._locate(t)
        return a * seq[i] + (1.0 - a) * seq[i - 1]

    def _bar(self, seq, t):
        node = self._node(t)
        if node is not None:
            return seq[node]
        if t <= 0:
            return seq[0]
        return seq[self._locate(t)[0]]

    def G_hat(self, t: float) -> np.ndarray:
        """Piecewise affine interpolant of the growth tensors."""
        return self._hat(self.G, t)

    def G_bar(self, t: float) -> np.ndarray:
        """Backward piecewise constant interpolant of the growth tensors."""
        return self._bar(self.G, t)

    def G_hat_rate(self, t: float) -> np.ndarray:
        i, _ = self._locate(t)
        return (self.G[i] - self.G[i - 1]) / self.grid.tau

    def y_hat(self, t: float) -> np.ndarray:
        return self._hat(self.y, t)

    def y_bar(self, t: float) -> np.ndarray:
        return self._bar(self.y, t)

    def step_rates(self) -> np.ndarray:
        """``max_q |G_i - G_{i-1}| / tau`` per step (0 for the initial state)."""
        out = [0.0]
        for i in range(1, len(self.G)):
            out.append(float(np.max(T.frob(self.G[i] - self.G[i - 1]))) / self.grid.tau)
        return np.array(out)

    def diagnostics(self) -> list[dict]:
        rates = self.step_rates()
        rows = []
        for i in range(len(self.G)):
            mu = self.mu[i] if self.mu else None
            rows.append(
                {
                    "i": i,
                    "t": float(self.grid.times[i]),
                    "energy": float(self.energy[i]),
                    "min_detG": float(np.min(self.detG[i])),
                    "max_normG": float(np.max(T.frob(self.G[i]))),
                    "max_step_rate": float(rates[i]),
                    "min_mu": float(np.min(mu)) if mu is not None else math.nan,
                    "max_mu": float(np.max(mu)) if mu is not None else math.nan,
                }
            )
        return rows


# --------------------------------------------------------------------------
# stepping


@dataclass
class MorphoProblem:
    mesh: Mesh
    energy: EnergyDensity
    rate: GrowthRate
    kernel: ConvolutionKernel
    grid: TimeGrid
    load: Load = field(default_factory=Load)
    G0: GrowthField | None = None
    solver: MinimizeOptions = field(default_factory=MinimizeOptions)
    check_invariants: bool = True

    def initial_growth(self) -> GrowthField:
        return self.G0 if self.G0 is not None else GrowthField.identity(self.mesh.n_tets)


class MorphoStepper:
    """Holds the state ``(y_{i}, G_{i})`` and the mollified-gradient history."""

    def __init__(self, problem: MorphoProblem):
        self.problem = problem
        mesh = problem.mesh
        problem.grid.check(problem.rate.M_bound)
        self.weights = mollifier_matrix(problem.kernel.phi, mesh)
        self.kappa = problem.kernel.kappa_samples(problem.grid)
        self.tau = problem.grid.tau
        self.history: list[np.ndarray] = []
        self.growth = problem.initial_growth()
        self.delta = float(np.min(self.growth.detG))
        if self.delta <= 0:
            raise ValueError("initial growth tensor must have det G0 >= delta > 0")
        self.i = 0
        self.traj = Trajectory(grid=problem.grid, mesh=mesh, kappa=self.kappa)

        load0 = problem.load.nodal(0.0, mesh)
        res = self._equilibrate(self.growth, load0, mesh.vertices.copy())
        self.y = res.y
        self._record(res.energy, res.iterations, KH=np.zeros((mesh.n_tets, 3, 3)), M=np.zeros((mesh.n_tets, 3, 3)))

    def _equilibrate(self, growth, load, y_init):
        p = self.problem
        try:
            return minimize_energy(growth, load, y_init, p.energy, p.mesh, p.solver)
        except (RuntimeError, ValueError) as exc:
            raise StepFailure(
                f"equilibrium solve failed at step {self.i}: {exc}",
                {"step": self.i, "min_detG": float(np.min(growth.detG))},
            ) from exc

    def _record(self, energy, iterations, KH, M, mu=None):
        t = self.traj
        t.y.append(self.y)
        t.G.append(self.growth.G)
        t.detG.append(self.growth.detG)
        t.KH.append(KH)
        t.M.append(M)
        t.energy.append(energy)
        t.iterations.append(iterations)
        if mu is not None:
            t.mu.append(mu)
        self.history.append(spatial_mollify(self.problem.mesh.gradient(self.y), None, self.problem.mesh,
                                            weights=self.weights))

    def step(self, mu_qp: np.ndarray | None = None, mu_record: np.ndarray | None = None) -> None:
        """Advance one step; ``mu_qp`` is the nutrient value fed to the rate."""
        p = self.problem
        i = self.i + 1
        KH = time_conv_step(self.history, self.kappa, self.tau, i)
        M = p.rate(self.growth.G, KH, mu_qp)
        prev = self.growth
        new = exp_update(prev, M, self.tau)
        load = p.load.nodal(p.grid.times[i], p.mesh)
        self.i = i
        if p.check_invariants:
            self._check_growth(prev, new, M, i)
        res = self._equilibrate(new, load, self.y)
        self.growth = new
        self.y = res.y
        if p.check_invariants and min_elastic_det(self.y, new, p.mesh) <= 0:
            raise InvariantViolation("elastic strain lost orientation", {"step": i})
        self._record(res.energy, res.iterations, KH, M, mu_record)
        log.debug("step %d: E=%.6g min detG=%.6g iters=%d", i, res.energy, np.min(new.detG), res.iterations)

    def _check_growth(self, prev: GrowthField, new: GrowthField, M: np.ndarray, i: int) -> None:
        rho = self.problem.rate.M_bound
        tau = self.tau
        expected = np.exp(tau * T.trace(M)) * prev.detG
        err = np.abs(new.detG - expected) / prev.detG
        if np.max(err) > DET_IDENTITY_REL:
            q = int(np.argmax(err))
            raise InvariantViolation(
                "determinant identity violated",
                {"step": i, "qp": q, "rel_error": float(err[q]), "detG": float(new.detG[q])},
            )
        lower = math.exp(-3.0 * tau * i * rho) * self.delta
        if np.min(new.detG) < lower:
            raise InvariantViolation(
                "determinant lower bound violated",
                {"step": i, "min_detG": float(np.min(new.detG)), "bound": lower},
            )
        jump = T.frob(new.G - prev.G)
        cap = math.expm1(tau * rho) * T.frob(prev.G)
        if np.any(jump > cap * (1.0 + 1e-12)):
            raise InvariantViolation("growth step-size bound violated", {"step": i, "max_jump": float(np.max(jump))})


def run_morpho(problem: MorphoProblem) -> Trajectory:
    """Full staggered scheme over the problem's time grid."""
    stepper = MorphoStepper(problem)
    for _ in range(problem.grid.N):
        stepper.step()
    return stepper.traj


def initial_energy(problem: MorphoProblem) -> float:
    mesh = problem.mesh
    return total_energy(mesh.vertices, problem.initial_growth(), problem.load.nodal(0.0, mesh), problem.energy, mesh)
