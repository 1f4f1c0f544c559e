"""Quick invariant suites run by ``morpho selftest``.

Each check returns ``(name, ok, detail)``. Samples come from a seeded
counter-based generator, so a failure is reproducible from the seed.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .fem import Load, energy_gradient, total_energy
from .growth import (ConvolutionKernel, GrowthRate, InvariantViolation, MorphoProblem, TimeGrid,
                     run_morpho)
from .hyperelastic import EnergyDensity, GrowthField
from .mesh import unit_cube
from .nutrient import NutrientSolver
from .tolerances import (DW_FD_REL, EXP_DET_REL, EXP_INVERSE_ABS, FRAME_REL, GRAD_FD_REL,
                         GRAD_FD_STEP)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_strains(rng: np.random.Generator, n: int, det_lo: float = 0.0, det_hi: float = 10.0) -> np.ndarray:
    """``R1 diag(s) R2`` with ``prod(s)`` uniform in ``(det_lo, det_hi]``."""
    logs = rng.normal(0.0, 0.5, size=(n, 3))
    s = np.exp(logs - logs.mean(axis=1, keepdims=True))
    d = det_hi - (det_hi - det_lo) * rng.random(n)
    s *= np.cbrt(d)[:, None]
    return T.random_rotation(rng, n) @ (s[:, :, None] * T.random_rotation(rng, n))


def random_matrices(rng: np.random.Generator, n: int, max_norm: float) -> np.ndarray:
    A = rng.normal(size=(n, 3, 3))
    r = max_norm * rng.random(n) ** (1.0 / 9.0)
    return A * (r / T.frob(A))[:, None, None]


def check_expm(rng, n=2000):
    A = random_matrices(rng, n, 5.0)
    E = T.expm(A)
    nrm = T.frob(A)
    bound = np.all(T.frob(E - T.IDENTITY) <= np.expm1(nrm) * (1 + 1e-12) + 1e-14)
    det_err = np.max(np.abs(T.det(E) / np.exp(T.trace(A)) - 1.0))
    inv_err = np.max(np.abs(E @ T.expm(-A) - T.IDENTITY))
    ok = bool(bound) and det_err <= EXP_DET_REL and inv_err <= EXP_INVERSE_ABS
    return "matrix exponential", ok, f"det rel {det_err:.2e}, inverse {inv_err:.2e}, norm bound {bool(bound)}"


def check_energy(rng, energy: EnergyDensity, n=2000):
    F = random_strains(rng, n)
    W = energy.W(F)
    coercive = np.all(W >= energy.c1 * T.frob(F) ** energy.p - 1.0 / energy.c1)
    mandel = np.all(T.frob(energy.mandel(F)) <= energy.c2 * (W + 1.0) * (1 + 1e-12))
    R = T.random_rotation(rng, n)
    frame = np.max(np.abs(energy.W(R @ F) / W - 1.0))
    ok = bool(coercive and mandel) and frame <= FRAME_REL
    return "energy density", ok, f"coercive {bool(coercive)}, mandel {bool(mandel)}, frame {frame:.2e}"


def check_stress(rng, energy: EnergyDensity, n=50, h=1e-6):
    F = random_strains(rng, n, 0.5, 2.0)
    worst = 0.0
    for f in F:
        num = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                d = np.zeros((3, 3))
                d[i, j] = h
                num[i, j] = (energy.W(f + d) - energy.W(f - d)) / (2 * h)
        an = energy.DW(f)
        worst = max(worst, float(np.max(np.abs(num - an)) / np.max(np.abs(an))))
    return "stress vs finite differences", worst <= DW_FD_REL, f"max rel {worst:.2e}"


def check_gradient(rng, energy: EnergyDensity, n_states=5):
    mesh = unit_cube(2)
    load = Load.constant((0.1, 0.0, -0.2), (0.0, 0.3, 0.0)).nodal(0.0, mesh)
    worst = 0.0
    for _ in range(n_states):
        y = mesh.vertices + 0.03 * rng.normal(size=mesh.vertices.shape) * mesh.free_mask
        G = GrowthField.from_tensors(T.expm(random_matrices(rng, mesh.n_tets, 0.3)))
        g = energy_gradient(y, G, load, energy, mesh)
        d = rng.normal(size=y.shape) * mesh.free_mask
        num = (total_energy(y + GRAD_FD_STEP * d, G, load, energy, mesh)
               - total_energy(y - GRAD_FD_STEP * d, G, load, energy, mesh)) / (2 * GRAD_FD_STEP)
        an = float(np.sum(g * d))
        worst = max(worst, abs(num - an) / max(abs(an), 1e-12))
    return "energy gradient vs finite differences", worst <= GRAD_FD_REL, f"max rel {worst:.2e}"


def check_rate(rng, rate: GrowthRate, n=2000):
    G = rng.normal(scale=3.0, size=(n, 3, 3))
    H = rng.normal(scale=3.0, size=(n, 3, 3))
    mu = rng.normal(scale=3.0, size=n)
    M = rate(G, H, mu)
    ok = bool(np.all(T.frob(M) <= rate.M_bound))
    return "rate saturation", ok, f"max |M| {float(np.max(T.frob(M))):.4f} <= {rate.M_bound}"


def check_scheme(rng, N=4):
    mesh = unit_cube(2)
    problem = MorphoProblem(
        mesh=mesh,
        energy=EnergyDensity(),
        rate=GrowthRate(alpha0=float(rng.uniform(-0.3, 0.3)), rho=1.0),
        kernel=ConvolutionKernel.default(),
        grid=TimeGrid(1.0, N),
    )
    try:
        traj = run_morpho(problem)
    except InvariantViolation as exc:
        return "scheme invariants", False, f"{exc} {exc.dump}"
    return "scheme invariants", True, f"{N} steps, min det G {float(np.min(traj.detG[-1])):.4f}"


def check_nutrient_constant(value=0.7):
    mesh = unit_cube(3)
    solver = NutrientSolver(mesh, nu=0.3, tau=0.1)
    mu = solver.solve(np.full(mesh.n_vertices, value), np.full(mesh.n_vertices, value),
                      guess=np.full(mesh.n_vertices, value))
    err = float(np.max(np.abs(mu - value)))
    return "nutrient constant state", err <= 4 * np.finfo(float).eps, f"max error {err:.2e}"


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = make_rng(seed)
    energy = EnergyDensity()
    return [
        check_expm(rng),
        check_energy(rng, energy),
        check_stress(rng, energy),
        check_gradient(rng, energy),
        check_rate(rng, GrowthRate(alpha0=0.2, alpha1=0.5, alpha2=0.5, alpha3=0.4)),
        check_scheme(rng),
        check_nutrient_constant(),
    ]


def format_results(results) -> str:
    return "\n".join(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, ok, detail in results)

