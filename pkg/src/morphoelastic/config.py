"""Run configuration: flat ``section.key = value`` files.

Blank lines and ``#`` comments are ignored. Vectors are written as
whitespace- or comma-separated numbers, lists of names as comma-separated
words. Every key has a default; see :func:`dump` or ``README.md``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import BASIS, ControlFamily, ObjectiveJ
from .fem import Load, MinimizeOptions
from .growth import ConvolutionKernel, GrowthRate, MorphoProblem, TimeGrid
from .hyperelastic import EnergyDensity, GrowthField
from .mesh import unit_cube
from .nutrient import Consumption, CoupledProblem, NutrientProblem

LOG2 = math.log(2.0)
FACES = {"x0", "x1", "y0", "y1", "z0", "z1", "all", ""}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class MeshConfig:
    n: int = 4
    dirichlet: str = "x0"
    neumann: str = "x1"


@dataclass
class EnergyConfig:
    a: float = 1.0
    b: float = 6.0
    s: float = 2.0
    p: float = 4.0


@dataclass
class GrowthConfig:
    alpha0: float = 0.0
    alpha1: float = 0.5
    alpha2: float = 0.5
    alpha3: float = 0.0
    rho: float = 1.0
    radius: float = 0.4
    t_rel: float = 0.5
    g0: float = 1.0  # initial growth tensor g0 * Id


@dataclass
class LoadConfig:
    f: tuple = (0.0, 0.0, 0.0)
    g: tuple = (0.0, 0.0, 0.0)
    ramp: float = 0.0  # > 0: loads scale with min(t / ramp, 1)


@dataclass
class TimeConfig:
    T: float = 1.0
    N: int = 32


@dataclass
class SolverConfig:
    gtol: float = 1e-8
    max_iter: int = 5000


@dataclass
class NutrientConfig:
    nu: float = 0.1
    h: float = 0.0
    hc: float = 0.0
    xc: tuple = (0.5, 0.5, 0.5)
    mu_D: float = 1.0
    mu0: float = 1.0
    order: str = "previous"


@dataclass
class ControlConfig:
    basis: tuple = ("const", "time")
    lo: tuple = (0.0, 0.0)
    hi: tuple = (1.0, 1.0)
    method: str = "grid"
    points: int = 3
    budget: int = 50
    beta1: float = 1.0
    beta2: float = 0.0
    beta3: float = 0.0
    target_scale: float = 1.0
    order: str = "current"


@dataclass
class OutputConfig:
    dir: str = "out"
    levels: int = 4


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    growth: GrowthConfig = field(default_factory=GrowthConfig)
    load: LoadConfig = field(default_factory=LoadConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    nutrient: NutrientConfig = field(default_factory=NutrientConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    @property
    def tau(self) -> float:
        return self.time.T / self.time.N

    @property
    def tau_star(self) -> float:
        return LOG2 / self.growth.rho


def _convert(raw: str, default):
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        parts = [p for p in raw.replace(",", " ").split()]
        if default and isinstance(default[0], str):
            return tuple(parts)
        return tuple(float(p) for p in parts)
    return raw


def parse_text(text: str, validate_mode: str | None = "simulate") -> RunConfig:
    cfg = RunConfig()
    errors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key == "seed":
            target, name = cfg, "seed"
        elif key.count(".") == 1:
            section, name = key.split(".")
            target = getattr(cfg, section, None)
            if target is None or not dataclasses.is_dataclass(target) or section == "seed":
                errors.append(f"line {lineno}: unknown key {key!r}")
                continue
        else:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if name not in {f.name for f in dataclasses.fields(target)}:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            setattr(target, name, _convert(value, getattr(target, name)))
        except ValueError:
            errors.append(f"line {lineno}: cannot parse value {value!r} for {key!r}")
    if errors:
        raise ConfigError(errors)
    if validate_mode:
        validate(cfg, validate_mode)
    return cfg


def parse_config(path: str | Path, mode: str | None = "simulate") -> RunConfig:
    return parse_text(Path(path).read_text(), mode)


def validate(cfg: RunConfig, mode: str = "simulate") -> None:
    errors = []
    if cfg.energy.p <= 3:
        errors.append(f"energy.p = {cfg.energy.p} violates p > 3")
    if cfg.energy.a <= 0 or cfg.energy.b < 0 or cfg.energy.s <= 0:
        errors.append("energy parameters require a > 0, b >= 0, s > 0")
    if cfg.mesh.n < 2:
        errors.append(f"mesh.n = {cfg.mesh.n} violates n >= 2")
    for key in ("dirichlet", "neumann"):
        if getattr(cfg.mesh, key) not in FACES:
            errors.append(f"mesh.{key} must be one of {sorted(FACES)}")
    if not cfg.mesh.dirichlet:
        errors.append("mesh.dirichlet must name a nonempty boundary part")
    if cfg.mesh.dirichlet == cfg.mesh.neumann:
        errors.append("mesh.dirichlet and mesh.neumann must be disjoint")
    if cfg.growth.rho <= 0:
        errors.append("growth.rho must be positive")
    elif cfg.time.N < 1 or cfg.time.T <= 0:
        errors.append("time grid needs time.T > 0 and time.N >= 1")
    elif cfg.tau >= cfg.tau_star:
        errors.append(
            f"time step tau = {cfg.tau:g} violates tau < tau* = (log 2)/|M|_inf = {cfg.tau_star:g}"
        )
    if cfg.growth.radius <= 0 or cfg.growth.t_rel <= 0:
        errors.append("growth.radius and growth.t_rel must be positive")
    if cfg.growth.g0 <= 0:
        errors.append("growth.g0 must be positive (det G0 >= delta > 0)")
    if len(cfg.load.f) != 3 or len(cfg.load.g) != 3:
        errors.append("load.f and load.g must have three components")
    if mode == "simulate-coupled":
        if cfg.nutrient.nu <= 0:
            errors.append(f"nutrient.nu = {cfg.nutrient.nu} violates nu > 0")
        if cfg.nutrient.order not in ("previous", "current"):
            errors.append("nutrient.order must be 'previous' or 'current'")
        if len(cfg.nutrient.xc) != 3:
            errors.append("nutrient.xc must have three components")
    if mode == "control":
        c = cfg.control
        unknown = [b for b in c.basis if b not in BASIS]
        if unknown:
            errors.append(f"control.basis has unknown ids {unknown}; known: {sorted(BASIS)}")
        if not (len(c.basis) == len(c.lo) == len(c.hi)):
            errors.append("control.basis, control.lo and control.hi must have equal length")
        elif any(h < l for l, h in zip(c.lo, c.hi)):
            errors.append("control box requires lo <= hi")
        if c.method not in ("grid", "pattern"):
            errors.append("control.method must be 'grid' or 'pattern'")
        if c.points < 1 or c.budget < 1:
            errors.append("control.points and control.budget must be positive")
        if min(c.beta1, c.beta2, c.beta3) < 0:
            errors.append("control weights beta1..beta3 must be nonnegative")
        if c.order not in ("previous", "current"):
            errors.append("control.order must be 'previous' or 'current'")
    if mode == "convergence-study" and cfg.output.levels < 2:
        errors.append("output.levels must be at least 2")
    if errors:
        raise ConfigError(errors)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if dataclasses.is_dataclass(val):
            for g in dataclasses.fields(val):
                lines.append(f"{f.name}.{g.name} = {_fmt(getattr(val, g.name))}")
        else:
            lines.append(f"{f.name} = {_fmt(val)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# builders


def build_problem(cfg: RunConfig, N: int | None = None, check_invariants: bool = True) -> MorphoProblem:
    mesh = unit_cube(cfg.mesh.n, cfg.mesh.dirichlet, cfg.mesh.neumann)
    g = cfg.growth
    return MorphoProblem(
        mesh=mesh,
        energy=EnergyDensity(cfg.energy.a, cfg.energy.b, cfg.energy.s, cfg.energy.p),
        rate=GrowthRate(g.alpha0, g.alpha1, g.alpha2, g.alpha3, g.rho),
        kernel=ConvolutionKernel.default(g.radius, g.t_rel),
        grid=TimeGrid(cfg.time.T, N or cfg.time.N),
        load=Load.constant(cfg.load.f, cfg.load.g, cfg.load.ramp or None),
        G0=GrowthField.from_tensors(np.tile(g.g0 * np.eye(3), (mesh.n_tets, 1, 1))),
        solver=MinimizeOptions(gtol=cfg.solver.gtol, max_iter=cfg.solver.max_iter),
        check_invariants=check_invariants,
    )


def build_coupled(cfg: RunConfig) -> CoupledProblem:
    nc = cfg.nutrient
    npb = NutrientProblem(
        nu=nc.nu,
        source=lambda t, x, v=nc.h: np.full(len(x), v),
        consumption=Consumption(nc.hc, tuple(nc.xc)),
        mu_D=lambda t, x, v=nc.mu_D: np.full(len(x), v),
        mu0=lambda x, v=nc.mu0: np.full(len(x), v),
    )
    return CoupledProblem(build_problem(cfg), npb, nc.order)


def build_control(cfg: RunConfig) -> tuple[ControlFamily, ObjectiveJ]:
    c = cfg.control
    T = cfg.time.T
    family = ControlFamily([BASIS[b](T) for b in c.basis], np.array(c.lo), np.array(c.hi), names=c.basis)
    scale = c.target_scale
    obj = ObjectiveJ(c.beta1, c.beta2, c.beta3, cfg.energy.p, y_target=lambda t, x: scale * x)
    return family, obj
