"""Total elastic energy on a P1 mesh and the per-step equilibrium solve."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .hyperelastic import EnergyDensity, GrowthField, piola_with_growth
from .mesh import NEUMANN, Mesh
from .optim import lbfgs
from .tolerances import MIN_GTOL, MIN_MAX_ITER

VectorField = Callable[[float, np.ndarray], np.ndarray]


def _zero_field(t: float, x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


@dataclass
class Load:
    """Body force density ``body(t, x)`` and Neumann traction ``traction(t, x)``.

    Both callables receive points of shape ``(k, 3)`` and return ``(k, 3)``.
    """

    body: VectorField = _zero_field
    traction: VectorField = _zero_field

    @classmethod
    def constant(cls, f=(0.0, 0.0, 0.0), g=(0.0, 0.0, 0.0), ramp: float | None = None) -> "Load":
        """Spatially constant load, optionally scaled by ``min(t / ramp, 1)``."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)

        def scale(t):
            return 1.0 if not ramp else min(t / ramp, 1.0)

        return cls(
            body=lambda t, x: np.broadcast_to(scale(t) * f, x.shape).copy(),
            traction=lambda t, x: np.broadcast_to(scale(t) * g, x.shape).copy(),
        )

    def nodal(self, t: float, mesh: Mesh) -> np.ndarray:
        """Nodal vector ``L`` with ``<l(t), y> = sum_a L_a . y_a``.

        One-point quadrature per tet and per Neumann triangle; the P1 field at
        a centroid is the vertex average, so each vertex receives an equal share.
        """
        out = np.zeros((mesh.n_vertices, 3))
        f = np.asarray(self.body(t, mesh.centroids), dtype=float)
        if np.any(~np.isfinite(f)):
            raise ValueError(f"body force not finite at t={t}")
        share = (mesh.volumes[:, None] * f) / 4.0
        for a in range(4):
            np.add.at(out, mesh.tets[:, a], share)
        neu = mesh.facet_tags == NEUMANN
        if np.any(neu):
            tri = mesh.facets[neu]
            xc = mesh.vertices[tri].mean(axis=1)
            g = np.asarray(self.traction(t, xc), dtype=float)
            if np.any(~np.isfinite(g)):
                raise ValueError(f"traction not finite at t={t}")
            share = (mesh.facet_areas[neu][:, None] * g) / 3.0
            for a in range(3):
                np.add.at(out, tri[:, a], share)
        return out


def elastic_energy_density(y, growth: GrowthField, energy: EnergyDensity, mesh: Mesh) -> np.ndarray:
    """Per-tet ``W(grad y G^{-1}) det G`` (``inf`` where inadmissible)."""
    F = mesh.gradient(y)
    return energy.W(F @ growth.Ginv) * growth.detG


def total_energy(y, growth: GrowthField, load: np.ndarray, energy: EnergyDensity, mesh: Mesh) -> float:
    """``sum vol W(grad y G^{-1}) det G - <l, y>``; ``inf`` for inadmissible ``y``.

    ``load`` is the nodal vector from :meth:`Load.nodal`.
    """
    w = elastic_energy_density(y, growth, energy, mesh)
    if not np.all(np.isfinite(w)):
        return math.inf
    return float(np.dot(mesh.volumes, w) - np.sum(load * y))


def energy_gradient(y, growth: GrowthField, load: np.ndarray, energy: EnergyDensity, mesh: Mesh) -> np.ndarray:
    """Nodal gradient of :func:`total_energy`; rows of Dirichlet nodes are zero."""
    P = piola_with_growth(energy, mesh.gradient(y), growth)
    contrib = mesh.volumes[:, None, None] * np.einsum("tij,taj->tai", P, mesh.shape_gradients)
    out = np.zeros((mesh.n_vertices, 3))
    for a in range(4):
        np.add.at(out, mesh.tets[:, a], contrib[:, a])
    out -= load
    out[mesh.dirichlet_nodes] = 0.0
    return out


@dataclass
class MinimizeOptions:
    gtol: float = MIN_GTOL
    max_iter: int = MIN_MAX_ITER
    initial_step: float = 1e-2


@dataclass
class MinimizeResult:
    y: np.ndarray
    energy: float
    gnorm: float
    iterations: int
    energies: list = field(default_factory=list)


def energy_scale(y, growth, load, energy, mesh) -> float:
    return max(1.0, abs(total_energy(y, growth, load, energy, mesh)))


def minimize_energy(
    growth: GrowthField,
    load: np.ndarray,
    y_init: np.ndarray,
    energy: EnergyDensity,
    mesh: Mesh,
    opts: MinimizeOptions | None = None,
) -> MinimizeResult:
    """Local minimizer of the total energy over deformations fixed on the Dirichlet part.

    Stops once the max-norm of the free gradient is at most
    ``opts.gtol * max(1, |E(y_init)|)``.
    """
    opts = opts or MinimizeOptions()
    y0 = np.array(y_init, dtype=float)
    mask = mesh.free_mask
    if not np.array_equal(y0[~mask], mesh.vertices[~mask]):
        raise ValueError("initial deformation violates the Dirichlet condition y = id")
    e0 = total_energy(y0, growth, load, energy, mesh)
    if not math.isfinite(e0):
        raise ValueError("initial deformation is inadmissible (infinite energy)")

    def unpack(x):
        y = y0.copy()
        y[mask] = x
        return y

    def fun(x):
        return total_energy(unpack(x), growth, load, energy, mesh)

    def grad(x):
        return energy_gradient(unpack(x), growth, load, energy, mesh)[mask]

    res = lbfgs(
        fun,
        grad,
        y0[mask],
        gtol=opts.gtol * max(1.0, abs(e0)),
        max_iter=opts.max_iter,
        initial_step=opts.initial_step,
    )
    return MinimizeResult(unpack(res.x), res.f, res.gnorm, res.iterations, res.energies)


def min_elastic_det(y, growth: GrowthField, mesh: Mesh) -> float:
    return float(np.min(T.det(mesh.gradient(y) @ growth.Ginv)))
