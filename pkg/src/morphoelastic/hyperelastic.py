"""Polyconvex stored energy ``W(F) = a |F|^p + b (det F)^{-s}`` and its stresses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T


class DegenerateStrainError(ValueError):
    """Raised when a stress is requested at a strain with ``det F <= 0``."""


@dataclass(frozen=True)
class EnergyDensity:
    """Isotropic polyconvex energy density.

    With the defaults ``p * a * 3**((p-2)/2) == s * b`` holds, so the identity
    is a stress-free state.
    """

    a: float = 1.0
    b: float = 6.0
    s: float = 2.0
    p: float = 4.0

    def __post_init__(self):
        if self.p <= 3:
            raise ValueError(f"growth exponent p must exceed 3, got {self.p}")
        if self.a <= 0 or self.b < 0 or self.s <= 0:
            raise ValueError("energy parameters require a > 0, b >= 0, s > 0")

    @property
    def c1(self) -> float:
        """Coercivity constant: ``W(A) >= c1 |A|^p - 1/c1``."""
        return min(self.a, 1.0)

    @property
    def c2(self) -> float:
        """Mandel control constant: ``|A^T DW(A)| <= c2 (W(A) + 1)``."""
        return max(self.p, math.sqrt(3.0) * self.s)

    def W(self, F: np.ndarray) -> np.ndarray | float:
        """Energy density; ``+inf`` wherever ``det F <= 0``."""
        F = np.asarray(F, dtype=float)
        d = T.det(F)
        ok = d > 0
        nrm = T.frob(F)
        dsafe = np.where(ok, d, 1.0)
        out = np.where(ok, self.a * nrm**self.p + self.b * dsafe ** (-self.s), np.inf)
        return float(out) if out.ndim == 0 else out

    def DW(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        d = T.det(F)
        if np.any(d <= 0):
            raise DegenerateStrainError("DW evaluated at det F <= 0")
        nrm = T.frob(F)
        finvt = np.swapaxes(T.inv(F), -1, -2)
        c_f = self.p * self.a * nrm ** (self.p - 2)
        c_inv = self.s * self.b * d ** (-self.s)
        return c_f[..., None, None] * F - c_inv[..., None, None] * finvt

    def mandel(self, F: np.ndarray) -> np.ndarray:
        """Mandel tensor ``F^T DW(F)``."""
        F = np.asarray(F, dtype=float)
        return np.swapaxes(F, -1, -2) @ self.DW(F)


@dataclass(frozen=True)
class GrowthField:
    """Growth tensors at quadrature points with cached inverse and determinant."""

    G: np.ndarray
    Ginv: np.ndarray
    detG: np.ndarray

    @classmethod
    def from_tensors(cls, G: np.ndarray) -> "GrowthField":
        G = np.array(G, dtype=float)
        d = T.det(G)
        if np.any(d <= 0):
            raise ValueError("growth tensor must have positive determinant")
        return cls(G=G, Ginv=T.inv(G), detG=d)

    @classmethod
    def identity(cls, n: int) -> "GrowthField":
        return cls.from_tensors(np.tile(np.eye(3), (n, 1, 1)))

    def __len__(self):
        return self.G.shape[0]


def piola_with_growth(energy: EnergyDensity, F: np.ndarray, growth: GrowthField) -> np.ndarray:
    """First Piola stress ``det G * DW(F G^{-1}) G^{-T}``."""
    Fe = F @ growth.Ginv
    if np.any(T.det(Fe) <= 0):
        raise DegenerateStrainError("elastic strain F G^{-1} has det <= 0")
    return growth.detG[..., None, None] * energy.DW(Fe) @ np.swapaxes(growth.Ginv, -1, -2)
