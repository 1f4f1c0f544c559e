"""Batched 3x3 tensor algebra.

All functions accept arrays of shape ``(..., 3, 3)`` and broadcast over the
leading axes. Third-order tensors have shape ``(..., 3, 3, 3)``.
"""

from __future__ import annotations

import numpy as np

from .tolerances import GAUSS_POINTS

IDENTITY = np.eye(3)

# Pade [13/13] coefficients for the exponential (Higham 2005).
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
# scaled so the constant term is 1 and expm(0) == Id exactly
_PADE13 = _PADE13 / _PADE13[0]
_THETA13 = 5.371920351148152

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_POINTS)
# mapped to [0, 1]
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def det(a: np.ndarray) -> np.ndarray:
    """Cofactor-expansion determinant along the first row."""
    a = np.asarray(a, dtype=float)
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


def cof(a: np.ndarray) -> np.ndarray:
    """Cofactor matrix, ``cof(A) = det(A) A^{-T}`` for invertible A."""
    a = np.asarray(a, dtype=float)
    c = np.empty(a.shape)
    c[..., 0, 0] = a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1]
    c[..., 0, 1] = a[..., 1, 2] * a[..., 2, 0] - a[..., 1, 0] * a[..., 2, 2]
    c[..., 0, 2] = a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]
    c[..., 1, 0] = a[..., 0, 2] * a[..., 2, 1] - a[..., 0, 1] * a[..., 2, 2]
    c[..., 1, 1] = a[..., 0, 0] * a[..., 2, 2] - a[..., 0, 2] * a[..., 2, 0]
    c[..., 1, 2] = a[..., 0, 1] * a[..., 2, 0] - a[..., 0, 0] * a[..., 2, 1]
    c[..., 2, 0] = a[..., 0, 1] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 1]
    c[..., 2, 1] = a[..., 0, 2] * a[..., 1, 0] - a[..., 0, 0] * a[..., 1, 2]
    c[..., 2, 2] = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return c


def inv(a: np.ndarray) -> np.ndarray:
    """Inverse via the adjugate. Singular input yields inf/nan entries."""
    a = np.asarray(a, dtype=float)
    d = det(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.swapaxes(cof(a), -1, -2) / d[..., None, None]


def frob(a: np.ndarray) -> np.ndarray:
    """Frobenius norm over the trailing two (or three) axes."""
    a = np.asarray(a, dtype=float)
    axes = tuple(range(a.ndim - 2, a.ndim)) if a.ndim >= 2 else None
    return np.sqrt(np.sum(a * a, axis=axes))


def frob3(c: np.ndarray) -> np.ndarray:
    """Frobenius norm of a third-order tensor."""
    c = np.asarray(c, dtype=float)
    return np.sqrt(np.sum(c * c, axis=(-3, -2, -1)))


def trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _pade13(a: np.ndarray) -> np.ndarray:
    b = _PADE13
    ident = np.broadcast_to(IDENTITY, a.shape)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6
        + b[5] * a4
        + b[3] * a2
        + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6
        + b[4] * a4
        + b[2] * a2
        + b[0] * ident
    )
    return np.linalg.solve(v - u, v + u)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [13/13] Pade kernel.

    Each matrix in the batch gets its own scaling exponent, so results do not
    depend on what else is in the batch.
    """
    a = np.asarray(a, dtype=float)
    shape = a.shape
    flat = a.reshape(-1, 3, 3)
    norm1 = np.max(np.sum(np.abs(flat), axis=-2), axis=-1)
    with np.errstate(divide="ignore"):
        s = np.where(norm1 > _THETA13, np.ceil(np.log2(norm1 / _THETA13)), 0.0)
    s = s.astype(int)
    scaled = flat / (2.0 ** s)[:, None, None]
    r = _pade13(scaled)
    for k in range(int(s.max(initial=0))):
        mask = s > k
        r[mask] = r[mask] @ r[mask]
    return r.reshape(shape)


def expm_dderiv(a: np.ndarray, e: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """Directional derivative of ``X -> expm(tau X)`` at ``a`` along ``e``.

    Uses ``tau * int_0^1 expm((1-s) tau a) e expm(s tau a) ds`` with
    Gauss-Legendre quadrature on [0, 1].
    """
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    out = np.zeros(np.broadcast_shapes(a.shape, e.shape))
    for s, w in zip(_GL_NODES, _GL_WEIGHTS):
        out += w * (expm((1.0 - s) * tau * a) @ e @ expm(s * tau * a))
    return tau * out


def partial_transpose(c: np.ndarray) -> np.ndarray:
    """``(C^t)_{ijk} = C_{jik}``."""
    return np.swapaxes(np.asarray(c, dtype=float), -3, -2)


def tensor3_times_mat(c: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``(CB)_{ijk} = C_{ijl} B_{lk}``."""
    return np.einsum("...ijl,...lk->...ijk", c, b)


def mat_times_tensor3(b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``(BC)_{ijk} = B_{il} C_{ljk}``."""
    return np.einsum("...il,...ljk->...ijk", b, c)


def random_rotation(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniformly distributed proper rotations via unit quaternions."""
    n = 1 if size is None else size
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    r = np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
            np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
            np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
        ],
        -2,
    )
    return r[0] if size is None else r
