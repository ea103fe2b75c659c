"""Helicoidal coordinates and the material tensors they induce.

Points in Cartesian coordinates are written ``(x, y, z)``, points in
helicoidal coordinates ``(u, v, w)``. With twist rate ``k = alpha / beta`` the
maps are

    to_helicoidal:   (x, y, z) -> ( x cos kz + y sin kz, -x sin kz + y cos kz, z)
    from_helicoidal: (u, v, w) -> ( u cos kw - v sin kw,  u sin kw + v cos kw, w)

All functions accept arrays with a trailing axis of length 3 and broadcast over
the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MU0 = 4e-7 * np.pi
RHO_COPPER = 1.72e-8


@dataclass(frozen=True)
class HelixParams:
    """Twist shared by every conductor of a cable.

    alpha : turns per 2*pi (0 for an untwisted cable)
    beta : longitudinal length per 2*pi in metres
    handedness : +1 for the right-handed helix t -> (r cos at, r sin at, bt),
        -1 for its mirror image
    """

    alpha: float
    beta: float
    handedness: int = 1

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.handedness not in (1, -1):
            raise ValueError("handedness must be +1 or -1")
        if not np.isfinite(self.alpha / self.beta):
            raise ValueError("twist rate alpha/beta is not finite")

    @property
    def twist(self) -> float:
        """Signed twist rate ``k`` in rad/m."""
        return self.handedness * self.alpha / self.beta


@dataclass(frozen=True)
class MaterialSpec:
    resistivity: float = RHO_COPPER
    permeability: float = MU0

    def __post_init__(self):
        if not self.resistivity > 0:
            raise ValueError("resistivity must be positive")
        if not self.permeability > 0:
            raise ValueError("permeability must be positive")


def _split(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError(f"expected trailing axis of length 3, got shape {p.shape}")
    return p, p[..., 0], p[..., 1], p[..., 2]


def to_helicoidal(p, h: HelixParams) -> np.ndarray:
    p, x, y, z = _split(p)
    th = h.twist * z
    c, s = np.cos(th), np.sin(th)
    return np.stack([x * c + y * s, -x * s + y * c, z], axis=-1)


def from_helicoidal(q, h: HelixParams) -> np.ndarray:
    q, u, v, w = _split(q)
    th = h.twist * w
    c, s = np.cos(th), np.sin(th)
    return np.stack([u * c - v * s, u * s + v * c, w], axis=-1)


def jacobian_inverse_map(q, h: HelixParams) -> np.ndarray:
    """Jacobian of ``from_helicoidal`` at ``q``; shape ``q.shape[:-1] + (3, 3)``."""
    q, u, v, w = _split(q)
    k = h.twist
    th = k * w
    c, s = np.cos(th), np.sin(th)
    J = np.zeros(q.shape[:-1] + (3, 3))
    J[..., 0, 0] = c
    J[..., 0, 1] = -s
    J[..., 0, 2] = -k * (u * s + v * c)
    J[..., 1, 0] = s
    J[..., 1, 1] = c
    J[..., 1, 2] = k * (u * c - v * s)
    J[..., 2, 2] = 1.0
    return J


def _inverse_jacobian(q, h: HelixParams) -> np.ndarray:
    # closed form: rotate back, then undo the w-shear
    q, u, v, w = _split(q)
    k = h.twist
    th = k * w
    c, s = np.cos(th), np.sin(th)
    Ji = np.zeros(q.shape[:-1] + (3, 3))
    Ji[..., 0, 0] = c
    Ji[..., 0, 1] = s
    Ji[..., 0, 2] = k * v
    Ji[..., 1, 0] = -s
    Ji[..., 1, 1] = c
    Ji[..., 1, 2] = -k * u
    Ji[..., 2, 2] = 1.0
    return Ji


def metric_product(q, h: HelixParams) -> np.ndarray:
    """``J^T J`` for the inverse map; independent of ``w``."""
    J = jacobian_inverse_map(q, h)
    return np.einsum("...ki,...kj->...ij", J, J)


def metric_uv(u, v, k: float) -> np.ndarray:
    """Closed form of ``J^T J`` at any ``w`` (it does not depend on ``w``)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    T = np.zeros(np.broadcast(u, v).shape + (3, 3))
    T[..., 0, 0] = 1.0
    T[..., 1, 1] = 1.0
    T[..., 0, 2] = T[..., 2, 0] = -k * v
    T[..., 1, 2] = T[..., 2, 1] = k * u
    T[..., 2, 2] = 1.0 + k * k * (u * u + v * v)
    return T


def inverse_metric_uv(u, v, k: float) -> np.ndarray:
    """Closed form of ``J^-1 J^-T = (J^T J)^-1``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    T = np.zeros(np.broadcast(u, v).shape + (3, 3))
    T[..., 0, 0] = 1.0 + k * k * v * v
    T[..., 1, 1] = 1.0 + k * k * u * u
    T[..., 0, 1] = T[..., 1, 0] = -k * k * u * v
    T[..., 0, 2] = T[..., 2, 0] = k * v
    T[..., 1, 2] = T[..., 2, 1] = -k * u
    T[..., 2, 2] = 1.0
    return T


def resistivity_tensor(q, h: HelixParams, mat: MaterialSpec) -> np.ndarray:
    J = jacobian_inverse_map(q, h)
    det = np.linalg.det(J)
    return mat.resistivity * np.einsum("...ki,...kj->...ij", J, J) / det[..., None, None]


def permeability_tensor(q, h: HelixParams, mat: MaterialSpec) -> np.ndarray:
    Ji = _inverse_jacobian(q, h)
    det = 1.0 / np.linalg.det(Ji)
    return mat.permeability * np.einsum("...ik,...jk->...ij", Ji, Ji) * det[..., None, None]


def pullback_field(H_uvw, q, h: HelixParams) -> np.ndarray:
    """Magnetic field (a 1-form) in Cartesian components: ``J^-T H_uvw``."""
    Ji = _inverse_jacobian(q, h)
    return np.einsum("...ki,...k->...i", Ji, np.asarray(H_uvw))


def pullback_current(J_uvw, q, h: HelixParams) -> np.ndarray:
    """Current density (a 2-form) in Cartesian components: ``J J_uvw / det J``."""
    J = jacobian_inverse_map(q, h)
    det = np.linalg.det(J)
    return np.einsum("...ij,...j->...i", J, np.asarray(J_uvw)) / det[..., None]
