"""Plane-strain kinematics and the compressible Neo-Hookean model.

Tensors are numpy arrays of shape ``(..., 2, 2)`` (vectors ``(..., 2)``),
indexed ``[i, J]`` with the spatial index first. The energy is

    psi = lam/4 (J^2 - 1 - 2 ln J) + mu/2 (tr C - 2 - 2 ln J)

and the first Piola-Kirchhoff stress is its closed-form derivative

    P = mu (F - F^-T) + lam/2 (J^2 - 1) F^-T.

The ``*_components`` kernels work on the four components of ``F`` as
separate arrays, which lets the same formulas run on plain arrays and on
:mod:`mdem.autodiff` tape variables.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

J_MIN = 1e-8


class NonPositiveJacobian(ValueError):
    """det F fell to or below the admissible floor (inverted element/point)."""

    def __init__(self, message, mask=None):
        super().__init__(message)
        self.mask = mask


@dataclass(frozen=True)
class MaterialParams:
    lam: float
    mu: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not np.isfinite(self.mu) or self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")

    @classmethod
    def from_engineering(cls, E: float, nu: float) -> "MaterialParams":
        if E <= 0:
            raise ValueError(f"E must be > 0, got {E}")
        if not -1.0 < nu < 0.5:
            raise ValueError(f"nu must lie in (-1, 0.5), got {nu}")
        return cls(lam=E * nu / ((1 + nu) * (1 - 2 * nu)), mu=E / (2 * (1 + nu)))


@dataclass(frozen=True)
class KinematicState:
    F: np.ndarray
    J: np.ndarray
    C: np.ndarray


def deformation_gradient(grad_u) -> np.ndarray:
    grad_u = np.asarray(grad_u, dtype=float)
    return grad_u + np.eye(2)


def det2(F) -> np.ndarray:
    F = np.asarray(F)
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def inv_transpose(F) -> np.ndarray:
    """F^-T via the adjugate."""
    F = np.asarray(F, dtype=float)
    J = det2(F)
    G = np.empty_like(F)
    G[..., 0, 0] = F[..., 1, 1]
    G[..., 0, 1] = -F[..., 1, 0]
    G[..., 1, 0] = -F[..., 0, 1]
    G[..., 1, 1] = F[..., 0, 0]
    return G / J[..., None, None]


def kinematics(F, j_min: float = J_MIN) -> KinematicState:
    F = np.asarray(F, dtype=float)
    J = det2(F)
    bad = ~(J > j_min)
    if np.any(bad):
        raise NonPositiveJacobian(
            f"det F <= {j_min:g} at {int(np.sum(bad))} location(s) (min {np.min(J):.3e})", mask=bad
        )
    C = np.swapaxes(F, -1, -2) @ F
    return KinematicState(F=F, J=J, C=C)


def _check(state: KinematicState):
    if np.any(~(state.J > 0)):
        raise NonPositiveJacobian("kinematic state has J <= 0")


def strain_energy(state: KinematicState, mat: MaterialParams) -> np.ndarray:
    _check(state)
    J = state.J
    trC = np.trace(state.C, axis1=-2, axis2=-1)
    lnJ = np.log(J)
    return 0.25 * mat.lam * (J * J - 1.0 - 2.0 * lnJ) + 0.5 * mat.mu * (trC - 2.0 - 2.0 * lnJ)


def first_pk_stress(state: KinematicState, mat: MaterialParams) -> np.ndarray:
    _check(state)
    G = inv_transpose(state.F)
    J = state.J[..., None, None]
    return mat.mu * (state.F - G) + 0.5 * mat.lam * (J * J - 1.0) * G


def pk_stress_tangent(state: KinematicState, mat: MaterialParams) -> np.ndarray:
    """dP_iJ / dF_kL as an array of shape (..., 2, 2, 2, 2)."""
    _check(state)
    G = inv_transpose(state.F)
    J2 = (state.J * state.J)[..., None, None, None, None]
    eye = np.eye(2)
    # A = mu d_ik d_JL + (mu - lam/2 (J^2-1)) G_iL G_kJ + lam J^2 G_iJ G_kL
    A = mat.mu * np.einsum("ik,JL->iJkL", eye, eye)
    A = A + (mat.mu - 0.5 * mat.lam * (J2 - 1.0)) * np.einsum("...iL,...kJ->...iJkL", G, G)
    A = A + mat.lam * J2 * np.einsum("...iJ,...kL->...iJkL", G, G)
    return A


# ---------------------------------------------------------------------------
# component kernels (arrays or tape variables)


def energy_components(F11, F12, F21, F22, lam, mu):
    J = F11 * F22 - F12 * F21
    lnJ = ad.log(J)
    trC = F11 * F11 + F12 * F12 + F21 * F21 + F22 * F22
    return 0.25 * lam * (J * J - 1.0 - 2.0 * lnJ) + 0.5 * mu * (trC - 2.0 - 2.0 * lnJ)


def stress_components(F11, F12, F21, F22, lam, mu):
    """(P11, P12, P21, P22) of the closed-form stress."""
    J = F11 * F22 - F12 * F21
    invJ = 1.0 / J
    G11, G12, G21, G22 = F22 * invJ, -F21 * invJ, -F12 * invJ, F11 * invJ
    c = 0.5 * lam * (J * J - 1.0)
    return (
        mu * (F11 - G11) + c * G11,
        mu * (F12 - G12) + c * G12,
        mu * (F21 - G21) + c * G21,
        mu * (F22 - G22) + c * G22,
    )


def stress_directional_components(F, dF, lam, mu):
    """Directional derivative A : dF of the stress, component-wise.

    ``F`` and ``dF`` are 4-tuples (11, 12, 21, 22). Uses
    dG = -G dF^T G and dJ = J (G : dF).
    """
    F11, F12, F21, F22 = F
    d11, d12, d21, d22 = dF
    J = F11 * F22 - F12 * F21
    invJ = 1.0 / J
    G11, G12, G21, G22 = F22 * invJ, -F21 * invJ, -F12 * invJ, F11 * invJ
    GdF = G11 * d11 + G12 * d12 + G21 * d21 + G22 * d22
    # M = dF^T G ; dG = -G M
    M11 = d11 * G11 + d21 * G21
    M12 = d11 * G12 + d21 * G22
    M21 = d12 * G11 + d22 * G21
    M22 = d12 * G12 + d22 * G22
    dG11 = -(G11 * M11 + G12 * M21)
    dG12 = -(G11 * M12 + G12 * M22)
    dG21 = -(G21 * M11 + G22 * M21)
    dG22 = -(G21 * M12 + G22 * M22)
    c = 0.5 * lam * (J * J - 1.0)
    e = lam * J * J * GdF
    return (
        mu * (d11 - dG11) + e * G11 + c * dG11,
        mu * (d12 - dG12) + e * G12 + c * dG12,
        mu * (d21 - dG21) + e * G21 + c * dG21,
        mu * (d22 - dG22) + e * G22 + c * dG22,
    )
