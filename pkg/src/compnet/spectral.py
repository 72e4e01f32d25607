"""Augmented transition matrices for the inferred-strategy dynamics and
eigenvalue-based stability proxies.

``B_x = [[A1, A1 C12], [0, C2]]`` propagates the Team-1 strategy together
with Team 2's estimate of it; ``B_y`` is the mirror image. Both are
left-stochastic and, under a weak cross-team graph, have 1 as a simple
dominant eigenvalue with eigenvector ``[p_team; 0]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NumericalError, StabilityError, StructuralError
from .topology import CombinationMatrix, InferenceMatrix, PerronWeights, perron_weights


@dataclass(frozen=True)
class SpectralReport:
    perron_residual_bx: float
    perron_residual_by: float
    subdominant_bx: float
    subdominant_by: float
    rho_c2: float
    rho_c1: float

    def to_dict(self) -> dict:
        return asdict(self)


def _entries(M) -> np.ndarray:
    return M.entries if isinstance(M, CombinationMatrix) else np.asarray(M, dtype=float)


def _augment(A, C_cross, C_diag) -> np.ndarray:
    A, C_cross, C_diag = _entries(A), np.asarray(C_cross, float), np.asarray(C_diag, float)
    Kt, Ko = A.shape[0], C_diag.shape[0]
    if A.shape != (Kt, Kt) or C_cross.shape != (Kt, Ko) or C_diag.shape != (Ko, Ko):
        raise StructuralError(f"non-conforming blocks: A {A.shape}, cross {C_cross.shape}, diagonal {C_diag.shape}")
    return np.block([[A, A @ C_cross], [np.zeros((Ko, Kt)), C_diag]])


def build_bx(A1, C12, C2) -> np.ndarray:
    return _augment(A1, C12, C2)


def build_by(A2, C21, C1) -> np.ndarray:
    return _augment(A2, C21, C1)


def perron_property_check(B: np.ndarray, p_team: np.ndarray) -> float:
    """``||B [p; 0] - [p; 0]||_inf``."""
    B = np.asarray(B, dtype=float)
    v = np.zeros(B.shape[0])
    v[: len(p_team)] = p_team
    return float(np.max(np.abs(B @ v - v)))


def _moduli(B: np.ndarray) -> np.ndarray:
    try:
        vals = np.linalg.eigvals(np.asarray(B, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solver failed: {exc}") from exc
    return np.sort(np.abs(vals))[::-1]


def spectral_radius(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(_moduli(M)[0])


def subdominant_modulus(B: np.ndarray) -> float:
    """Second-largest eigenvalue modulus of a left-stochastic matrix.

    A value of 1 means the unit eigenvalue is not simple (or another
    eigenvalue sits on the unit circle).
    """
    mods = _moduli(B)
    if abs(mods[0] - 1.0) > 1e-10:
        raise StabilityError(f"largest eigenvalue modulus is {mods[0]!r}, expected 1")
    return float(mods[1]) if len(mods) > 1 else 0.0


def predict_transient(mu: float, lambda2: float) -> int:
    """Order-of-magnitude transient length ``ceil(log(mu^2) / log(lambda2))``.

    Only a proxy: the true contraction factor also carries ``O(mu^2)`` terms.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if lambda2 >= 1:
        raise StabilityError(f"subdominant modulus {lambda2} >= 1: no geometric transient")
    if lambda2 <= 0:
        raise ValueError("lambda2 must be positive")
    return max(0, math.ceil(math.log(mu * mu) / math.log(lambda2)))


def spectral_report(
    A1: CombinationMatrix, A2: CombinationMatrix, C: InferenceMatrix, weights: PerronWeights | None = None
) -> SpectralReport:
    p = weights or perron_weights(A1, A2)
    Bx = build_bx(A1, C.C12, C.C2)
    By = build_by(A2, C.C21, C.C1)
    return SpectralReport(
        perron_residual_bx=perron_property_check(Bx, p.p1),
        perron_residual_by=perron_property_check(By, p.p2),
        subdominant_bx=subdominant_modulus(Bx),
        subdominant_by=subdominant_modulus(By),
        rho_c2=spectral_radius(C.C2),
        rho_c1=spectral_radius(C.C1),
    )
