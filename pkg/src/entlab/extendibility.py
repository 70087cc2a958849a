"""k-symmetric-extendibility predicates and counterexample constructions.

Werner states carry the exact extendibility threshold psi_minus >= -(d-1)/k.
The X-state family below produces pairs (rho, rho + Z x I) where rho is not
2-extendable but the shifted state is separable, so the two sit on opposite
sides of the 2-extendable set while agreeing on every observable orthogonal
to Z x I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entanglement import ppt_determinant
from .errors import ExtensionInequalityError
from .states import DensityMatrix, Observable, _as_matrix

#: Traceless shift direction used by the counterexample family.
Z_TENSOR_I = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)


def swap_operator(d: int) -> np.ndarray:
    """Exchange operator on C^d x C^d."""
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[d * i + j, d * j + i] = 1.0
    return s


def symmetric_projector(d: int) -> np.ndarray:
    return (np.eye(d * d) + swap_operator(d)) / 2


def antisymmetric_projector(d: int) -> np.ndarray:
    return (np.eye(d * d) - swap_operator(d)) / 2


@dataclass(frozen=True)
class WernerState:
    """U x U invariant two-qudit state parametrized by psi_minus in [-1, 1]."""

    psi_minus: float
    d: int = 2

    def __post_init__(self):
        if not -1 <= self.psi_minus <= 1:
            raise ValueError(f"psi_minus must be in [-1, 1], got {self.psi_minus}")
        if self.d < 2:
            raise ValueError(f"local dimension must be >= 2, got {self.d}")

    def to_density_matrix(self) -> DensityMatrix:
        d = self.d
        p_sym = symmetric_projector(d)
        p_anti = antisymmetric_projector(d)
        rho_plus = p_sym / (d * (d + 1) / 2)
        rho_minus = p_anti / (d * (d - 1) / 2)
        w = (1 + self.psi_minus) / 2 * rho_plus + (1 - self.psi_minus) / 2 * rho_minus
        return DensityMatrix(w)


def werner_project(rho, d: int = 2) -> WernerState:
    """Exact U x U twirl: the Werner state with matched symmetric weight."""
    p_plus = float(np.real(np.trace(symmetric_projector(d) @ _as_matrix(rho))))
    return WernerState(psi_minus=2 * p_plus - 1, d=d)


def werner_k_extendable(psi_minus: float, d: int, k: int) -> bool:
    """Werner-state k-extendibility threshold: psi_minus >= -(d-1)/k."""
    if d < 2:
        raise ValueError(f"local dimension must be >= 2, got {d}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return psi_minus >= -(d - 1) / k


@dataclass(frozen=True)
class XStateParams:
    """Nonnegative diagonal weights of the X-shaped family.

    The unnormalized matrix has diagonal (x, y, z, w) and anti-diagonal
    entries sqrt(x*w) and sqrt(y*z), which saturate the 2x2 minors, so the
    matrix is PSD for any nonnegative parameters.
    """

    x: float
    y: float
    z: float
    w: float

    def __post_init__(self):
        if min(self.x, self.y, self.z, self.w) < 0:
            raise ValueError("X-state parameters must be nonnegative")
        if self.x + self.y + self.z + self.w <= 0:
            raise ValueError("X-state parameters must not all vanish")

    def unnormalized(self) -> np.ndarray:
        x, y, z, w = self.x, self.y, self.z, self.w
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0], m[1, 1], m[2, 2], m[3, 3] = x, y, z, w
        m[0, 3] = m[3, 0] = np.sqrt(x * w)
        m[1, 2] = m[2, 1] = np.sqrt(y * z)
        return m

    def trace(self) -> float:
        return self.x + self.y + self.z + self.w

    def to_density_matrix(self) -> DensityMatrix:
        return DensityMatrix(self.unnormalized() / self.trace())


def xstate_not_two_extendable(p: XStateParams) -> bool:
    """True iff the X-state admits no 2-symmetric extension: (x-y)(w-z) > 0."""
    return (p.x - p.y) * (p.w - p.z) > 0


@dataclass(frozen=True)
class ExtensionCounterexample:
    """An X-state that is not 2-extendable next to a separable shift of it.

    ``rho`` and ``rho_shifted`` are normalized by the common trace; their
    difference is proportional to the traceless ``direction`` Z x I, so both
    give identical expectations for every observable orthogonal to it.
    """

    rho: DensityMatrix
    rho_shifted: DensityMatrix
    direction: Observable
    params: XStateParams
    not_two_extendable_margin: float
    shifted_ppt_determinant: float
    inequality_slacks: dict


def build_extension_counterexample(y: float, epsilon: float) -> ExtensionCounterexample:
    """Instantiate the family x = y + eps, z = y + 2, w = y + 2 + eps.

    Checks the strict non-extendability condition (x-y)(w-z) > 0, the
    separability inequalities for the shifted matrix, and cross-checks the
    shifted state against the partial-transpose determinant oracle.
    """
    if y <= 0:
        raise ValueError(f"y must be positive, got {y}")
    if epsilon <= 0:
        raise ExtensionInequalityError(["(x-y)(w-z) > 0 requires epsilon > 0"])
    x, z, w = y + epsilon, y + 2, y + 2 + epsilon
    params = XStateParams(x=x, y=y, z=z, w=w)

    checks = {
        "(x+1)(w-1) >= x*w": (x + 1) * (w - 1) - x * w,
        "x*w >= y*z": x * w - y * z,
        "(y+1)(z-1) >= x*w": (y + 1) * (z - 1) - x * w,
    }
    failed = [name for name, slack in checks.items() if slack < 0]
    if failed:
        raise ExtensionInequalityError(failed)

    t = params.trace()
    rho_un = params.unnormalized()
    rho = DensityMatrix(rho_un / t)
    rho_shifted = DensityMatrix((rho_un + Z_TENSOR_I) / t)

    det_shifted = ppt_determinant(rho_shifted)
    if det_shifted < -1e-12:
        raise ExtensionInequalityError(
            [f"shifted state fails the PPT oracle: det {det_shifted:.3e}"]
        )
    return ExtensionCounterexample(
        rho=rho,
        rho_shifted=rho_shifted,
        direction=Observable(Z_TENSOR_I),
        params=params,
        not_two_extendable_margin=(x - y) * (w - z),
        shifted_ppt_determinant=det_shifted,
        inequality_slacks=checks,
    )
