"""Dense complex linear algebra for few-qubit states.

Construction and validation of density matrices, Pauli expectation
coordinates, Hermitian observables, partial trace/transpose, fidelity and
trace distance, matrix inverse square roots, and seeded random ensembles.

Qubit ordering is big-endian throughout: the leftmost label in a ket is the
most significant index, so |ab> sits at index 2*a + b for two qubits.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, SingularReducedStateError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-9
EIG_FLOOR_DEFAULT = 1e-8

# Single-qubit Pauli matrices, indexed 0..3 = I, X, Y, Z.
SIGMA = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

PAULI_LABELS = "IXYZ"

# The 15 non-identity two-qubit Pauli products, row-major in (i, j) != (0, 0).
TWO_QUBIT_PAULI_LABELS = tuple(
    a + b for a, b in itertools.product(PAULI_LABELS, repeat=2) if a + b != "II"
)
TWO_QUBIT_PAULIS = tuple(
    np.kron(SIGMA[PAULI_LABELS.index(lbl[0])], SIGMA[PAULI_LABELS.index(lbl[1])])
    for lbl in TWO_QUBIT_PAULI_LABELS
)
_PAULI_STACK = np.stack(TWO_QUBIT_PAULIS)  # shape (15, 4, 4)


def _as_matrix(obj):
    """Return the underlying ndarray of a DensityMatrix/Observable/ndarray."""
    mat = getattr(obj, "mat", obj)
    return np.asarray(mat, dtype=complex)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite complex matrix.

    Eigenvalues in [-PSD_TOL, 0) are clamped to zero on construction (the
    matrix is then renormalized to unit trace); anything more negative is
    rejected. Instances are immutable and safe to share between tasks.
    """

    mat: np.ndarray

    def __init__(self, mat):
        mat = np.asarray(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError("square matrix", mat.shape)
        herm_dev = np.max(np.abs(mat - mat.conj().T))
        if herm_dev > HERMITICITY_TOL:
            raise ValueError(f"not Hermitian: max deviation {herm_dev:.3e}")
        mat = (mat + mat.conj().T) / 2
        tr = mat.trace().real
        if abs(tr - 1) > TRACE_TOL:
            raise ValueError(f"trace is {tr!r}, not 1")
        w = np.linalg.eigvalsh(mat)
        if w[0] < -PSD_TOL:
            raise ValueError(f"not positive semidefinite: min eigenvalue {w[0]:.3e}")
        if w[0] < 0:
            w_full, v = np.linalg.eigh(mat)
            w_full = np.clip(w_full, 0, None)
            mat = (v * w_full) @ v.conj().T
            mat /= mat.trace().real
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def num_qubits(self) -> int:
        n = self.dim.bit_length() - 1
        if 2**n != self.dim:
            raise ValueError(f"dimension {self.dim} is not a power of two")
        return n

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))

    def to_pauli(self) -> "PauliVector":
        if self.dim != 4:
            raise DimensionMismatchError(4, self.dim, "Pauli coordinates")
        return PauliVector(pauli_coefficients(self.mat))

    @classmethod
    def from_pauli(cls, pv: "PauliVector") -> "DensityMatrix":
        return cls(matrix_from_pauli(pv.coeffs))

    @classmethod
    def from_pure(cls, ket) -> "DensityMatrix":
        ket = np.asarray(ket, dtype=complex).ravel()
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "re": self.mat.real.ravel().tolist(),
            "im": self.mat.imag.ravel().tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DensityMatrix":
        d = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
        if re.size != d * d or im.size != d * d:
            raise DimensionMismatchError(d * d, (re.size, im.size), "JSON arrays")
        return cls((re + 1j * im).reshape(d, d))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class Observable:
    """Hermitian matrix; expectation values are tr(O rho)."""

    mat: np.ndarray

    def __init__(self, mat):
        mat = np.asarray(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError("square matrix", mat.shape)
        dev = np.max(np.abs(mat - mat.conj().T))
        if dev > HERMITICITY_TOL:
            raise ValueError(f"not Hermitian: max deviation {dev:.3e}")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def expectation(self, rho) -> float:
        return float(np.real(np.trace(self.mat @ _as_matrix(rho))))

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "re": self.mat.real.ravel().tolist(),
            "im": self.mat.imag.ravel().tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Observable":
        d = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
        return cls((re + 1j * im).reshape(d, d))


@dataclass(frozen=True)
class PauliVector:
    """The 15 expectations tr(sigma_i x sigma_j rho), (i, j) != (0, 0), row-major."""

    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(15))

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (15,):
            raise DimensionMismatchError((15,), coeffs.shape, "Pauli coefficients")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)


def pauli_coefficients(mat) -> np.ndarray:
    """15 real coefficients tr(P_k mat) for the non-identity Pauli products."""
    mat = _as_matrix(mat)
    return np.real(np.einsum("kij,ji->k", _PAULI_STACK, mat))


def matrix_from_pauli(coeffs) -> np.ndarray:
    """Unique two-qubit matrix with unit trace and the given Pauli expectations."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.eye(4, dtype=complex) / 4 + np.einsum("k,kij->ij", coeffs, _PAULI_STACK) / 4


def _ptrace(mat, keep: str) -> np.ndarray:
    """Partial trace of a 4x4 matrix over one qubit; keep is 'A' (left) or 'B'."""
    t = mat.reshape(2, 2, 2, 2)
    if keep == "A":
        return np.trace(t, axis1=1, axis2=3)
    if keep == "B":
        return np.trace(t, axis1=0, axis2=2)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def _ptranspose(mat, side: str) -> np.ndarray:
    """Partial transpose of a 4x4 matrix on one qubit."""
    t = mat.reshape(2, 2, 2, 2)
    if side == "A":
        return t.transpose(2, 1, 0, 3).reshape(4, 4)
    if side == "B":
        return t.transpose(0, 3, 2, 1).reshape(4, 4)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def partial_trace(rho: DensityMatrix, keep: str) -> DensityMatrix:
    """Reduced state of one qubit of a two-qubit state."""
    mat = _as_matrix(rho)
    if mat.shape != (4, 4):
        raise DimensionMismatchError((4, 4), mat.shape, "partial_trace")
    return DensityMatrix(_ptrace(mat, keep))


def partial_transpose(rho, side: str = "A") -> Observable:
    """Partial transpose of a two-qubit state; generally not PSD, so an Observable."""
    mat = _as_matrix(rho)
    if mat.shape != (4, 4):
        raise DimensionMismatchError((4, 4), mat.shape, "partial_transpose")
    return Observable(_ptranspose(mat, side))


def sqrtm_psd(mat, clip: float = 0.0) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix via eigendecomposition."""
    mat = _as_matrix(mat)
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, clip, None)
    return (v * np.sqrt(w)) @ v.conj().T


def inv_sqrt(pos, floor: float = EIG_FLOOR_DEFAULT) -> np.ndarray:
    """Inverse square root of twice the input: (2*pos)**(-1/2).

    This is the normal form of the flattening filter for a single-qubit
    marginal: applying the result F to a state with marginal ``pos`` gives
    F pos F* = I/2. Raises SingularReducedStateError when any eigenvalue of
    ``pos`` is at or below ``floor``.
    """
    mat = _as_matrix(pos)
    w, v = np.linalg.eigh(mat)
    if w[0] <= floor:
        raise SingularReducedStateError(
            f"eigenvalue {w[0]:.3e} at or below floor {floor:.1e}; "
            "inverse-square-root filter undefined"
        )
    return (v / np.sqrt(2 * w)) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))**2, in [0, 1].

    For commuting inputs this reduces to the squared Bhattacharyya overlap
    of the spectra.
    """
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatchError(a.shape, b.shape, "fidelity")
    for m in (a, b):
        wmin = np.linalg.eigvalsh(m)[0]
        if wmin < -PSD_TOL:
            raise ValueError(f"fidelity input not PSD: min eigenvalue {wmin:.3e}")
    sa = sqrtm_psd(a)
    inner = sa @ b @ sa
    w = np.linalg.eigvalsh(inner)
    val = float(np.sum(np.sqrt(np.clip(w, 0, None))) ** 2)
    return min(max(val, 0.0), 1.0)


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of the difference."""
    diff = _as_matrix(rho) - _as_matrix(sigma)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_density_matrix(dim: int, rank: int, seed) -> DensityMatrix:
    """Random state: normalized G G* with G a dim x rank complex Gaussian matrix.

    Full-rank draws follow the Hilbert-Schmidt-induced measure; rank 1 gives
    Haar-random pure states. Deterministic for a fixed integer seed.
    """
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must be in [1, {dim}], got {rank}")
    rng = _rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    mat = g @ g.conj().T
    return DensityMatrix(mat / mat.trace().real)


def random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    rng = _rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def make_pps(epsilon: float, pure: DensityMatrix) -> DensityMatrix:
    """Pseudo-pure state (1 - eps)/dim * I + eps * pure."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if abs(pure.purity() - 1) > 1e-10:
        raise ValueError(f"pure input has purity {pure.purity()}, expected 1")
    d = pure.dim
    return DensityMatrix((1 - epsilon) / d * np.eye(d) + epsilon * pure.mat)
