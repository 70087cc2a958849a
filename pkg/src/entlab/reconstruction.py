"""State reconstruction from filter-protocol transcripts.

The transcript's filters are taken as fixed, known operators; a candidate
state is scored by how well replaying those filters on it reproduces the
recorded marginals (and optionally the recorded success probabilities).
Multi-start local least squares over a Cholesky-type parametrization then
recovers the feasible set: a spread-out ensemble while the constraints are
insufficient, and a single point once they determine the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import ReconstructionError
from .filters import ProtocolTranscript, _embed, _other, _ptrace
from .states import (
    DensityMatrix,
    PauliVector,
    _as_matrix,
    matrix_from_pauli,
    pauli_coefficients,
    trace_distance,
)

FEASIBILITY_TOL = 1e-8
RANK_RTOL = 1e-7
_EARLY_STOP = 1e-15


def _bloch(m) -> np.ndarray:
    return np.array(
        [2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real]
    )


class _TranscriptConstraints:
    """Precompiled transcript data for fast residual evaluation."""

    def __init__(self, transcript: ProtocolTranscript, prefix: int, use_success_probs: bool):
        if not 0 <= prefix <= len(transcript):
            raise ValueError(
                f"prefix {prefix} out of range for transcript of length {len(transcript)}"
            )
        self.prefix = prefix
        self.use_success_probs = use_success_probs
        self.initial_blochs = [
            _bloch(_as_matrix(m)) for m in transcript.initial_marginals
        ]
        self.steps = []
        for step in transcript.steps[:prefix]:
            self.steps.append(
                (
                    _embed(step.filter.kraus, step.side),
                    _other(step.side),
                    _bloch(_as_matrix(step.measured_marginal)),
                    step.success_prob,
                )
            )
        self.size = 6 + 3 * prefix + (prefix if use_success_probs else 0)

    def residual_vector(self, mat) -> np.ndarray:
        out = np.empty(self.size)
        out[0:3] = _bloch(_ptrace(mat, "A")) - self.initial_blochs[0]
        out[3:6] = _bloch(_ptrace(mat, "B")) - self.initial_blochs[1]
        pos = 6
        state = mat
        for k_full, measured_side, rec_bloch, rec_prob in self.steps:
            post = k_full @ state @ k_full.conj().T
            p = post.trace().real
            if p <= 1e-10:
                out[pos:] = np.inf
                return out
            state = post / p
            out[pos : pos + 3] = _bloch(_ptrace(state, measured_side)) - rec_bloch
            pos += 3
            if self.use_success_probs:
                out[pos] = p - rec_prob
                pos += 1
        return out


def constraint_residual(
    candidate,
    transcript: ProtocolTranscript,
    prefix: int,
    use_success_probs: bool = True,
) -> float:
    """Sum of squared deviations from the recorded transcript data.

    Covers the two initial marginals plus the first ``prefix`` recorded
    post-filter marginals; infeasible candidates (zero success probability
    somewhere along the replay) score +inf.
    """
    cons = _TranscriptConstraints(transcript, prefix, use_success_probs)
    vec = cons.residual_vector(_as_matrix(candidate))
    if not np.all(np.isfinite(vec)):
        return float("inf")
    return float(vec @ vec)


def _params_to_matrix(params) -> np.ndarray:
    """Cholesky-type map: 16 reals -> PSD unit-trace 4x4 matrix."""
    t = np.zeros((4, 4), dtype=complex)
    idx = np.tril_indices(4, -1)
    t[np.diag_indices(4)] = params[:4]
    t[idx] = params[4:10] + 1j * params[10:16]
    m = t @ t.conj().T
    tr = m.trace().real
    if tr <= 1e-300:
        return np.eye(4, dtype=complex) / 4
    return m / tr


def _matrix_to_params(mat) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 1e-12, None)
    try:
        t = np.linalg.cholesky((v * w) @ v.conj().T)
    except np.linalg.LinAlgError:
        t = (v * np.sqrt(w)) @ v.conj().T  # Hermitian root as fallback
    idx = np.tril_indices(4, -1)
    return np.concatenate(
        [t.diagonal().real, t[idx].real, t[idx].imag]
    )


@dataclass(frozen=True)
class FeasibleEnsemble:
    """Candidates consistent with a transcript prefix.

    ``low_yield`` flags runs where fewer than a tenth of the restarts
    reached feasibility; the ensemble is still returned.
    """

    candidates: tuple
    residuals: np.ndarray
    prefix_length: int
    attempted: int
    low_yield: bool

    def __len__(self) -> int:
        return len(self.candidates)


def _minimize_once(cons: _TranscriptConstraints, start: np.ndarray):
    res = scipy.optimize.least_squares(
        lambda p: cons.residual_vector(_params_to_matrix(p)),
        start,
        method="trf",
        max_nfev=4000,
    )
    return _params_to_matrix(res.x), float(2 * res.cost)


def feasible_states(
    transcript: ProtocolTranscript,
    prefix: int,
    n: int,
    seed,
    use_success_probs: bool = True,
    feasibility_tol: float = FEASIBILITY_TOL,
) -> FeasibleEnsemble:
    """Sample the feasible set by n independent local optimizations.

    Each restart minimizes the transcript residual from a random start and
    is kept when it lands below ``feasibility_tol``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cons = _TranscriptConstraints(transcript, prefix, use_success_probs)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
    candidates, residuals = [], []
    for rng in rngs:
        start = 0.5 * rng.standard_normal(16)
        mat, resid = _minimize_once(cons, start)
        if resid <= feasibility_tol:
            candidates.append(DensityMatrix(mat))
            residuals.append(resid)
    return FeasibleEnsemble(
        candidates=tuple(candidates),
        residuals=np.asarray(residuals),
        prefix_length=prefix,
        attempted=n,
        low_yield=len(candidates) < n / 10,
    )


@dataclass(frozen=True)
class MleResult:
    """Best reconstruction over multi-start optimization.

    ``degenerate`` is set when several optima tie at the best residual yet
    disagree as states, i.e. the transcript does not determine the input.
    """

    state: DensityMatrix
    residual: float
    degenerate: bool
    optima_spread: float
    restarts_used: int


def mle_reconstruct(
    transcript: ProtocolTranscript,
    restarts: int = 32,
    seed=0,
    use_success_probs: bool = True,
) -> MleResult:
    """Reconstruct the protocol input state from its transcript.

    Runs least-squares from ``restarts`` random starts (stopping early once
    a run hits numerical zero) and returns the best candidate. Raises
    ReconstructionError when no restart produces a finite residual.
    """
    if len(transcript) < 5:
        raise ValueError(
            f"transcript has {len(transcript)} steps; at least 5 are required"
        )
    cons = _TranscriptConstraints(transcript, len(transcript), use_success_probs)
    rngs = [
        np.random.default_rng(s)
        for s in np.random.SeedSequence(seed).spawn(restarts)
    ]
    results = []
    used = 0
    for i, rng in enumerate(rngs):
        if i == 0:
            start = _matrix_to_params(np.eye(4) / 4)
        else:
            start = 0.5 * rng.standard_normal(16)
        mat, resid = _minimize_once(cons, start)
        used += 1
        if np.isfinite(resid):
            results.append((resid, mat))
        if resid <= _EARLY_STOP:
            break
    if not results:
        raise ReconstructionError("no restart reached a finite residual")
    results.sort(key=lambda t: t[0])
    best_resid, best_mat = results[0]
    near = [m for r, m in results if r <= best_resid + max(1e-10, 0.01 * best_resid)]
    spread = 0.0
    for i in range(len(near)):
        for j in range(i + 1, len(near)):
            spread = max(spread, trace_distance(near[i], near[j]))
    return MleResult(
        state=DensityMatrix(best_mat),
        residual=best_resid,
        degenerate=spread > 1e-3,
        optima_spread=spread,
        restarts_used=used,
    )


@dataclass(frozen=True)
class DofReport:
    """Remaining degrees of freedom after a transcript prefix.

    dof = 15 - rank of the Jacobian of the constraint map (Pauli
    coordinates -> stacked marginal Bloch components) at the given state.
    """

    m: int
    constraint_count: int
    dof: int
    singular_values: np.ndarray


def dof_analysis(
    transcript: ProtocolTranscript, rho0: DensityMatrix, prefix: int
) -> DofReport:
    """Numerical rank of the transcript constraints around rho0."""
    cons = _TranscriptConstraints(transcript, prefix, use_success_probs=False)
    c0 = pauli_coefficients(_as_matrix(rho0))
    h = 1e-6
    jac = np.empty((cons.size, 15))
    for k in range(15):
        cp, cm = c0.copy(), c0.copy()
        cp[k] += h
        cm[k] -= h
        fp = cons.residual_vector(matrix_from_pauli(cp))
        fm = cons.residual_vector(matrix_from_pauli(cm))
        jac[:, k] = (fp - fm) / (2 * h)
    sv = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    return DofReport(
        m=prefix,
        constraint_count=cons.size,
        dof=15 - rank,
        singular_values=sv,
    )


def linear_inversion_tomography(expectations: PauliVector) -> DensityMatrix:
    """Invert Pauli expectations, then project onto the PSD unit-trace set.

    The raw inversion is exact; noisy inputs are repaired by clipping
    negative eigenvalues (nearest PSD matrix in Frobenius norm) and
    restoring the unit trace.
    """
    raw = matrix_from_pauli(expectations.coeffs)
    w, v = np.linalg.eigh(raw)
    w = np.clip(w, 0, None)
    mat = (v * w) @ v.conj().T
    return DensityMatrix(mat / mat.trace().real)
