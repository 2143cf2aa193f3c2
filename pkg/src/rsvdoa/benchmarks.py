"""Covariance-domain DOA benchmarks: deterministic ML, optimal WSF and MUSIC.

All three take a sample covariance and a *steering model*, i.e. a mapping
from angles to array response vectors.  :class:`NominalSteering` is the
ideal ULA response; :class:`BasisSteering` looks up the nearest column of a
calibrated RSV basis ("with calibration knowledge").
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import ArrayConfig, SnapshotMatrix, steering_matrix
from .calibration import AngularGrid, RsvBasis
from .sparse import DoaEstimate, default_separation, top_indices

#: Candidate pairs whose Gram matrix condition number exceeds this are skipped.
COND_LIMIT = 1e8
#: Relative gap below which the J-th and (J+1)-th eigenvalues count as tied.
EIG_GAP = 1e-9


@dataclass(frozen=True)
class CovarianceEstimate:
    matrix: np.ndarray
    snapshots_used: int

    def eig(self):
        """Eigenvalues (descending) and matching eigenvectors."""
        w, V = np.linalg.eigh(self.matrix)
        return w[::-1], V[:, ::-1]


def sample_covariance(snapshots) -> CovarianceEstimate:
    X = snapshots.data if isinstance(snapshots, SnapshotMatrix) else np.asarray(snapshots)
    L = X.shape[1]
    if L < 1:
        raise ValueError("need at least one snapshot")
    R = X @ X.conj().T / L
    return CovarianceEstimate((R + R.conj().T) / 2, L)


class NominalSteering:
    """Ideal steering vectors of ``config`` (its error model is ignored)."""

    def __init__(self, config: ArrayConfig):
        self.config = config

    def __call__(self, angles) -> np.ndarray:
        return steering_matrix(self.config, np.clip(angles, -np.pi / 2, np.pi / 2))


class BasisSteering:
    """Nearest-column lookup into a normalised RSV basis."""

    def __init__(self, basis: RsvBasis):
        self.basis = basis
        self._grid = basis.grid.angles

    def __call__(self, angles) -> np.ndarray:
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        idx = np.abs(angles[:, None] - self._grid[None, :]).argmin(axis=1)
        return self.basis.matrix[:, idx]


def projector(B: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the column span of ``B``."""
    return B @ np.linalg.solve(B.conj().T @ B, B.conj().T)


def _pair_scores(T: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``trace(P_{[v_i, v_j]} T)`` for all candidate pairs (``-inf`` where skipped)."""
    Q = V.conj().T @ V
    C = V.conj().T @ T @ V
    d = np.real(np.diag(Q))
    c = np.diag(C)
    det = np.outer(d, d) - np.abs(Q) ** 2
    num = (d[None, :] * c[:, None] + d[:, None] * c[None, :]
           - Q * C.T - Q.T * C)
    tr = np.add.outer(d, d)
    disc = np.sqrt(np.maximum(tr ** 2 - 4 * det, 0.0))
    lo = (tr - disc) / 2
    ok = lo > (tr + disc) / 2 / COND_LIMIT
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(ok, np.real(num) / det, -np.inf)
    return score


def _single_scores(T: np.ndarray, V: np.ndarray) -> np.ndarray:
    num = np.real(np.einsum("mk,mn,nk->k", V.conj(), T, V))
    return num / np.real(np.sum(np.abs(V) ** 2, axis=0))


def _score(T, model, angles) -> float:
    """``trace(P_B(angles) T)`` for one candidate tuple."""
    V = model(angles)
    if V.shape[1] == 1:
        return float(_single_scores(T, V)[0])
    return float(_pair_scores(T, V)[0, 1])


def _grid_search(T, model, J, coarse_step, refine_step):
    """Maximise ``trace(P_B T)`` over J-tuples: coarse grid, then halving hill-climb."""
    if J not in (1, 2):
        raise ValueError("grid search supports J in {1, 2}")
    lim = 90.0 - 1e-9
    coarse = np.arange(-90.0 + coarse_step, 90.0, coarse_step)
    V = model(np.deg2rad(coarse))
    if J == 1:
        s = _single_scores(T, V)
        best = [coarse[int(np.argmax(s))]]
    else:
        s = _pair_scores(T, V)
        s[np.tril_indices_from(s)] = -np.inf
        if not np.isfinite(s).any():
            raise ValueError("every candidate pair is ill-conditioned")
        i, j = np.unravel_index(int(np.argmax(s)), s.shape)
        best = [coarse[i], coarse[j]]
    best = np.array(best)
    best_val = _score(T, model, np.deg2rad(best))
    h = coarse_step / 2
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * J, indexing="ij")).reshape(J, -1).T
    while h >= refine_step * (1 - 1e-12):
        moved = True
        while moved:
            moved = False
            for off in offsets:
                cand = np.clip(best + h * off, -lim, lim)
                if J == 2 and cand[0] >= cand[1]:
                    continue
                val = _score(T, model, np.deg2rad(cand))
                if val > best_val + 1e-12 * abs(best_val):
                    best, best_val, moved = cand, val, True
        h /= 2
    return np.sort(best), best_val


def ml_estimate(cov: CovarianceEstimate, model, J: int, coarse_step: float = 1.0,
                refine_step: float = 0.01) -> DoaEstimate:
    """Deterministic ML: maximise ``trace(P_B(theta) R)`` (angles in degrees)."""
    angles, val = _grid_search(cov.matrix, model, J, coarse_step, refine_step)
    rad = np.deg2rad(angles)
    return DoaEstimate(None, rad, np.full(J, np.nan), {"criterion": val})


def wsf_weighting(eigvals: np.ndarray, J: int):
    """Optimal WSF weights ``(lambda_s - sigma^2)^2 / lambda_s`` and ``sigma^2``."""
    lam_s = eigvals[:J]
    sigma2 = float(np.mean(eigvals[J:])) if eigvals.size > J else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(lam_s > 0, (lam_s - sigma2) ** 2 / lam_s, 0.0)
    return w, sigma2


def _degenerate(eigvals, J):
    if eigvals.size <= J:
        return False
    # relative to the largest eigenvalue, so two numerically-zero ones tie
    a, b = eigvals[J - 1], eigvals[J]
    return bool(abs(a - b) <= EIG_GAP * max(abs(eigvals[0]), np.finfo(float).tiny))


def wsf_estimate(cov: CovarianceEstimate, model, J: int, coarse_step: float = 1.0,
                 refine_step: float = 0.01) -> DoaEstimate:
    """Weighted subspace fitting with the optimal weighting.

    ``diagnostics["degenerate"]`` is set when the J-th and (J+1)-th
    eigenvalues tie; the estimate is then meaningless but still returned.
    """
    w, V = cov.eig()
    weights, sigma2 = wsf_weighting(w, J)
    Es = V[:, :J]
    T = (Es * weights) @ Es.conj().T
    angles, val = _grid_search(T, model, J, coarse_step, refine_step)
    return DoaEstimate(None, np.deg2rad(angles), np.full(J, np.nan),
                       {"criterion": val, "noise_power": sigma2,
                        "degenerate": _degenerate(w, J)})


def music_spectrum(cov: CovarianceEstimate, model, J: int, angles) -> np.ndarray:
    """MUSIC pseudospectrum ``||a||^2 / ||E_n^H a||^2`` at ``angles`` (radians)."""
    _, V = cov.eig()
    En = V[:, J:]
    A = model(angles)
    den = np.sum(np.abs(En.conj().T @ A) ** 2, axis=0)
    return np.sum(np.abs(A) ** 2, axis=0) / np.maximum(den, np.finfo(float).tiny)


def music_estimate(cov: CovarianceEstimate, model, J: int, grid: AngularGrid,
                   min_index_separation: int | None = None) -> DoaEstimate:
    if J >= cov.matrix.shape[0]:
        raise ValueError("MUSIC needs J < M")
    if min_index_separation is None:
        min_index_separation = default_separation(grid.N)
    p = music_spectrum(cov, model, J, grid.angles)
    # local maxima only, so the shoulder of a strong peak is never a second source
    padded = np.concatenate(([-np.inf], p, [-np.inf]))
    peaks = np.flatnonzero((p >= padded[:-2]) & (p >= padded[2:]))
    idx = np.array(sorted(top_indices(p, J, min_index_separation, candidates=peaks)))
    w, _ = cov.eig()
    return DoaEstimate(idx, grid.angles[idx], p[idx], {"degenerate": _degenerate(w, J)}, grid)


def ml_spectrum(cov: CovarianceEstimate, model, angles) -> np.ndarray:
    """Single-source ML criterion ``a^H R a / ||a||^2`` over ``angles``."""
    return _single_scores(cov.matrix, model(angles))


def wsf_spectrum(cov: CovarianceEstimate, model, J: int, angles) -> np.ndarray:
    """Inverse single-angle WSF cost ``1 / trace(P_a^perp E_s W E_s^H)``."""
    w, V = cov.eig()
    weights, _ = wsf_weighting(w, J)
    Es = V[:, :J]
    T = (Es * weights) @ Es.conj().T
    cost = np.real(np.trace(T)) - _single_scores(T, model(angles))
    return 1.0 / np.maximum(cost, np.finfo(float).tiny)
