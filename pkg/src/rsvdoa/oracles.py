"""Slow, independent reference computations used to cross-check the fast paths."""
from __future__ import annotations

import numpy as np


def naive_dft(x: np.ndarray) -> np.ndarray:
    """Direct double sum ``X_m(w) = sum_l x_m(l) exp(-2j pi w l / L)``, 1-based."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    L = x.shape[1]
    w = np.arange(1, L + 1)
    kernel = np.exp(-2j * np.pi * np.outer(w, w) / L)   # [l, w], symmetric
    return x @ kernel


def tone_dft(bin0: int, L: int) -> np.ndarray:
    """Closed-form DFT of ``exp(2j pi bin0 l / L)``: ``L`` at ``bin0``, zero elsewhere."""
    out = np.zeros(L, dtype=complex)
    out[bin0 - 1] = L
    return out


def lasso_coordinate_descent(A: np.ndarray, y: np.ndarray, mu: float,
                             tol: float = 1e-10, max_sweeps: int = 200000) -> np.ndarray:
    """Cyclic coordinate descent for ``min ||y - A s||^2 + mu ||s||_1``.

    Each coordinate is minimised exactly: with ``v = a_j^H r_j / ||a_j||^2``
    the update is ``soft(v, mu / (2 ||a_j||^2))``.  Sweeps stop once the
    largest coordinate change falls below ``tol`` times the largest entry.
    """
    A = np.asarray(A, dtype=complex)
    y = np.asarray(y, dtype=complex)
    N = A.shape[1]
    s = np.zeros(N, dtype=complex)
    r = y.copy()
    norms = np.sum(np.abs(A) ** 2, axis=0)
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(N):
            a = A[:, j]
            v = s[j] + np.vdot(a, r) / norms[j]
            mag = abs(v)
            kappa = mu / (2 * norms[j])
            new = (mag - kappa) / mag * v if mag > kappa else 0j
            step = new - s[j]
            if step != 0:
                r -= a * step
                s[j] = new
                delta = max(delta, abs(step))
        if delta <= tol * max(1.0, np.max(np.abs(s))):
            break
    return s


def single_atom_match(A: np.ndarray, y: np.ndarray) -> int:
    """Index of the column with the largest normalised correlation to ``y``."""
    A = np.asarray(A, dtype=complex)
    corr = np.abs(A.conj().T @ y) / np.linalg.norm(A, axis=0)
    return int(np.argmax(corr))
