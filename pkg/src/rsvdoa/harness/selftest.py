"""Oracle-equivalence checks runnable outside pytest (``rsvdoa selftest``)."""
from __future__ import annotations

import time

import numpy as np

from ..frequency import dft_all_antennas
from ..oracles import lasso_coordinate_descent, naive_dft
from ..sparse import LassoProblem, solve_l1


def random_lasso(rng: np.random.Generator, max_m: int = 6, max_n: int = 32) -> LassoProblem:
    """Random complex instance with ``mu`` inside the nontrivial range."""
    M = int(rng.integers(2, max_m + 1))
    N = int(rng.integers(M, max_n + 1))
    A = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    y = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    mu = rng.uniform(0.01, 0.9) * float(np.max(np.abs(A.conj().T @ y)))
    return LassoProblem(A, y, mu)


def solver_gap(problem: LassoProblem) -> float:
    """Relative objective gap of the ADMM solver against coordinate descent."""
    ref = problem.objective(lasso_coordinate_descent(problem.dictionary,
                                                     problem.measurement, problem.mu))
    return abs(solve_l1(problem).objective - ref) / ref


def linearity_error(rng: np.random.Generator, M: int, J: int, L: int) -> float:
    """Worst columnwise relative error of DFT(Bs + n) vs B DFT(s) + DFT(n)."""
    B = rng.standard_normal((M, J)) + 1j * rng.standard_normal((M, J))
    s = rng.standard_normal((J, L)) + 1j * rng.standard_normal((J, L))
    n = rng.standard_normal((M, L)) + 1j * rng.standard_normal((M, L))
    lhs = dft_all_antennas(B @ s + n).data
    rhs = B @ dft_all_antennas(s).data + dft_all_antennas(n).data
    return float(np.max(np.linalg.norm(lhs - rhs, axis=0) / np.linalg.norm(rhs, axis=0)))


def run_selftest(seed: int = 0, instances: int = 100, verbose: bool = False) -> bool:
    rng = np.random.default_rng(seed)
    checks = []

    t0 = time.perf_counter()
    gaps = [solver_gap(random_lasso(rng)) for _ in range(instances)]
    checks.append(("solver vs coordinate descent", max(gaps), 1e-6,
                   time.perf_counter() - t0))

    t0 = time.perf_counter()
    errs = []
    for _ in range(instances):
        M, J = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        errs.append(linearity_error(rng, M, J, int(rng.choice([64, 128, 256]))))
    checks.append(("DFT linearity", max(errs), 1e-10, time.perf_counter() - t0))

    t0 = time.perf_counter()
    x = rng.standard_normal((4, 96)) + 1j * rng.standard_normal((4, 96))
    ref = naive_dft(x)
    err = np.max(np.abs(dft_all_antennas(x).data - ref)) / np.max(np.abs(ref))
    checks.append(("FFT vs direct DFT sum", float(err), 1e-12, time.perf_counter() - t0))

    ok = True
    for name, value, limit, secs in checks:
        passed = value < limit
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name:32s} {value:.3e} < {limit:.0e}"
                  f"  ({secs:.2f} s)")
    return ok
