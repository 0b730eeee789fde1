#!/usr/bin/env python3
"""
Transmutation Toolkit - Benchmark Harness
Build and evaluation timings, omega-uniform accuracy and eigenvalue error curves against shooting
"""

import math
import time
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from formal_powers import formal_powers_for
from goursat_oracle import constant_potential_solution
from kernel_legendre import build_beta, solve_u_nsbf
from numerics import Grid, PotentialSpec, ode_oracle
from shooting_baseline import oracle_omega_near, rk4_dirichlet_omegas
from spectral import SpectralProblem, build_spectral_kernel, find_eigenvalues

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-12


def reference_solution(q: PotentialSpec, omegas: Sequence[float], xs: np.ndarray) -> np.ndarray:
    """u(omega, x) from the closed form for constant q, otherwise from ode_oracle"""
    out = np.empty((len(omegas), xs.size), dtype=complex)
    for i, w in enumerate(omegas):
        for j, x in enumerate(xs):
            if q.is_constant:
                out[i, j] = constant_potential_solution(q.scalar(0.0), w, float(x))
            else:
                out[i, j] = ode_oracle(q, w, float(x), tol=ORACLE_TOL).u
    return out


def _best_time(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def accuracy_table(
    q: PotentialSpec,
    b: float,
    M: int,
    orders: Sequence[int],
    omegas: Sequence[float],
    x_points: int = 11,
    repeats: int = 3,
) -> pd.DataFrame:
    """Rows (N, omega, build_seconds, eval_seconds, max_error) for the Legendre NSBF"""
    xs = np.linspace(0.0, b, x_points)
    reference = reference_solution(q, omegas, xs)
    grid = Grid.symmetric(b, M).with_breaks(q.breakpoints)

    rows: List[Dict[str, Any]] = []
    for N in orders:
        started = time.perf_counter()
        powers = formal_powers_for(q, grid, K_max=N)
        kern = build_beta(powers, N)
        build_seconds = time.perf_counter() - started
        for i, w in enumerate(omegas):
            u = solve_u_nsbf(kern, w, xs)
            rows.append({
                "N": N,
                "omega": w,
                "build_seconds": build_seconds,
                "eval_seconds": _best_time(lambda: solve_u_nsbf(kern, w, xs), repeats),
                "max_error": float(np.max(np.abs(u - reference[i]))),
            })
        logger.info(f"Benchmarked N={N}: build {build_seconds:.2f}s")
    return pd.DataFrame(rows)


def build_scaling_table(q: PotentialSpec, b: float, grid_sizes: Sequence[int], N: int,
                        repeats: int = 3) -> pd.DataFrame:
    """Rows (M, build_seconds): seed, formal powers and beta per grid size, best of ``repeats``"""
    rows = []
    for M in grid_sizes:
        grid = Grid.symmetric(b, M).with_breaks(q.breakpoints)
        seconds = _best_time(lambda: build_beta(formal_powers_for(q, grid, K_max=N), N), repeats)
        rows.append({"M": M, "build_seconds": seconds})
        logger.info(f"Build at M={M}: {seconds:.2f}s")
    return pd.DataFrame(rows)


def exact_dirichlet_omega(q: PotentialSpec, b: float, n: int) -> float:
    """sqrt((n pi/b)^2 + c) for q = c"""
    return math.sqrt((n * math.pi / b) ** 2 + q.scalar(0.0).real)


def eigen_table(
    q: PotentialSpec,
    b: float,
    M: int,
    N: int,
    indices: Sequence[int],
    shooting_steps: int = 400,
) -> pd.DataFrame:
    """Rows (n, omega_reference, nsbf_error, shooting_error) for Dirichlet problems on [0, b]"""
    top = max(indices)
    problem = SpectralProblem(q=q, b=b, kappa_max=0.0)
    kern = build_spectral_kernel(problem, M=M, N=N)
    nsbf = [p.omega.real for p in find_eigenvalues(problem, kern, count=top, certify=False)]
    shooting = rk4_dirichlet_omegas(q, b, top, steps=shooting_steps)

    rows = []
    for n in indices:
        if q.is_constant:
            reference = exact_dirichlet_omega(q, b, n)
        else:
            reference = oracle_omega_near(q, b, nsbf[n - 1])
        rows.append({
            "n": n,
            "omega_reference": reference,
            "nsbf_error": abs(nsbf[n - 1] - reference),
            "shooting_error": abs(shooting[n - 1] - reference),
        })
    return pd.DataFrame(rows)


def summarize(accuracy: pd.DataFrame, eigen: pd.DataFrame,
              scaling: Optional[pd.DataFrame] = None) -> List[str]:
    lines = ["Legendre NSBF accuracy (max error over x):"]
    for N, block in accuracy.groupby("N"):
        errors = ", ".join(f"w={w:g}: {e:.2e}" for w, e in zip(block["omega"], block["max_error"]))
        lines.append(f"  N={N:>3}  build {block['build_seconds'].iloc[0]:.2f}s  {errors}")
    if scaling is not None and len(scaling):
        timings = ", ".join(f"M={m}: {s:.2f}s" for m, s in zip(scaling["M"], scaling["build_seconds"]))
        lines.append(f"Build time by grid size: {timings}")
    lines.append("Dirichlet eigenvalue errors (NSBF vs fixed-step RK4 shooting):")
    for row in eigen.itertuples():
        lines.append(f"  n={row.n:>3}  NSBF {row.nsbf_error:.2e}  shooting {row.shooting_error:.2e}")
    return lines
