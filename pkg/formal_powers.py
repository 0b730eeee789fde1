#!/usr/bin/env python3
"""
Transmutation Toolkit - Formal Powers
Seed solution f and the formal powers phi_k = T[x^k] tabulated on a grid
"""

import time
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from numerics import Grid, PotentialSpec, antiderivative, integrate_on_grid, interpolate
from transmutation_errors import DomainError, OrderError, SeedVanishes

logger = logging.getLogger(__name__)

SEED_TOL = 1e-11
VANISHING_RATIO = 1e-8
DEFAULT_K_MAX = 64


def solve_seed(q: PotentialSpec, grid: Grid, tol: float = SEED_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """Solve f'' = q f, f(0) = 1, f'(0) = 0 at every grid node"""
    f, f_prime = integrate_on_grid(q, grid, omega=0.0, initial=(1.0, 0.0), tol=tol)
    check_nonvanishing(f, grid)
    return f, f_prime


def _closest_approach(f: np.ndarray) -> np.ndarray:
    """Distance from 0 to each chord f[i] -> f[i+1]; a sign change between nodes gives 0"""
    start = f[:-1]
    chord = f[1:] - start
    length2 = np.abs(chord) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(length2 > 0, -np.real(np.conj(start) * chord) / length2, 0.0)
    return np.abs(start + np.clip(t, 0.0, 1.0) * chord)


def check_nonvanishing(f: np.ndarray, grid: Grid) -> None:
    f = np.asarray(f, dtype=complex)
    closest = _closest_approach(f)
    worst = int(np.argmin(closest))
    if closest[worst] < VANISHING_RATIO * np.abs(f).max():
        raise SeedVanishes(
            f"seed solution vanishes between x = {grid.points[worst]:.6g} and {grid.points[worst + 1]:.6g} "
            f"(|f| >= {closest[worst]:.3e}); shrink the interval or shift q by a complex constant"
        )


@dataclass
class FormalPowersTable:
    """f, f', X^(n), X~^(n) and phi_k on a grid for k = 0..K_max"""
    grid: Grid
    f: np.ndarray
    f_prime: np.ndarray
    K_max: int
    phi: np.ndarray
    X: np.ndarray
    X_tilde: np.ndarray

    def power(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.K_max:
            raise OrderError(f"formal power {k} requested, table holds 0..{self.K_max}")
        return self.phi[k]

    def evaluate(self, k: int, x) -> np.ndarray:
        """phi_k between nodes by local cubic interpolation"""
        return interpolate(self.power(k), self.grid, x)

    def to_frame(self) -> pd.DataFrame:
        """Dump with columns node, x, re_f, im_f, re_f_prime, im_f_prime, then
        re_phi_k/im_phi_k, re_X_k/im_X_k and re_Xt_k/im_Xt_k for k = 1..K_max"""
        columns = {
            "node": np.arange(self.grid.i_left, self.grid.i_right + 1),
            "x": self.grid.points,
            "re_f": self.f.real, "im_f": self.f.imag,
            "re_f_prime": self.f_prime.real, "im_f_prime": self.f_prime.imag,
        }
        for name, block in (("phi", self.phi), ("X", self.X), ("Xt", self.X_tilde)):
            for k in range(1, self.K_max + 1):
                columns[f"re_{name}_{k}"] = block[k].real
                columns[f"im_{name}_{k}"] = block[k].imag
        return pd.DataFrame(columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "FormalPowersTable":
        nodes = frame["node"].to_numpy()
        x = frame["x"].to_numpy()
        far = int(np.argmax(np.abs(nodes)))
        grid = Grid(h=float(x[far] / nodes[far]), i_left=int(nodes[0]), i_right=int(nodes[-1]))
        K_max = sum(1 for c in frame.columns if c.startswith("re_phi_"))

        def cplx(prefix: str) -> np.ndarray:
            return frame[f"re_{prefix}"].to_numpy() + 1j * frame[f"im_{prefix}"].to_numpy()

        def block(name: str, first: np.ndarray) -> np.ndarray:
            out = np.empty((K_max + 1, len(grid)), dtype=complex)
            out[0] = first
            for k in range(1, K_max + 1):
                out[k] = cplx(f"{name}_{k}")
            return out

        f = cplx("f")
        ones = np.ones(len(grid), dtype=complex)
        return cls(grid=grid, f=f, f_prime=cplx("f_prime"), K_max=K_max,
                   phi=block("phi", f), X=block("X", ones), X_tilde=block("Xt", ones))


def build_formal_powers(
    grid: Grid,
    f: np.ndarray,
    K_max: int = DEFAULT_K_MAX,
    f_prime: Optional[np.ndarray] = None,
) -> FormalPowersTable:
    """Run the X / X~ chains with alternating weights f^2 and f^-2"""
    if K_max < 0:
        raise DomainError(f"K_max must be nonnegative, got {K_max}")
    f = np.asarray(f, dtype=complex)
    check_nonvanishing(f, grid)

    f2 = f * f
    inv_f2 = 1.0 / f2
    size = len(grid)
    X = np.empty((K_max + 1, size), dtype=complex)
    X_tilde = np.empty((K_max + 1, size), dtype=complex)
    X[0] = 1.0
    X_tilde[0] = 1.0
    for n in range(1, K_max + 1):
        # X^(n) carries (f^2)^((-1)^n), X~^(n) carries (f^2)^((-1)^(n-1))
        weight, weight_tilde = (f2, inv_f2) if n % 2 == 0 else (inv_f2, f2)
        X[n] = n * antiderivative(X[n - 1] * weight, grid)
        X_tilde[n] = n * antiderivative(X_tilde[n - 1] * weight_tilde, grid)

    phi = np.empty_like(X)
    phi[0::2] = f * X_tilde[0::2]
    phi[1::2] = f * X[1::2]

    if f_prime is None:
        f_prime = np.full(size, np.nan + 0j)
    return FormalPowersTable(grid=grid, f=f, f_prime=np.asarray(f_prime, dtype=complex),
                             K_max=K_max, phi=phi, X=X, X_tilde=X_tilde)


def formal_powers_for(q: PotentialSpec, grid: Grid, K_max: int = DEFAULT_K_MAX) -> FormalPowersTable:
    """Seed solve plus formal-power table in one call"""
    started = time.perf_counter()
    f, f_prime = solve_seed(q, grid)
    table = build_formal_powers(grid, f, K_max, f_prime)
    logger.info(f"✅ Formal powers for {q.label}: K_max={K_max}, M={grid.M}, "
                f"{time.perf_counter() - started:.2f}s")
    return table
