#!/usr/bin/env python3
"""
Transmutation Toolkit - Sturm-Liouville Spectra
Characteristic function from the NSBF series, eigenvalue scan, eigenfunctions and certificates
"""

import math
import time
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from formal_powers import build_formal_powers, solve_seed
from kernel_legendre import DEFAULT_N, LegendreKernel, build_beta, solve_du_nsbf, solve_u_nsbf
from numerics import Grid, PotentialSpec, antiderivative, differentiate, ode_oracle
from transmutation_errors import DomainError, NearDegenerate, ResidualAboveTolerance, ScanTooCoarse

logger = logging.getLogger(__name__)

MIN_DENSITY = 20.0
OVERSAMPLING = 6.0
DEGENERATE_GAP = 1e-8
ORACLE_TOL = 1e-10
RESIDUAL_TOL = 1e-4
_SCAN_CHUNK = 512


@dataclass(frozen=True)
class RobinCondition:
    """alpha y(0) + beta y'(0) = 0 and gamma y(b) + delta y'(b) = 0"""
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.alpha == 0 and self.beta == 0:
            raise DomainError("left boundary condition needs (alpha, beta) != (0, 0)")
        if self.gamma == 0 and self.delta == 0:
            raise DomainError("right boundary condition needs (gamma, delta) != (0, 0)")

    @property
    def needs_derivative(self) -> bool:
        return self.delta != 0


DIRICHLET = RobinCondition()


@dataclass
class SpectralProblem:
    """-y'' + q y = lambda y on [0, b] with Robin (default Dirichlet) conditions"""
    q: PotentialSpec
    b: float
    boundary: RobinCondition = DIRICHLET
    omega_min: float = 0.0
    omega_max: Optional[float] = None
    scan_density: Optional[float] = None
    kappa_max: Optional[float] = None

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError(f"interval length must be positive, got {self.b}")
        coarse = Grid.half(self.b, 64)
        if not self.q.is_real_on(coarse):
            raise DomainError("spectral problems need a real-valued potential")
        if self.scan_density is None:
            self.scan_density = max(MIN_DENSITY, OVERSAMPLING * self.b / math.pi)
        if self.kappa_max is None:
            lowest = float(np.min(np.real(self.q.sample(coarse))))
            self.kappa_max = math.sqrt(-lowest) if lowest < 0 else 0.0
        if self.omega_max is not None and self.omega_max <= self.omega_min:
            raise DomainError(f"empty omega range [{self.omega_min}, {self.omega_max}]")


@dataclass
class Eigenpair:
    """omega is real for lambda >= 0 and purely imaginary for bound states"""
    index: int
    omega: complex
    lam: float
    x: np.ndarray = field(repr=False)
    eigenfunction: np.ndarray = field(repr=False)
    residual: float = math.nan
    certificate: float = math.nan
    oracle_mismatch: float = math.nan


def build_spectral_kernel(problem: SpectralProblem, M: int = 2000, N: int = DEFAULT_N) -> LegendreKernel:
    """Seed, formal powers and beta on the half grid [0, b]"""
    grid = Grid.half(problem.b, M).with_breaks(problem.q.breakpoints)
    f, f_prime = solve_seed(problem.q, grid)
    powers = build_formal_powers(grid, f, K_max=N, f_prime=f_prime)
    return build_beta(powers, N)


# =============================================================================
# characteristic function
# =============================================================================

def fundamental_pair(kern: LegendreKernel, omega, x, derivative: bool = False):
    """Cosine- and sine-type solutions C, S (and C', S' if requested)

    C = (u(w) + u(-w))/2, S = (u(w) - u(-w))/(2 i w); valid on the real and
    imaginary omega axes.
    """
    omega = np.asarray(omega, dtype=complex)
    if np.any(omega == 0):
        raise DomainError("fundamental pair is evaluated at omega != 0")
    u_plus = solve_u_nsbf(kern, omega, x)
    u_minus = solve_u_nsbf(kern, -omega, x)
    C = 0.5 * (u_plus + u_minus)
    S = (u_plus - u_minus) / (2j * omega)
    if not derivative:
        return C, S
    du_plus = solve_du_nsbf(kern, omega, x)
    du_minus = solve_du_nsbf(kern, -omega, x)
    return C, S, 0.5 * (du_plus + du_minus), (du_plus - du_minus) / (2j * omega)


def _check_kernel(problem: SpectralProblem, kern: LegendreKernel) -> None:
    if not kern.grid.contains([0.0, problem.b]):
        raise DomainError(f"kernel grid [{kern.grid.a_left}, {kern.grid.a_right}] does not cover [0, {problem.b}]")


def _combine(problem: SpectralProblem, C, S, Cp=None, Sp=None):
    bc = problem.boundary
    y = -bc.beta * C + bc.alpha * S
    if not bc.needs_derivative:
        return bc.gamma * y
    yp = -bc.beta * Cp + bc.alpha * Sp
    return bc.gamma * y + bc.delta * yp


def characteristic(problem: SpectralProblem, kern: LegendreKernel, omega) -> Union[float, np.ndarray]:
    """Phi(omega) = gamma y(b) + delta y'(b), y = -beta C + alpha S"""
    _check_kernel(problem, kern)
    parts = fundamental_pair(kern, omega, problem.b, derivative=problem.boundary.needs_derivative)
    phi = _combine(problem, *parts)
    scale = np.maximum(1.0, np.abs(phi))
    if np.any(np.abs(np.imag(phi)) > 1e-8 * scale):
        logger.debug(f"Characteristic has imaginary part up to {float(np.max(np.abs(np.imag(phi)))):.2e}")
    real = np.real(phi)
    return float(real) if np.ndim(real) == 0 else real


# =============================================================================
# scanning and refinement
# =============================================================================

def _scan(values_fn, lo: float, hi: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    grid = np.arange(lo, hi + 0.5 * step, step)
    values = np.concatenate([values_fn(grid[i:i + _SCAN_CHUNK]) for i in range(0, grid.size, _SCAN_CHUNK)])
    return grid, values


def _brackets(grid: np.ndarray, values: np.ndarray) -> List[Tuple[float, float]]:
    sign_change = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
    exact = np.nonzero(values == 0)[0]
    hits = np.sort(np.concatenate([sign_change, exact]))
    if hits.size > 1 and np.min(np.diff(hits)) < 3:
        closest = int(np.argmin(np.diff(hits)))
        raise ScanTooCoarse(
            f"sign changes near omega = {grid[hits[closest]]:.6g} and {grid[hits[closest + 1]]:.6g} "
            f"are fewer than 3 scan steps apart; raise scan_density"
        )
    out = []
    for i in hits:
        if values[i] == 0:
            out.append((grid[i], grid[i]))
        else:
            out.append((grid[i], grid[i + 1]))
    return out


def _refine(fn, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    root = brentq(fn, lo, hi, xtol=1e-12 * max(1.0, abs(hi)), rtol=4 * np.finfo(float).eps, maxiter=200)
    # one secant polish step, kept only if it stays in the bracket and improves |fn|
    delta = 1e-7 * max(1.0, abs(root))
    f0, f1 = fn(root), fn(root + delta)
    if f1 != f0:
        polished = root - f0 * delta / (f1 - f0)
        if lo <= polished <= hi and abs(fn(polished)) < abs(f0):
            root = polished
    return root


def _dedupe(roots: List[float]) -> List[float]:
    roots = sorted(roots)
    kept: List[float] = []
    for r in roots:
        if kept and abs(r - kept[-1]) < DEGENERATE_GAP * max(1.0, abs(r)):
            warnings.warn(f"roots {kept[-1]:.15g} and {r:.15g} are closer than {DEGENERATE_GAP:g}",
                          NearDegenerate, stacklevel=3)
            continue
        kept.append(r)
    return kept


def _real_roots(problem: SpectralProblem, kern: LegendreKernel, lo: float, hi: float) -> Tuple[List[float], float]:
    """Refined roots on [lo, hi] and the last scanned omega"""
    step = 1.0 / problem.scan_density
    start = max(lo, 0.5 * step)
    grid, values = _scan(lambda w: characteristic(problem, kern, w), start, hi, step)
    scalar = lambda w: characteristic(problem, kern, w)
    return [_refine(scalar, a, b) for a, b in _brackets(grid, values)], float(grid[-1])


def _bound_state_roots(problem: SpectralProblem, kern: LegendreKernel) -> List[float]:
    if not problem.kappa_max:
        return []
    step = 1.0 / problem.scan_density
    phi = lambda k: characteristic(problem, kern, 1j * np.asarray(k))
    grid, values = _scan(phi, 0.5 * step, problem.kappa_max + step, step)
    return [_refine(phi, a, b) for a, b in _brackets(grid, values)]


# =============================================================================
# eigenpairs
# =============================================================================

def _half_grid(problem: SpectralProblem, kern: LegendreKernel) -> Grid:
    return kern.grid.restrict(0.0, problem.b)


def _eigen_samples(problem: SpectralProblem, kern: LegendreKernel, omega: complex,
                   derivative: bool = False):
    grid = _half_grid(problem, kern)
    bc = problem.boundary
    parts = fundamental_pair(kern, omega, grid.points, derivative=derivative)
    y = np.real(-bc.beta * parts[0] + bc.alpha * parts[1])
    norm = math.sqrt(float(np.real(antiderivative(y * y, grid)[-1])))
    if not derivative:
        return grid, y / norm
    yp = np.real(-bc.beta * parts[2] + bc.alpha * parts[3])
    return grid, y / norm, yp / norm


def eigenfunction(problem: SpectralProblem, kern: LegendreKernel, pair: Eigenpair) -> np.ndarray:
    """-beta C + alpha S at the nodes of [0, b], unit L2 norm"""
    return _eigen_samples(problem, kern, pair.omega)[1]


def eigen_residual(problem: SpectralProblem, kern: LegendreKernel, omega: complex) -> float:
    """||y'' - q y + lambda y|| over [0, b] for the normalized eigenfunction, divided by max(1, |lambda|)

    y' comes from the derivative series and is differentiated once on the grid.
    Jump nodes are left out since q has no single value there.
    """
    grid, y, yp = _eigen_samples(problem, kern, complex(omega), derivative=True)
    lam = float((complex(omega) ** 2).real)
    q = np.real(problem.q.sample(grid))
    r = differentiate(yp, grid) - (q - lam) * y
    r[list(grid.breaks)] = 0.0
    norm = math.sqrt(float(antiderivative(r * r, grid)[-1]))
    return norm / max(1.0, abs(lam))


def _oracle_phi(problem: SpectralProblem, omega: complex) -> float:
    plus = ode_oracle(problem.q, omega, problem.b, tol=ORACLE_TOL)
    if omega.imag == 0:
        minus_u, minus_du = np.conj(plus.u), np.conj(plus.du)
    else:
        minus = ode_oracle(problem.q, -omega, problem.b, tol=ORACLE_TOL)
        minus_u, minus_du = minus.u, minus.du
    C = 0.5 * (plus.u + minus_u)
    S = (plus.u - minus_u) / (2j * omega)
    Cp = 0.5 * (plus.du + minus_du)
    Sp = (plus.du - minus_du) / (2j * omega)
    return float(abs(_combine(problem, C, S, Cp, Sp)))


def _certificate(problem: SpectralProblem, kern: LegendreKernel, omega: complex) -> float:
    """Heuristic root error: series error bound over |omega| |Phi'|"""
    eps = float(kern.tail_estimate(problem.b))
    if omega.imag == 0:
        w = omega.real
        bound = eps * math.sqrt(2.0 * problem.b)
        d = 1e-6 * max(1.0, w)
        slope = (characteristic(problem, kern, w + d) - characteristic(problem, kern, w - d)) / (2 * d)
    else:
        kappa = omega.imag
        bound = eps * math.sinh(kappa * problem.b) / kappa
        d = 1e-6 * max(1.0, kappa)
        slope = (characteristic(problem, kern, 1j * (kappa + d)) -
                 characteristic(problem, kern, 1j * (kappa - d))) / (2 * d)
    return bound / (abs(omega) * abs(slope)) if slope != 0 else math.inf


def find_eigenvalues(
    problem: SpectralProblem,
    kern: LegendreKernel,
    count: Optional[int] = None,
    omega_range: Optional[Tuple[float, float]] = None,
    certify: bool = True,
    residual_tol: float = RESIDUAL_TOL,
) -> List[Eigenpair]:
    """Eigenpairs ordered by lambda: bound states first, then the real-axis scan

    Every pair carries its differential-equation residual; pairs above
    ``residual_tol`` raise a ResidualAboveTolerance warning. With ``certify``
    the series certificate and the oracle boundary mismatch are filled in too.
    """
    _check_kernel(problem, kern)
    if count is None and omega_range is None and problem.omega_max is None:
        raise DomainError("give a count or an omega range")
    started = time.perf_counter()

    omegas: List[complex] = [1j * k for k in _dedupe(_bound_state_roots(problem, kern))]
    omegas.sort(key=lambda w: -abs(w))

    lo, hi = omega_range if omega_range is not None else (problem.omega_min, problem.omega_max)
    if count is None:
        real_roots, _ = _real_roots(problem, kern, lo, hi)
    else:
        needed = count - len(omegas)
        hi = hi if hi is not None else (needed + 2) * math.pi / problem.b + math.sqrt(problem.kappa_max ** 2 + 1.0)
        real_roots, last = _real_roots(problem, kern, lo, hi)
        while len(real_roots) < needed:
            hi = hi * 1.25 + 1.0
            logger.debug(f"Extending eigenvalue scan to omega <= {hi:.4g}")
            more, last = _real_roots(problem, kern, last, hi)
            real_roots += more
    omegas += [complex(w) for w in _dedupe(real_roots)]
    if count is not None:
        omegas = omegas[:count]

    pairs = []
    x = _half_grid(problem, kern).points
    for n, w in enumerate(omegas, start=1):
        pair = Eigenpair(index=n, omega=w, lam=float((w * w).real), x=x, eigenfunction=np.empty(0))
        pair.eigenfunction = eigenfunction(problem, kern, pair)
        pair.residual = eigen_residual(problem, kern, w)
        if certify:
            pair.oracle_mismatch = _oracle_phi(problem, w)
            pair.certificate = _certificate(problem, kern, w)
        pairs.append(pair)

    flagged = [p.index for p in pairs if not p.residual <= residual_tol]
    if flagged:
        warnings.warn(f"eigenpairs {flagged} have residual above {residual_tol:g}",
                      ResidualAboveTolerance, stacklevel=2)

    logger.info(f"✅ Found {len(pairs)} eigenpair(s) in {time.perf_counter() - started:.2f}s")
    return pairs


def eigen_frame(pairs: Sequence[Eigenpair]) -> pd.DataFrame:
    return pd.DataFrame({
        "n": [p.index for p in pairs],
        "re_omega": [p.omega.real for p in pairs],
        "im_omega": [p.omega.imag for p in pairs],
        "lambda": [p.lam for p in pairs],
        "residual": [p.residual for p in pairs],
        "certificate": [p.certificate for p in pairs],
        "oracle_mismatch": [p.oracle_mismatch for p in pairs],
    })


def eigenfunction_frame(pairs: Sequence[Eigenpair]) -> pd.DataFrame:
    if not pairs:
        return pd.DataFrame({"x": []})
    columns = {"x": pairs[0].x}
    for p in pairs:
        columns[f"y_{p.index}"] = p.eigenfunction
    return pd.DataFrame(columns)
