#!/usr/bin/env python3
"""
Transmutation Toolkit - Shooting Baselines
Dirichlet eigenvalues by shooting: adaptive oracle shooting and a fixed-step RK4 comparison
"""

import math
import logging
from typing import Callable, List

import numpy as np
from scipy.optimize import brentq

from numerics import PotentialSpec, ode_oracle
from transmutation_errors import DomainError

logger = logging.getLogger(__name__)

ORACLE_SHOOTING_TOL = 1e-12
SCAN_POINTS_PER_UNIT = 4.0


def _dirichlet_endpoint_oracle(q: PotentialSpec, b: float, tol: float) -> Callable[[float], float]:
    """omega -> Im u(omega, b)/omega from the adaptive oracle (sine-type solution at b)"""
    def value(omega: float) -> float:
        return float(ode_oracle(q, omega, b, tol=tol).u.imag / omega)
    return value


def rk4_sine_endpoint(q: PotentialSpec, lam: float, b: float, steps: int) -> float:
    """y(b) for -y'' + q y = lam y, y(0) = 0, y'(0) = 1, classical RK4 with a fixed step"""
    h = b / steps
    y, p = 0.0, 1.0
    x = 0.0
    for _ in range(steps):
        q0 = q.scalar(x).real - lam
        qm = q.scalar(x + 0.5 * h).real - lam
        q1 = q.scalar(x + h).real - lam
        k1y, k1p = p, q0 * y
        k2y, k2p = p + 0.5 * h * k1p, qm * (y + 0.5 * h * k1y)
        k3y, k3p = p + 0.5 * h * k2p, qm * (y + 0.5 * h * k2y)
        k4y, k4p = p + h * k3p, q1 * (y + h * k3y)
        y += h * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
        p += h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
        x += h
    return y


def _bracketed_roots(fn: Callable[[float], float], count: int, start: float, step: float, xtol: float) -> List[float]:
    roots: List[float] = []
    lo, f_lo = start, fn(start)
    while len(roots) < count:
        hi = lo + step
        f_hi = fn(hi)
        if f_lo == 0:
            roots.append(lo)
        elif f_lo * f_hi < 0:
            roots.append(brentq(fn, lo, hi, xtol=xtol * max(1.0, hi), rtol=4 * np.finfo(float).eps))
        lo, f_lo = hi, f_hi
    return roots


def oracle_dirichlet_omegas(
    q: PotentialSpec,
    b: float,
    count: int,
    tol: float = ORACLE_SHOOTING_TOL,
    points_per_unit: float = SCAN_POINTS_PER_UNIT,
) -> List[float]:
    """First ``count`` Dirichlet square-root eigenvalues omega > 0 by shooting on ode_oracle"""
    if b <= 0 or count < 1:
        raise DomainError(f"need b > 0 and count >= 1, got b={b}, count={count}")
    step = 1.0 / max(points_per_unit, 2.0 * b / math.pi)
    roots = _bracketed_roots(_dirichlet_endpoint_oracle(q, b, tol), count, 0.5 * step, step, 1e-13)
    logger.debug(f"Oracle shooting found {len(roots)} root(s) up to omega = {roots[-1]:.6g}")
    return roots


def rk4_dirichlet_omegas(q: PotentialSpec, b: float, count: int, steps: int = 400) -> List[float]:
    """Same eigenvalues from fixed-step RK4 shooting; accuracy degrades as omega grows"""
    if b <= 0 or count < 1 or steps < 1:
        raise DomainError(f"need b > 0, count >= 1, steps >= 1, got b={b}, count={count}, steps={steps}")
    fn = lambda omega: rk4_sine_endpoint(q, omega * omega, b, steps)
    step = 1.0 / max(SCAN_POINTS_PER_UNIT, 2.0 * b / math.pi)
    return _bracketed_roots(fn, count, 0.5 * step, step, 1e-12)


def oracle_omega_near(q: PotentialSpec, b: float, guess: float, halfwidth: float = 0.05,
                      tol: float = ORACLE_SHOOTING_TOL) -> float:
    """Refine one Dirichlet root of the oracle endpoint inside [guess - halfwidth, guess + halfwidth]"""
    fn = _dirichlet_endpoint_oracle(q, b, tol)
    lo, hi = guess - halfwidth, guess + halfwidth
    if lo <= 0 or fn(lo) * fn(hi) > 0:
        raise DomainError(f"no sign change of the oracle endpoint in [{lo:.6g}, {hi:.6g}]")
    return brentq(fn, lo, hi, xtol=1e-13 * max(1.0, hi), rtol=4 * np.finfo(float).eps)
