#!/usr/bin/env python3
"""
Tests for the Fourier-Laguerre and Fourier-Hermite representations
"""

import logging
import math
from functools import lru_cache

import numpy as np
import pytest

from alt_representations import (
    HermiteKernel,
    LaguerreKernel,
    build_a,
    build_c,
    error_bounds,
    kernel_eval_hermite,
    kernel_eval_laguerre,
    solve_u_hermite,
    solve_u_laguerre,
)
from formal_powers import formal_powers_for
from goursat_oracle import constant_potential_solution
from kernel_legendre import build_beta, solve_u_nsbf
from numerics import Grid, PotentialSpec, ode_oracle
from transmutation_errors import DomainError, MagnitudeWarning, OrderError


logger = logging.getLogger(__name__)

POTENTIALS = {
    "exp": lambda: PotentialSpec(np.exp, label="exp(x)"),
    "x2": lambda: PotentialSpec(np.square, label="x^2"),
}


@lru_cache(maxsize=None)
def powers(label: str, M: int = 2000, K_max: int = 48):
    q = POTENTIALS[label]() if label in POTENTIALS else PotentialSpec.constant(float(label))
    return formal_powers_for(q, Grid.symmetric(1.0, M), K_max=K_max)


@lru_cache(maxsize=None)
def laguerre(label: str, N: int = 40, method: str = "projection") -> LaguerreKernel:
    return build_a(powers(label), N, method=method)


@lru_cache(maxsize=None)
def hermite(label: str, N: int = 40, method: str = "projection") -> HermiteKernel:
    return build_c(powers(label), N, method=method)


# =============================================================================
# coefficients
# =============================================================================

def test_zero_potential_has_zero_coefficients():
    assert np.max(np.abs(laguerre("0").a)) == 0.0
    assert np.max(np.abs(hermite("0").c)) == 0.0
    assert kernel_eval_laguerre(laguerre("0"), 0.5, 0.1) == 0.0


def test_lowest_coefficients_collapse_to_seed():
    table = powers("exp")
    assert np.max(np.abs(laguerre("exp").a[0] - (table.f - 1.0))) < 1e-12
    assert np.max(np.abs(hermite("exp").c[0] - (table.f - 1.0) / math.sqrt(math.pi))) < 1e-12


def test_first_coefficients_for_unit_potential():
    i = powers("1").grid.index_of(1.0)
    assert laguerre("1").a[1, i] == pytest.approx(math.sinh(1.0) - 1.0, abs=1e-9)
    assert laguerre("1").a[1, i] == pytest.approx(0.1752012, abs=1e-7)
    assert hermite("1").c[1, i] == pytest.approx((math.sinh(1.0) - 1.0) / math.sqrt(math.pi), abs=1e-9)
    assert hermite("1").c[1, i] == pytest.approx(0.0988426, abs=1e-7)


def test_coefficients_vanish_at_origin():
    z = powers("exp").grid.zero_index
    assert np.all(laguerre("exp").full_table[:, z] == 0.0)
    assert np.all(hermite("exp").full_table[:, z] == 0.0)


def test_direct_sums_agree_with_projection():
    grid = powers("exp").grid
    away = np.abs(grid.points) >= 0.5
    for build in (build_a, build_c):
        projected = build(powers("exp"), 10)
        direct = build(powers("exp"), 10, method="direct")
        assert np.max(np.abs(projected.coefficients[:, away] - direct.coefficients[:, away])) < 1e-8


def test_projection_reuses_a_supplied_legendre_kernel():
    beta = build_beta(powers("exp"), 40, margin=8)
    reused = build_a(powers("exp"), 40, beta_kernel=beta)
    assert np.array_equal(reused.full_table, laguerre("exp").full_table)


def test_order_caps_and_method_checks():
    deep = formal_powers_for(PotentialSpec.constant(1.0), Grid.symmetric(1.0, 100), K_max=125)
    with pytest.raises(OrderError):
        build_a(deep, 121)
    with pytest.raises(OrderError):
        build_c(deep, 101)
    with pytest.raises(OrderError):
        build_a(powers("1"), 49)
    with pytest.raises(DomainError):
        build_c(powers("1"), 4, method="magic")


# =============================================================================
# solution series
# =============================================================================

def test_free_solutions_are_plane_waves():
    x = np.linspace(0.0, 1.0, 6)
    assert np.max(np.abs(solve_u_laguerre(laguerre("0"), 2.0, x) - np.exp(2j * x))) < 1e-15
    assert np.max(np.abs(solve_u_hermite(hermite("0"), 2.0, x) - np.exp(2j * x))) < 1e-15


@pytest.mark.parametrize("label", ["1", "exp", "x2"])
def test_zero_frequency_returns_seed_for_every_representation(label):
    table = powers(label)
    x = table.grid.points
    positive = x >= 0
    assert np.max(np.abs(solve_u_laguerre(laguerre(label), 0.0, x[positive]) - table.f[positive])) < 1e-10
    assert np.max(np.abs(solve_u_hermite(hermite(label), 0.0, x) - table.f)) < 1e-10
    beta = build_beta(table, 40)
    assert np.max(np.abs(solve_u_nsbf(beta, 0.0, x) - table.f)) < 1e-10


@pytest.mark.parametrize("omega,tol", [(0.25, 1e-6), (0.5, 1e-6), (1.0, 1e-5)])
def test_laguerre_matches_closed_form(omega, tol):
    expected = constant_potential_solution(1.0, omega, 1.0)
    assert abs(solve_u_laguerre(laguerre("1"), omega, 1.0) - expected) < tol


def test_laguerre_error_stays_within_certificate():
    kern = laguerre("1")
    for omega in (0.5, 5.0):
        error = abs(solve_u_laguerre(kern, omega, 1.0) - constant_potential_solution(1.0, omega, 1.0))
        assert error <= 10.0 * kern.error_bound(1.0, omega) + 1e-10


def test_laguerre_error_stays_within_certificate_for_large_frequencies():
    kern = laguerre("exp")
    q = PotentialSpec(np.exp, label="exp(x)")
    errors = {}
    for omega in (1.0, 10.0, 100.0):
        errors[omega] = abs(solve_u_laguerre(kern, omega, 1.0) - ode_oracle(q, omega, 1.0).u)
        assert errors[omega] <= kern.error_bound(1.0, omega)
    spread = max(errors.values()) / min(errors.values())
    logger.info(f"Laguerre error spread over omega in {{1, 10, 100}}: {spread:.3g}")


def test_laguerre_bound_shape_off_the_real_axis():
    kern = laguerre("1")
    q = PotentialSpec.constant(1.0)
    real, shifted = 5.0, 5.0 + 0.4j
    growth = math.exp(-0.4) / math.sqrt(1.0 - 0.8)
    assert kern.error_bound(1.0, shifted) == pytest.approx(growth * kern.error_bound(1.0, real))
    err_real = abs(solve_u_laguerre(kern, real, 1.0) - ode_oracle(q, real, 1.0).u)
    err_shifted = abs(solve_u_laguerre(kern, shifted, 1.0) - ode_oracle(q, shifted, 1.0).u)
    assert err_shifted <= 10.0 * kern.error_bound(1.0, shifted) + 1e-10
    assert err_shifted <= 10.0 * growth * err_real


@pytest.mark.parametrize("omega", [1.0, 2.0, 3.0, 1.5 - 0.5j])
def test_hermite_matches_closed_form(omega):
    expected = constant_potential_solution(1.0, omega, 1.0)
    assert abs(solve_u_hermite(hermite("1"), omega, 1.0) - expected) < 1e-7


@pytest.mark.parametrize("omega", [0.0, 1.0])
def test_representations_agree_pairwise(omega):
    x = np.array([0.25, 0.5, 1.0])
    legendre = solve_u_nsbf(build_beta(powers("exp"), 40), omega, x)
    lag = solve_u_laguerre(laguerre("exp"), omega, x)
    her = solve_u_hermite(hermite("exp"), omega, x)
    assert np.max(np.abs(legendre - lag)) < 1e-5
    assert np.max(np.abs(legendre - her)) < 1e-5
    assert np.max(np.abs(lag - her)) < 1e-5


def test_laguerre_domain_errors():
    kern = laguerre("1")
    with pytest.raises(DomainError):
        solve_u_laguerre(kern, 0.6j, 0.5)
    with pytest.raises(DomainError):
        solve_u_laguerre(kern, 1j, 0.5)
    with pytest.raises(DomainError):
        solve_u_laguerre(kern, 1.0, -0.5)
    with pytest.raises(DomainError):
        kern.error_bound(0.5, 2 + 0.5j)
    with pytest.raises(DomainError):
        kernel_eval_laguerre(kern, 0.5, 0.7)


def test_hermite_flags_unresolved_frequencies():
    kern = build_c(powers("1"), 4)
    with pytest.warns(MagnitudeWarning):
        solve_u_hermite(kern, 10.0, 0.5)


# =============================================================================
# kernels and bounds
# =============================================================================

def test_laguerre_kernel_diagonal_is_coefficient_sum():
    kern = laguerre("exp")
    i = kern.grid.index_of(1.0)
    assert kernel_eval_laguerre(kern, 1.0, 1.0) == pytest.approx(complex(np.sum(kern.a[:, i])), rel=1e-12)


def test_hermite_kernel_vanishes_for_free_potential():
    values = kernel_eval_hermite(hermite("0"), 0.8, np.linspace(-0.8, 0.8, 5))
    assert np.max(np.abs(values)) == 0.0


def test_hermite_bound_grows_with_strip_width():
    kern = hermite("exp")
    tail = float(kern.tail_estimate(0.5))
    assert kern.error_bound(0.5, 1.0) == pytest.approx(math.pi ** 0.25 * tail)
    assert kern.error_bound(0.5, 1.0 + 2.0j) == pytest.approx(math.pi ** 0.25 * math.exp(2.0) * tail)


def test_error_bounds_report_tail_and_bound():
    bounds = error_bounds(laguerre("exp"), 0.5, 0.3 - 0.2j)
    assert set(bounds) == {"tail", "bound"}
    expected = bounds["tail"] * math.exp(0.2 * 0.5) / math.sqrt(1.4)
    assert bounds["bound"] == pytest.approx(expected)


def test_kernel_dump_keeps_representation_tag():
    kern = build_a(powers("exp", M=200), 6)
    frame = kern.to_frame()
    assert set(frame["representation"]) == {"laguerre"}
    restored = LaguerreKernel.from_frame(frame, N=6)
    assert np.array_equal(restored.full_table, kern.full_table)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
