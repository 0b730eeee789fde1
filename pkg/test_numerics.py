#!/usr/bin/env python3
"""
Tests for the numerical toolbox
Grids, special functions, grid calculus, least squares and the ODE oracle
"""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import eval_hermite, eval_laguerre, eval_legendre, spherical_jn

from numerics import (
    Grid,
    PotentialSpec,
    antiderivative,
    compensated_sum,
    differentiate,
    hermite_coeffs,
    hermite_normalized_table,
    integrate_on_grid,
    interpolate,
    laguerre_table,
    legendre_coeffs,
    legendre_q,
    legendre_q_table,
    legendre_table,
    lstsq,
    lstsq_pivoted,
    ode_oracle,
    spherical_bessel_derivative_table,
    spherical_bessel_table,
)
from transmutation_errors import DomainError, OrderError, RankDeficient, SingularPotential


# =============================================================================
# grids and potentials
# =============================================================================

def test_symmetric_grid_layout():
    grid = Grid.symmetric(1.0, 200)
    assert len(grid) == 201
    assert grid.zero_index == 100
    assert grid.points[0] == pytest.approx(-1.0)
    assert grid.points[-1] == pytest.approx(1.0)
    assert grid.points[grid.zero_index] == 0.0


def test_grid_rejects_bad_shapes():
    with pytest.raises(DomainError):
        Grid.symmetric(1.0, 201)
    with pytest.raises(DomainError):
        Grid.symmetric(-1.0, 200)
    with pytest.raises(DomainError):
        Grid.half(1.0, 8)


def test_breaks_snap_to_nodes_and_restrict_keeps_them():
    grid = Grid.symmetric(1.0, 200).with_breaks([0.503])
    assert grid.points[grid.breaks[0]] == pytest.approx(0.5)
    half = grid.restrict(0.0, 1.0)
    assert half.a_left == 0.0
    assert half.points[half.breaks[0]] == pytest.approx(0.5)


def test_potential_guards_singular_nodes():
    q = PotentialSpec(lambda x: 1.0 / x, label="1/x")
    grid = Grid.symmetric(1.0, 100)
    with pytest.raises(SingularPotential):
        q.sample(grid)
    pv = PotentialSpec(lambda x: 1.0 / x, label="1/x", principal_value_ok=True)
    values = pv.sample(grid)
    assert np.all(np.isfinite(values))
    assert values[grid.zero_index] == pytest.approx(0.0, abs=1e-6)


def test_sampled_potential_reproduces_cubic():
    grid = Grid.symmetric(1.0, 40)
    q = PotentialSpec.from_samples(grid, grid.points ** 3 - grid.points)
    x = np.linspace(-0.95, 0.95, 17)
    assert np.max(np.abs(q(x) - (x ** 3 - x))) < 1e-12


# =============================================================================
# orthogonal polynomials and special functions
# =============================================================================

def test_power_basis_coefficients():
    assert legendre_coeffs(3).coeffs == pytest.approx((0.0, -1.5, 0.0, 2.5))
    assert hermite_coeffs(2).coeffs == pytest.approx((-2.0, 0.0, 4.0))
    with pytest.raises(OrderError):
        legendre_coeffs(201)


def test_polynomial_tables_match_scipy():
    s = np.linspace(-1, 1, 13)
    t = np.linspace(0, 6, 13)
    P = legendre_table(12, s)
    L = laguerre_table(12, t)
    H = hermite_normalized_table(12, s)
    for n in range(13):
        assert np.allclose(P[n], eval_legendre(n, s), atol=1e-13)
        assert np.allclose(L[n], eval_laguerre(n, t), atol=1e-11)
        norm = math.sqrt(2.0 ** n * math.factorial(n))
        assert np.allclose(H[n], eval_hermite(n, s) / norm, atol=1e-12)


@pytest.mark.parametrize("z", [0.0, 0.3, 2.0, 17.5, 60.0, 150.0])
def test_spherical_bessel_real_arguments(z):
    j = spherical_bessel_table(30, np.array([z]))[:, 0]
    expected = spherical_jn(np.arange(31), z)
    np.testing.assert_allclose(j.real, expected, rtol=1e-10, atol=1e-15)


@pytest.mark.parametrize("z", [1 + 1j, 3 - 2j, 20 + 0.5j, 0.2j])
def test_spherical_bessel_complex_arguments(z):
    j = spherical_bessel_table(20, np.array([z]))[:, 0]
    expected = spherical_jn(np.arange(21), z)
    np.testing.assert_allclose(j, expected, rtol=1e-9, atol=1e-14 * max(1.0, abs(cmath.cosh(z.imag))))


@settings(max_examples=50, deadline=None)
@given(z=st.floats(min_value=0.5, max_value=80.0), n=st.integers(min_value=1, max_value=24))
def test_spherical_bessel_three_term_recurrence(z, n):
    j = spherical_bessel_table(n + 1, np.array([z]))[:, 0].real
    lhs = j[n - 1] + j[n + 1]
    rhs = (2 * n + 1) / z * j[n]
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(j[n - 1]), abs(j[n + 1]))


def test_spherical_bessel_derivative():
    z = np.array([0.7, 5.0, 33.0])
    _, dj = spherical_bessel_derivative_table(6, z)
    for n in range(7):
        np.testing.assert_allclose(dj[n].real, spherical_jn(n, z, derivative=True), rtol=1e-9, atol=1e-14)


def _q_by_quadrature(n: int, z: complex) -> complex:
    re = quad(lambda t: (eval_legendre(n, t) / (z - t)).real, -1, 1, epsabs=1e-14, epsrel=1e-13)[0]
    im = quad(lambda t: (eval_legendre(n, t) / (z - t)).imag, -1, 1, epsabs=1e-14, epsrel=1e-13)[0]
    return 0.5 * complex(re, im)


@pytest.mark.parametrize("z", [2.0, 1.2, -3.0, 0.5 + 1j, 3 + 1j])
def test_legendre_q_matches_integral_definition(z):
    table = legendre_q_table(10, np.array([z]))[:, 0]
    for n in range(11):
        assert abs(table[n] - _q_by_quadrature(n, z)) <= 1e-10 * max(1.0, abs(table[n]))


def test_legendre_q_closed_forms_and_cut():
    assert legendre_q(0, 2.0) == pytest.approx(math.atanh(0.5))
    assert legendre_q(1, 2.0) == pytest.approx(2 * math.atanh(0.5) - 1)
    with pytest.raises(DomainError):
        legendre_q(0, 0.5)


# =============================================================================
# grid calculus
# =============================================================================

def test_antiderivative_exact_for_quartics():
    grid = Grid.symmetric(1.0, 200)
    x = grid.points
    F = antiderivative(x ** 4 - 2 * x, grid)
    assert np.max(np.abs(F - (x ** 5 / 5 - x ** 2))) < 1e-13


def test_antiderivative_respects_jump_nodes():
    grid = Grid.symmetric(1.0, 200).with_breaks([0.5])
    x = grid.points
    kink = np.where(x > 0.5, x - 0.5, 0.0)
    F = antiderivative(kink, grid)
    assert np.max(np.abs(F - 0.5 * kink ** 2)) < 1e-13


def test_antiderivative_batches_leading_axes():
    grid = Grid.half(2.0, 100)
    x = grid.points
    F = antiderivative(np.stack([np.ones_like(x), x]), grid)
    assert np.allclose(F[0], x)
    assert np.allclose(F[1], x ** 2 / 2)


def test_differentiate_exact_for_quartics():
    grid = Grid.symmetric(1.0, 200)
    x = grid.points
    assert np.max(np.abs(differentiate(x ** 4 + x, grid) - (4 * x ** 3 + 1))) < 1e-9


def test_interpolate_exact_for_cubics():
    grid = Grid.symmetric(1.0, 50)
    xs = np.array([-0.987, -0.31, 0.0, 0.123, 0.999])
    assert np.max(np.abs(interpolate(grid.points ** 3, grid, xs) - xs ** 3)) < 1e-13
    with pytest.raises(DomainError):
        interpolate(grid.points, grid, [1.5])


def test_compensated_sum_recovers_cancelled_digits():
    total, peak = compensated_sum([np.array([1e16]), np.array([1.0]), np.array([-1e16])])
    assert total[0] == 1.0
    assert peak[0] >= 1e16


# =============================================================================
# least squares
# =============================================================================

@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1),
       rows=st.integers(min_value=5, max_value=40),
       cols=st.integers(min_value=1, max_value=5))
def test_lstsq_residual_is_orthogonal(seed, rows, cols):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    b = rng.standard_normal(rows) + 1j * rng.standard_normal(rows)
    result = lstsq(A, b)
    residual = b - A @ result.x
    assert np.max(np.abs(A.conj().T @ residual)) < 1e-9 * max(1.0, np.linalg.norm(b))
    reference = np.linalg.lstsq(A, b, rcond=None)[0]
    assert np.allclose(result.x, reference, atol=1e-9)


def test_lstsq_flags_rank_deficiency_and_pivoted_fallback():
    A = np.array([[1.0, 2.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [2.0, 1.0, 2.0]])
    b = A @ np.array([1.0, 1.0, 0.0])
    with pytest.raises(RankDeficient) as info:
        lstsq(A, b)
    assert info.value.column >= 0
    result = lstsq_pivoted(A, b)
    assert result.rank == 2
    assert np.allclose(A @ result.x, b)


# =============================================================================
# ODE oracle
# =============================================================================

@pytest.mark.parametrize("omega", [0.0, 1.0, 10.0, 3 - 0.5j])
def test_oracle_free_solution(omega):
    result = ode_oracle(PotentialSpec.constant(0.0), omega, 1.3)
    assert abs(result.u - cmath.exp(1j * omega * 1.3)) < 1e-10
    assert abs(result.du - 1j * omega * cmath.exp(1j * omega * 1.3)) < 1e-9 * max(1.0, abs(omega))


def test_oracle_constant_potential_backwards():
    omega, x = 2.0, -0.8
    W = cmath.sqrt(omega ** 2 - 1.0)
    expected = cmath.cos(W * x) + 1j * omega * cmath.sin(W * x) / W
    assert abs(ode_oracle(PotentialSpec.constant(1.0), omega, x).u - expected) < 1e-10


def test_integrate_on_grid_seed_is_cosh():
    grid = Grid.symmetric(1.0, 100)
    y, dy = integrate_on_grid(PotentialSpec.constant(1.0), grid)
    assert np.max(np.abs(y - np.cosh(grid.points))) < 1e-10
    assert np.max(np.abs(dy - np.sinh(grid.points))) < 1e-10


def _step_potential(position: float) -> PotentialSpec:
    return PotentialSpec(lambda x: np.where(np.asarray(x) < position, 0.0, 4.0),
                         label="step", breakpoints=[position])


def test_integrate_on_grid_crosses_a_jump_between_nodes():
    jump = 1.0 / 3.0
    q = _step_potential(jump)
    grid = Grid.symmetric(1.0, 2000).with_breaks(q.breakpoints)
    assert grid.index_of(jump) is None
    y, dy = integrate_on_grid(q, grid)
    x = grid.points
    past = np.clip(x - jump, 0.0, None)
    assert np.max(np.abs(y - np.cosh(2.0 * past))) < 1e-9
    assert np.max(np.abs(dy - 2.0 * np.sinh(2.0 * past))) < 1e-9


def test_oracle_crosses_a_jump():
    q = _step_potential(1.0 / 3.0)
    result = ode_oracle(q, 0.0, 1.0)
    assert abs(result.u - math.cosh(4.0 / 3.0)) < 1e-10


@pytest.mark.parametrize("omega", [1.0, 10.0])
def test_oracle_is_stable_under_halved_tolerance(omega):
    q = PotentialSpec(np.exp, label="exp(x)")
    tol = 1e-8
    coarse = ode_oracle(q, omega, 1.0, tol=tol)
    fine = ode_oracle(q, omega, 1.0, tol=tol / 2)
    assert abs(coarse.u - fine.u) < tol


def test_oracle_rejects_impossible_tolerance():
    with pytest.raises(DomainError):
        ode_oracle(PotentialSpec.constant(0.0), 1.0, 1.0, tol=1e-16)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
