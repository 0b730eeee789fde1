#!/usr/bin/env python3
"""
Tests for Sturm-Liouville spectra and the shooting baselines
"""

import cmath
import math
from functools import lru_cache

import numpy as np
import pytest

from kernel_legendre import LegendreKernel
from numerics import PotentialSpec, antiderivative
from shooting_baseline import (
    oracle_dirichlet_omegas,
    oracle_omega_near,
    rk4_dirichlet_omegas,
    rk4_sine_endpoint,
)
from spectral import (
    RobinCondition,
    SpectralProblem,
    build_spectral_kernel,
    characteristic,
    eigen_frame,
    eigenfunction_frame,
    eigen_residual,
    find_eigenvalues,
    fundamental_pair,
)
from transmutation_errors import DomainError, ResidualAboveTolerance, ScanTooCoarse

NEUMANN = RobinCondition(alpha=0.0, beta=1.0, gamma=0.0, delta=1.0)


def potential(label: str) -> PotentialSpec:
    if label == "exp":
        return PotentialSpec(np.exp, label="exp(x)")
    return PotentialSpec.constant(float(label))


def problem(label: str, b: float = math.pi, boundary: RobinCondition = RobinCondition(), **kwargs) -> SpectralProblem:
    return SpectralProblem(q=potential(label), b=b, boundary=boundary, **kwargs)


@lru_cache(maxsize=None)
def kernel(label: str, b: float = math.pi, M: int = 2000) -> LegendreKernel:
    return build_spectral_kernel(problem(label, b), M=M)


# =============================================================================
# problem setup
# =============================================================================

def test_problem_defaults():
    p = problem("exp")
    assert p.scan_density == 20.0
    assert p.kappa_max == 0.0
    assert problem("-4", b=1.0).kappa_max == pytest.approx(2.0)
    assert problem("0", b=100.0).scan_density == pytest.approx(600.0 / math.pi)


def test_problem_rejects_bad_input():
    with pytest.raises(DomainError):
        SpectralProblem(q=PotentialSpec.constant(1 + 1j), b=1.0)
    with pytest.raises(DomainError):
        problem("0", b=0.0)
    with pytest.raises(DomainError):
        problem("0", omega_min=5.0, omega_max=2.0)
    with pytest.raises(DomainError):
        RobinCondition(alpha=0.0, beta=0.0)
    with pytest.raises(DomainError):
        RobinCondition(gamma=0.0, delta=0.0)


# =============================================================================
# characteristic function
# =============================================================================

@pytest.mark.parametrize("omega", [0.5, 1.3, 7.2])
def test_free_dirichlet_characteristic_is_sine(omega):
    value = characteristic(problem("0"), kernel("0"), omega)
    assert value == pytest.approx(math.sin(omega * math.pi) / omega, abs=1e-13)


@pytest.mark.parametrize("omega", [0.5, 2.5, 9.0])
def test_shifted_dirichlet_characteristic(omega):
    Omega = cmath.sqrt(omega * omega - 1.0)
    expected = (cmath.sin(Omega * math.pi) / Omega).real
    assert characteristic(problem("1"), kernel("1"), omega) == pytest.approx(expected, abs=1e-9)


def test_fundamental_pair_is_real_for_real_potential():
    x = np.linspace(0.0, math.pi, 7)
    C, S = fundamental_pair(kernel("exp"), 4.0, x)
    assert np.max(np.abs(np.imag(C))) < 1e-12
    assert np.max(np.abs(np.imag(S))) < 1e-12
    assert C[0] == pytest.approx(1.0)
    assert S[0] == pytest.approx(0.0)
    with pytest.raises(DomainError):
        fundamental_pair(kernel("exp"), 0.0, x)


def test_vectorized_characteristic_matches_scalar():
    omegas = np.array([1.5, 2.5, 3.5])
    values = characteristic(problem("exp"), kernel("exp"), omegas)
    for w, v in zip(omegas, values):
        assert v == pytest.approx(characteristic(problem("exp"), kernel("exp"), w))


def test_kernel_must_cover_the_interval():
    short = kernel("0", 1.0)
    with pytest.raises(DomainError):
        characteristic(problem("0", b=2.0), short, 1.0)


# =============================================================================
# eigenvalues
# =============================================================================

def test_free_dirichlet_first_hundred():
    pairs = find_eigenvalues(problem("0"), kernel("0"), count=100, certify=False)
    assert [p.index for p in pairs] == list(range(1, 101))
    errors = [abs(p.omega - n) for n, p in enumerate(pairs, start=1)]
    assert max(errors) < 1e-9


def test_shifted_dirichlet_eigenvalues():
    pairs = find_eigenvalues(problem("1"), kernel("1"), count=20, certify=False)
    for n, p in enumerate(pairs, start=1):
        assert abs(p.omega.real - math.sqrt(n * n + 1.0)) < 1e-9


def test_constant_shift_moves_every_eigenvalue_by_one():
    free = find_eigenvalues(problem("0"), kernel("0"), count=10, certify=False)
    shifted = find_eigenvalues(problem("1"), kernel("1"), count=10, certify=False)
    for a, b in zip(free, shifted):
        assert abs((b.lam - a.lam) - 1.0) < 1e-8


def test_exponential_potential_matches_oracle_shooting():
    pairs = find_eigenvalues(problem("exp"), kernel("exp"), count=10)
    reference = oracle_dirichlet_omegas(potential("exp"), math.pi, 10)
    for p, w in zip(pairs, reference):
        assert abs(p.omega.real - w) < 1e-7
        assert p.residual < 1e-6
        assert p.oracle_mismatch < 1e-6
        assert 0.0 <= p.certificate < 1e-6


def test_omega_range_selects_a_window():
    pairs = find_eigenvalues(problem("0"), kernel("0"), omega_range=(2.5, 5.5), certify=False)
    assert [round(p.omega.real, 9) for p in pairs] == [3.0, 4.0, 5.0]


def test_neumann_eigenvalues_use_endpoint_derivative():
    free = find_eigenvalues(problem("0", boundary=NEUMANN), kernel("0"), count=4, certify=False)
    assert [p.omega.real for p in free] == pytest.approx([1.0, 2.0, 3.0, 4.0], abs=1e-8)
    shifted = find_eigenvalues(problem("1", boundary=NEUMANN), kernel("1"), count=4, certify=False)
    expected = [1.0, math.sqrt(2.0), math.sqrt(5.0), math.sqrt(10.0)]
    assert [p.omega.real for p in shifted] == pytest.approx(expected, abs=1e-8)


def test_bound_state_on_imaginary_axis():
    # alpha y(0) + y'(0) = 0 with alpha = coth(1) admits y = cosh x - coth(1) sinh x, lambda = -1
    robin = RobinCondition(alpha=1.0 / math.tanh(1.0), beta=1.0)
    p = problem("0", b=1.0, boundary=robin, kappa_max=2.0)
    pairs = find_eigenvalues(p, kernel("0", 1.0), count=2)
    assert abs(pairs[0].omega - 1j) < 1e-9
    assert pairs[0].lam == pytest.approx(-1.0, abs=1e-8)
    assert pairs[1].omega.imag == 0.0 and pairs[1].omega.real > math.pi
    x = pairs[0].x
    shape = np.cosh(x) - np.sinh(x) / math.tanh(1.0)
    shape /= math.sqrt(float(antiderivative(shape * shape, kernel("0", 1.0).grid.restrict(0.0, 1.0))[-1]))
    assert np.max(np.abs(np.abs(pairs[0].eigenfunction) - np.abs(shape))) < 1e-8


def test_coarse_scan_is_rejected():
    p = problem("0", scan_density=2.0)
    with pytest.raises(ScanTooCoarse):
        find_eigenvalues(p, kernel("0"), count=3, certify=False)


def test_count_or_range_is_required():
    with pytest.raises(DomainError):
        find_eigenvalues(problem("0"), kernel("0"))


# =============================================================================
# eigenfunctions
# =============================================================================

def test_first_free_eigenfunction_is_normalized_sine():
    pair = find_eigenvalues(problem("0"), kernel("0"), count=1, certify=False)[0]
    expected = np.sin(pair.x) / math.sqrt(math.pi / 2.0)
    assert np.max(np.abs(pair.eigenfunction - expected)) < 1e-10


def test_shifted_eigenfunction_matches_closed_form():
    pair = find_eigenvalues(problem("1"), kernel("1"), count=3, certify=False)[2]
    Omega = math.sqrt(pair.omega.real ** 2 - 1.0)
    expected = np.sin(Omega * pair.x) / math.sqrt(math.pi / 2.0)
    assert np.max(np.abs(pair.eigenfunction - expected)) < 1e-8


def test_eigenfunctions_are_orthonormal():
    pairs = find_eigenvalues(problem("exp"), kernel("exp"), count=2, certify=False)
    grid = kernel("exp").grid.restrict(0.0, math.pi)
    y1, y2 = pairs[0].eigenfunction, pairs[1].eigenfunction
    assert antiderivative(y1 * y1, grid)[-1] == pytest.approx(1.0, abs=1e-12)
    assert abs(antiderivative(y1 * y2, grid)[-1]) < 1e-8


def test_eigenfunctions_oscillate_per_index():
    pairs = find_eigenvalues(problem("exp"), kernel("exp"), count=6, certify=False)
    for p in pairs:
        interior = p.eigenfunction[1:-1]
        changes = int(np.count_nonzero(np.sign(interior[:-1]) * np.sign(interior[1:]) < 0))
        assert changes == p.index - 1
        assert abs(p.eigenfunction[-1]) < 1e-6


def test_frames_have_documented_columns():
    pairs = find_eigenvalues(problem("0"), kernel("0"), count=3)
    frame = eigen_frame(pairs)
    assert list(frame.columns) == ["n", "re_omega", "im_omega", "lambda", "residual", "certificate", "oracle_mismatch"]
    assert frame["lambda"].tolist() == pytest.approx([1.0, 4.0, 9.0], abs=1e-8)
    functions = eigenfunction_frame(pairs)
    assert list(functions.columns) == ["x", "y_1", "y_2", "y_3"]
    assert len(functions) == len(pairs[0].x)
    assert list(eigenfunction_frame([]).columns) == ["x"]


def test_residual_is_the_differential_equation_mismatch():
    pairs = find_eigenvalues(problem("exp"), kernel("exp"), count=3, certify=False)
    for p in pairs:
        assert p.residual == eigen_residual(problem("exp"), kernel("exp"), p.omega)
        assert p.residual < 1e-8
    # sin x solves the free equation, so against q = e^x the mismatch is ||e^x sin x|| / ||sin x||
    expected = math.sqrt((math.exp(2.0 * math.pi) - 1.0) / (4.0 * math.pi))
    assert eigen_residual(problem("exp"), kernel("0"), 1.0) == pytest.approx(expected, rel=1e-6)


def test_residual_above_tolerance_is_flagged():
    with pytest.warns(ResidualAboveTolerance):
        find_eigenvalues(problem("exp"), kernel("exp"), count=2, certify=False, residual_tol=1e-300)


def test_spectral_kernel_with_jump_between_nodes():
    q = PotentialSpec(lambda x: np.where(np.asarray(x) < 1.0, 0.0, 4.0), label="step", breakpoints=[1.0])
    p = SpectralProblem(q=q, b=math.pi)
    kern = build_spectral_kernel(p)
    assert kern.grid.index_of(1.0) is None
    pairs = find_eigenvalues(p, kern, count=3, certify=False)
    reference = oracle_dirichlet_omegas(q, math.pi, 3)
    for pair, w in zip(pairs, reference):
        assert abs(pair.omega.real - w) < 1e-4


@pytest.mark.slow
def test_accuracy_does_not_deteriorate_with_index():
    kern = kernel("exp", M=8000)
    pairs = find_eigenvalues(problem("exp"), kern, count=50, certify=False)
    q = potential("exp")
    err5 = abs(pairs[4].omega.real - oracle_omega_near(q, math.pi, pairs[4].omega.real))
    w50 = pairs[49].omega.real
    err50 = abs(w50 - oracle_omega_near(q, math.pi, w50))
    # rounding-level floor, about 2e-11 at this frequency
    floor = 2e3 * np.finfo(float).eps * w50
    assert err50 <= max(10.0 * err5, floor)


# =============================================================================
# shooting baselines
# =============================================================================

def test_oracle_shooting_on_shifted_potential():
    roots = oracle_dirichlet_omegas(potential("1"), math.pi, 5)
    assert roots == pytest.approx([math.sqrt(n * n + 1.0) for n in range(1, 6)], abs=1e-9)


def test_rk4_shooting_is_accurate_at_low_index():
    roots = rk4_dirichlet_omegas(potential("0"), math.pi, 3, steps=400)
    assert roots == pytest.approx([1.0, 2.0, 3.0], abs=1e-6)
    assert rk4_sine_endpoint(potential("0"), 1.0, math.pi / 2, 200) == pytest.approx(1.0, abs=1e-8)


def test_rk4_shooting_error_grows_with_index():
    roots = rk4_dirichlet_omegas(potential("0"), math.pi, 30, steps=100)
    assert abs(roots[29] - 30.0) > 100.0 * abs(roots[0] - 1.0)


def test_oracle_refinement_needs_a_sign_change():
    assert oracle_omega_near(potential("0"), math.pi, 2.01) == pytest.approx(2.0, abs=1e-11)
    with pytest.raises(DomainError):
        oracle_omega_near(potential("0"), math.pi, 2.5)
    with pytest.raises(DomainError):
        oracle_dirichlet_omegas(potential("0"), -1.0, 3)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
