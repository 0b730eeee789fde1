#!/usr/bin/env python3
"""
Tests for the benchmark harness
"""

import math

import numpy as np
import pytest

from benchmark import (
    accuracy_table,
    build_scaling_table,
    eigen_table,
    exact_dirichlet_omega,
    reference_solution,
    summarize,
)
from goursat_oracle import constant_potential_solution
from numerics import PotentialSpec


def test_reference_uses_closed_form_for_constants():
    q = PotentialSpec.constant(1.0)
    xs = np.array([0.0, 0.5, 1.0])
    reference = reference_solution(q, [2.0], xs)
    assert reference.shape == (1, 3)
    assert reference[0, 2] == constant_potential_solution(1.0, 2.0, 1.0)
    assert reference[0, 0] == pytest.approx(1.0)


def test_exact_dirichlet_omega():
    assert exact_dirichlet_omega(PotentialSpec.constant(1.0), math.pi, 3) == pytest.approx(math.sqrt(10.0))


def test_accuracy_improves_with_order():
    table = accuracy_table(PotentialSpec.constant(1.0), 1.0, 200, [2, 8], [1.0, 10.0], x_points=5, repeats=1)
    assert list(table.columns) == ["N", "omega", "build_seconds", "eval_seconds", "max_error"]
    assert len(table) == 4
    coarse = table[table["N"] == 2]["max_error"].to_numpy()
    fine = table[table["N"] == 8]["max_error"].to_numpy()
    assert np.all(fine <= coarse)
    assert fine.max() < 1e-5


def test_eigen_table_against_shooting():
    table = eigen_table(PotentialSpec.constant(0.0), math.pi, 400, 8, [1, 5, 20], shooting_steps=100)
    assert table["omega_reference"].tolist() == pytest.approx([1.0, 5.0, 20.0])
    assert table["nsbf_error"].max() < 1e-9
    errors = table["shooting_error"].tolist()
    assert errors[2] > errors[0]


def test_summary_lines():
    accuracy = accuracy_table(PotentialSpec.constant(1.0), 1.0, 200, [4], [1.0], x_points=3, repeats=1)
    eigen = eigen_table(PotentialSpec.constant(1.0), math.pi, 200, 8, [1, 2], shooting_steps=200)
    lines = summarize(accuracy, eigen)
    assert len(lines) == 5
    assert lines[1].lstrip().startswith("N=  4")


def test_summary_lists_build_scaling():
    accuracy = accuracy_table(PotentialSpec.constant(1.0), 1.0, 200, [4], [1.0], x_points=3, repeats=1)
    eigen = eigen_table(PotentialSpec.constant(1.0), math.pi, 200, 8, [1], shooting_steps=200)
    scaling = build_scaling_table(PotentialSpec.constant(1.0), 1.0, [100, 200], 4, repeats=1)
    assert list(scaling.columns) == ["M", "build_seconds"]
    lines = summarize(accuracy, eigen, scaling)
    assert lines[2].startswith("Build time by grid size: M=100")


# =============================================================================
# cost
# =============================================================================

@pytest.mark.slow
def test_evaluation_cost_does_not_grow_with_frequency():
    table = accuracy_table(PotentialSpec.constant(1.0), 1.0, 2000, [32], [1.0, 100.0], x_points=4000, repeats=7)
    seconds = dict(zip(table["omega"], table["eval_seconds"]))
    assert seconds[100.0] <= 1.5 * seconds[1.0]


@pytest.mark.slow
def test_build_time_is_linear_in_grid_size():
    table = build_scaling_table(PotentialSpec(np.exp, label="exp(x)"), 1.0, [2000, 4000], 32, repeats=3)
    ratio = table["build_seconds"].iloc[1] / table["build_seconds"].iloc[0]
    assert 1.6 <= ratio <= 2.6


@pytest.mark.slow
def test_eigen_table_for_variable_potential():
    table = eigen_table(PotentialSpec(np.exp, label="exp(x)"), math.pi, 2000, 32, [1, 10, 30])
    assert table["nsbf_error"].max() < 1e-7
    assert table["shooting_error"].iloc[-1] > table["nsbf_error"].iloc[-1]


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
