#!/usr/bin/env python3
"""
Transmutation Toolkit - Command Line Runner
Runs solve, kernel, eigen, pde, compare and bench jobs from JSON configs and flags
"""

import sys
import json
import logging
import argparse
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

import benchmark
from alt_representations import build_a, build_c, solve_u_hermite, solve_u_laguerre
from expression_parser import PLANE_VARIABLES, parse_expression, potential_from_expression
from formal_powers import FormalPowersTable, formal_powers_for
from job_config import JobConfig, RepresentationName, Task, config_schema, load_config
from kernel_base import KernelCoefficients
from kernel_legendre import build_beta, solution_frame
from numerics import Grid, PotentialSpec, ode_oracle
from pde_families import PlanarDomain, default_sources, mfs_solve, solve_dirichlet
from results_storage import ResultsStorage
from spectral import (
    RobinCondition,
    SpectralProblem,
    build_spectral_kernel,
    eigen_frame,
    eigenfunction_frame,
    find_eigenvalues,
)
from toolkit_settings import configure_logging, get_settings
from transmutation_errors import DomainError, NumericalWarning, TransmutationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_WARNINGS = 3


# =============================================================================
# pipeline stages
# =============================================================================

def build_potential(config: JobConfig) -> PotentialSpec:
    """Expression potential, or a cubic spline through a sample CSV with columns x, q"""
    if config.potential_samples is None:
        return potential_from_expression(config.potential, config.principal_value_ok, config.breakpoints)
    frame = pd.read_csv(config.potential_samples, float_precision="round_trip")
    x = frame["x"].to_numpy()
    h = float(x[1] - x[0])
    i_left = int(round(x[0] / h))
    grid = Grid(h=h, i_left=i_left, i_right=i_left + len(x) - 1).with_breaks(config.breakpoints)
    values = frame["q"].to_numpy() if "q" in frame else frame["re_q"].to_numpy() + 1j * frame["im_q"].to_numpy()
    return PotentialSpec.from_samples(grid, values, label=Path(config.potential_samples).name)


def build_powers(config: JobConfig, q: PotentialSpec) -> FormalPowersTable:
    grid = Grid.symmetric(config.b, config.M).with_breaks(q.breakpoints)
    return formal_powers_for(q, grid, K_max=config.K_max)


def build_kernel(config: JobConfig, powers: FormalPowersTable, rep: RepresentationName) -> KernelCoefficients:
    if rep == RepresentationName.LEGENDRE:
        return build_beta(powers, config.N)
    beta_kernel = build_beta(powers, config.N)
    if rep == RepresentationName.LAGUERRE:
        return build_a(powers, config.N, beta_kernel=beta_kernel)
    return build_c(powers, config.N, beta_kernel=beta_kernel)


def _x_values(config: JobConfig) -> np.ndarray:
    if config.x is not None:
        return np.asarray(config.x, dtype=float)
    return np.linspace(0.0, config.b, config.x_points)


def _batches(items: Sequence[complex], parts: int) -> List[List[complex]]:
    parts = max(1, min(parts, len(items)))
    return [list(chunk) for chunk in np.array_split(np.asarray(items, dtype=complex), parts) if chunk.size]


def solution_table(kern: KernelCoefficients, rep: RepresentationName,
                   omegas: Sequence[complex], xs: np.ndarray) -> pd.DataFrame:
    """u_N over (omega, x) for any representation, batched over a thread pool"""
    if rep == RepresentationName.LEGENDRE:
        batches = _batches(omegas, get_settings().threads)
        with ThreadPoolExecutor(max_workers=len(batches)) as pool:
            frames = list(pool.map(lambda batch: solution_frame(kern, batch, xs), batches))
        return pd.concat(frames, ignore_index=True)

    solve = solve_u_laguerre if rep == RepresentationName.LAGUERRE else solve_u_hermite
    rows = []
    for w in omegas:
        u = np.atleast_1d(solve(kern, w, xs))
        for x, value in zip(xs, u):
            rows.append({
                "re_omega": w.real, "im_omega": w.imag, "x": x,
                "re_u": value.real, "im_u": value.imag,
                "tail": float(kern.tail_estimate(x)),
                "bound": kern.error_bound(x, w),
            })
    return pd.DataFrame(rows)


def run_solve(config: JobConfig, q: PotentialSpec, storage: ResultsStorage) -> None:
    powers = _stage(storage, "formal_powers", build_powers, config, q)
    kern = _stage(storage, "kernel", build_kernel, config, powers, config.representation)
    frame = _stage(storage, "solve", solution_table, kern, config.representation,
                   config.omega.omegas(), _x_values(config))
    storage.write_frame("solution", frame)
    storage.record_certificate("max_tail", float(frame["tail"].max()))
    storage.record_certificate("max_bound", float(frame["bound"].max()))


def run_kernel(config: JobConfig, q: PotentialSpec, storage: ResultsStorage) -> None:
    powers = _stage(storage, "formal_powers", build_powers, config, q)
    kern = _stage(storage, "kernel", build_kernel, config, powers, config.representation)
    storage.write_frame("formal_powers", powers.to_frame())
    storage.write_frame(f"kernel_{config.representation.value}", kern.to_frame())
    storage.write_frame("tail", pd.DataFrame({"x": kern.grid.points, "tail": kern.tail}))
    storage.record_certificate("max_tail", float(np.max(kern.tail)))
    storage.record_certificate("kernel_stats", kern.get_stats())


def run_eigen(config: JobConfig, q: PotentialSpec, storage: ResultsStorage) -> None:
    spec = config.eigen
    bc = spec.boundary
    problem = SpectralProblem(
        q=q, b=config.b,
        boundary=RobinCondition(bc.alpha, bc.beta, bc.gamma, bc.delta),
        omega_min=spec.omega_min, omega_max=spec.omega_max, scan_density=spec.scan_density,
    )
    kern = _stage(storage, "kernel", build_spectral_kernel, problem, config.M, config.N)
    pairs = _stage(storage, "eigen", find_eigenvalues, problem, kern, spec.count, None,
                   spec.certify, spec.residual_tol)
    storage.write_frame("eigenvalues", eigen_frame(pairs))
    if spec.eigenfunctions:
        storage.write_frame("eigenfunctions", eigenfunction_frame(pairs))
    if pairs:
        storage.record_certificate("max_residual", max(p.residual for p in pairs))
    if pairs and spec.certify:
        storage.record_certificate("max_certificate", max(p.certificate for p in pairs))
        storage.record_certificate("max_oracle_mismatch", max(p.oracle_mismatch for p in pairs))


def _domain(config: JobConfig) -> PlanarDomain:
    d = config.pde.domain
    if d.shape == "disk":
        return PlanarDomain.disk(complex(*d.center), d.radius)
    return PlanarDomain.rectangle(d.x0, d.x1, d.y0, d.y1)


def _field_points(domain: PlanarDomain, count: int):
    lo, hi = domain.x_extent
    if domain.shape == "rectangle":
        ys = np.linspace(domain.y0, domain.y1, count)
    else:
        ys = np.linspace(domain.center.imag - domain.radius, domain.center.imag + domain.radius, count)
    X, Y = np.meshgrid(np.linspace(lo, hi, count), ys, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    if domain.shape == "disk":
        inside = np.abs(x + 1j * y - domain.center) <= domain.radius
        x, y = x[inside], y[inside]
    return x, y


def run_pde(config: JobConfig, q: PotentialSpec, storage: ResultsStorage) -> None:
    spec = config.pde
    domain = _domain(config)
    data = parse_expression(spec.boundary_data, PLANE_VARIABLES)
    powers = _stage(storage, "formal_powers", build_powers, config, q)
    if spec.method == "family":
        solution = _stage(storage, "pde", solve_dirichlet, powers, domain, data, spec.members, spec.points)
    else:
        kern = _stage(storage, "kernel", build_beta, powers, config.N)
        sources = (np.array([complex(a, c) for a, c in spec.sources]) if spec.sources is not None
                   else default_sources(domain, spec.source_count, spec.source_radius_factor))
        solution = _stage(storage, "pde", mfs_solve, kern, domain, data, sources, spec.points)

    x, y = _field_points(domain, spec.field_points)
    u = solution(x, y)
    frame = pd.DataFrame({"x": x, "y": y, "re_u": u.real, "im_u": u.imag})
    if spec.exact is not None:
        exact = parse_expression(spec.exact, PLANE_VARIABLES)(x, y)
        frame["error"] = np.abs(u - exact)
        storage.record_certificate("max_field_error", float(frame["error"].max()))
    storage.write_frame("pde_field", frame)
    storage.record_certificate("boundary_residual", solution.boundary_residual)
    storage.record_certificate("condition_estimate", solution.condition_estimate)


def run_compare(config: JobConfig, q: PotentialSpec, storage: ResultsStorage) -> None:
    """All three representations and the oracle side by side, with pairwise deltas"""
    powers = _stage(storage, "formal_powers", build_powers, config, q)
    beta_kernel = _stage(storage, "kernel", build_beta, powers, config.N)
    kernels = {
        "legendre": beta_kernel,
        "laguerre": _stage(storage, "kernel_laguerre", build_a, powers, config.N, "projection",
                           beta_kernel=beta_kernel),
        "hermite": _stage(storage, "kernel_hermite", build_c, powers, config.N, "projection",
                          beta_kernel=beta_kernel),
    }
    xs = _x_values(config)
    columns: Dict[str, List[float]] = {"re_omega": [], "im_omega": [], "x": []}
    values: Dict[str, List[complex]] = {name: [] for name in (*kernels, "oracle")}
    storage.start_stage("compare")
    for w in config.omega.omegas():
        for name, kern in kernels.items():
            values[name].extend(_safe_solve(name, kern, w, xs))
        values["oracle"].extend(ode_oracle(q, w, float(x)).u for x in xs)
        columns["re_omega"].extend([w.real] * xs.size)
        columns["im_omega"].extend([w.imag] * xs.size)
        columns["x"].extend(xs)
    storage.finish_stage("compare")

    frame = pd.DataFrame(columns)
    arrays = {name: np.asarray(v, dtype=complex) for name, v in values.items()}
    for name, arr in arrays.items():
        frame[f"re_u_{name}"] = arr.real
        frame[f"im_u_{name}"] = arr.imag
    names = list(arrays)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            frame[f"d_{a}_{b}"] = np.abs(arrays[a] - arrays[b])
    storage.write_frame("compare", frame)
    for name in kernels:
        storage.record_certificate(f"max_delta_{name}_oracle", float(np.nanmax(frame[f"d_{name}_oracle"])))


def _safe_solve(name: str, kern: KernelCoefficients, omega: complex, xs: np.ndarray) -> List[complex]:
    """Representation values, NaN where the representation is undefined"""
    solver = {"legendre": solution_frame, "laguerre": solve_u_laguerre, "hermite": solve_u_hermite}[name]
    if name == "legendre":
        frame = solver(kern, [omega], xs)
        return list(frame["re_u"].to_numpy() + 1j * frame["im_u"].to_numpy())
    out = []
    for x in xs:
        try:
            out.append(complex(solver(kern, omega, x)))
        except DomainError as err:
            logger.debug(f"{name} undefined at omega={omega}, x={x}: {err}")
            out.append(complex(np.nan, np.nan))
    return out


def run_bench(config: JobConfig, q: PotentialSpec, storage: ResultsStorage) -> None:
    spec = config.bench
    accuracy = _stage(storage, "bench_accuracy", benchmark.accuracy_table, q, config.b, config.M,
                      spec.orders, spec.omegas, spec.x_points, spec.repeats)
    eigen = _stage(storage, "bench_eigen", benchmark.eigen_table, q, config.b, config.M, config.N,
                   spec.eigen_indices, spec.shooting_steps)
    scaling = _stage(storage, "bench_scaling", benchmark.build_scaling_table, q, config.b,
                     spec.grid_sizes, config.N, spec.repeats)
    storage.write_frame("bench_accuracy", accuracy)
    storage.write_frame("bench_eigen", eigen)
    storage.write_frame("bench_scaling", scaling)
    for line in benchmark.summarize(accuracy, eigen, scaling):
        print(line)


RUNNERS = {
    Task.SOLVE: run_solve,
    Task.KERNEL: run_kernel,
    Task.EIGEN: run_eigen,
    Task.PDE: run_pde,
    Task.COMPARE: run_compare,
    Task.BENCH: run_bench,
}


def _stage(storage: ResultsStorage, stage: str, fn, *args, **kwargs):
    storage.start_stage(stage)
    try:
        return fn(*args, **kwargs)
    except TransmutationError as err:
        raise err.with_stage(stage)
    finally:
        storage.finish_stage(stage)


def run_job(config: JobConfig, strict: bool = False) -> int:
    """Execute the pipeline for one job; returns the process exit code"""
    storage = ResultsStorage(config.out)
    storage.record_config(config.model_dump(mode="json"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NumericalWarning)
        try:
            q = _stage(storage, "potential", build_potential, config)
            RUNNERS[config.task](config, q, storage)
        except TransmutationError as err:
            logger.error(f"❌ {config.task.value} failed in stage {err.stage}: {err}")
            storage.write_manifest(EXIT_ERROR, error=f"{type(err).__name__} [{err.stage}]: {err}")
            return EXIT_ERROR

    messages = [f"{w.category.__name__}: {w.message}" for w in caught if issubclass(w.category, NumericalWarning)]
    storage.record_warnings(messages)
    for message in messages:
        logger.warning(f"⚠️ {message}")
    status = EXIT_WARNINGS if strict and messages else EXIT_OK
    storage.write_manifest(status)
    if status == EXIT_OK:
        logger.info(f"✅ {config.task.value} finished; outputs in {storage.out_dir}")
    return status


# =============================================================================
# argument parsing
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transmute",
        description="Transmutation-kernel solutions, spectra and planar solution families. "
                    "Precedence: command-line flag > JSON config field > built-in default.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON job document")
    common.add_argument("--q", help="potential q(x), e.g. 'exp(x)'")
    common.add_argument("--b", type=float, help="interval half-length (or length for eigen)")
    common.add_argument("--N", type=int, help="truncation order")
    common.add_argument("--M", type=int, help="grid intervals (even)")
    common.add_argument("--rep", choices=[r.value for r in RepresentationName], help="representation")
    common.add_argument("--out", help="output directory")
    common.add_argument("--strict", action="store_true", help="exit 3 when numerical warnings were raised")
    common.add_argument("--log-level", help="override TRANSMUTE_LOG_LEVEL")

    for task in Task:
        cmd = sub.add_parser(task.value, parents=[common], help=f"run a {task.value} job")
        if task in (Task.SOLVE, Task.COMPARE):
            cmd.add_argument("--omega", type=float, nargs="+", help="real omega values")
        if task == Task.EIGEN:
            cmd.add_argument("--count", type=int, help="number of eigenvalues")
    sub.add_parser("schema", help="print the JSON schema of job documents")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "task": args.command,
        "potential": args.q,
        "b": args.b,
        "N": args.N,
        "M": args.M,
        "representation": args.rep,
        "out": args.out,
    }
    if getattr(args, "omega", None):
        overrides["omega"] = {"values": args.omega}
    if getattr(args, "count", None):
        overrides["eigen"] = {"count": args.count}
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function for running jobs"""
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(config_schema(), indent=2))
        return EXIT_OK

    configure_logging(args.log_level)
    try:
        config = load_config(args.config, overrides_from_args(args))
    except ValidationError as err:
        logger.error(f"❌ Invalid job configuration:\n{err}")
        return EXIT_ERROR
    except (OSError, json.JSONDecodeError) as err:
        logger.error(f"❌ Cannot read job configuration: {err}")
        return EXIT_ERROR
    return run_job(config, strict=args.strict)


if __name__ == "__main__":
    sys.exit(main())
