#!/usr/bin/env python3
"""
Transmutation Kernel - Base Class
Shared container for tabulated kernel coefficients, tail heuristics and CSV dumps
"""

import math
import logging
import warnings
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from numerics import Grid, differentiate, interpolate
from transmutation_errors import DomainError, OrderError, TailStagnant

logger = logging.getLogger(__name__)

TAIL_MARGIN = 8
ROUNDOFF_FLOOR = 1e-13
STAGNANT_FACTOR = 10.0


class Representation(Enum):
    """Kernel expansion families"""
    LEGENDRE = "legendre"
    LAGUERRE = "laguerre"
    HERMITE = "hermite"


class KernelCoefficients:
    """Coefficient family c_n(x), n = 0..N+margin, tabulated on a grid

    Orders above N form the tail window used by ``tail_estimate``.
    Subclasses define the Parseval weights of their expansion system.
    """

    representation: Representation = Representation.LEGENDRE

    def __init__(
        self,
        grid: Grid,
        N: int,
        coefficients: np.ndarray,
        method: str = "",
        f: Optional[np.ndarray] = None,
    ):
        coefficients = np.asarray(coefficients, dtype=complex)
        if coefficients.ndim != 2 or coefficients.shape[1] != len(grid):
            raise DomainError(f"coefficients must have shape (orders, {len(grid)}), got {coefficients.shape}")
        if coefficients.shape[0] < N + 1:
            raise OrderError(f"truncation order {N} needs {N + 1} rows, got {coefficients.shape[0]}")

        self.grid = grid
        self.N = N
        self.margin = coefficients.shape[0] - N - 1
        self.method = method
        self.f = f
        self._table = coefficients
        self._derivative: Optional[np.ndarray] = None

        self.tail, self.tail_stagnant, self.decay_ratio = self._tail_at(grid.points, coefficients)

        # Kernel state
        self.state = {
            "representation": self.representation.value,
            "N": N,
            "margin": self.margin,
            "method": method,
            "grid_intervals": grid.M,
            "evaluations": 0,
            "created_at": datetime.now().isoformat(),
        }

        stagnant = int(np.count_nonzero(self.tail_stagnant))
        logger.info(f"Initialized {self.representation.value} kernel: N={N}, margin={self.margin}, "
                    f"max tail {float(np.max(self.tail)):.3e}")
        if stagnant:
            logger.warning(f"⚠️ {self.representation.value} tail not decreasing at {stagnant} node(s)")

    # ------------------------------------------------------------------
    # coefficient access
    # ------------------------------------------------------------------

    @property
    def coefficients(self) -> np.ndarray:
        return self._table[:self.N + 1]

    @property
    def full_table(self) -> np.ndarray:
        return self._table

    def values_at(self, table: np.ndarray, x) -> np.ndarray:
        """Rows of ``table`` at x: direct lookup on nodes, cubic interpolation otherwise"""
        xs = np.asarray(x, dtype=float)
        if not self.grid.contains(xs):
            raise DomainError(f"x outside the kernel interval [{self.grid.a_left}, {self.grid.a_right}]")
        s = (xs - self.grid.a_left) / self.grid.h
        idx = np.clip(np.rint(s).astype(int), 0, self.grid.M)
        on_node = np.abs(s - idx) <= 1e-9
        if np.all(on_node):
            return table[:, idx]
        return interpolate(table, self.grid, xs)

    def coefficients_at(self, x, include_tail: bool = False) -> np.ndarray:
        table = self._table if include_tail else self.coefficients
        return self.values_at(table, x)

    def derivative_table(self) -> np.ndarray:
        """x-derivative of the first N+1 coefficient rows (five-point differences)"""
        if self._derivative is None:
            self._derivative = differentiate(self.coefficients, self.grid)
        return self._derivative

    # ------------------------------------------------------------------
    # tail heuristic
    # ------------------------------------------------------------------

    def tail_weights(self, x: np.ndarray, orders: np.ndarray) -> np.ndarray:
        """Parseval weights w_n(x) so that the squared norm of the tail is sum w_n |c_n|^2"""
        raise NotImplementedError

    def _tail_at(self, x: np.ndarray, table: np.ndarray):
        orders = np.arange(table.shape[0])
        weighted = np.sqrt(self.tail_weights(x, orders)) * np.abs(table)
        if self.margin == 0:
            zeros = np.zeros(x.shape)
            return zeros, np.zeros(x.shape, dtype=bool), zeros

        head = weighted[:self.N + 1].max(axis=0)
        window = weighted[self.N + 1:]
        window_energy = np.sum(window ** 2, axis=0)
        first, last = window[0], window[-1]

        with np.errstate(divide="ignore", invalid="ignore"):
            span = max(self.margin - 1, 1)
            ratio = np.where(first > 0, (last / first) ** (1.0 / span), 0.0)
        below_floor = window.max(axis=0) <= ROUNDOFF_FLOOR * np.maximum(1.0, head)
        stagnant = (ratio >= 1.0) & ~below_floor & (window_energy > 0)

        ratio_c = np.clip(ratio, 0.0, 0.999)
        beyond = last ** 2 * ratio_c ** 2 / (1.0 - ratio_c ** 2)
        total = np.where(stagnant, window_energy * STAGNANT_FACTOR ** 2, window_energy + beyond)
        return np.sqrt(total), stagnant, ratio

    def tail_estimate(self, x) -> Union[float, np.ndarray]:
        """Heuristic L2 size of the truncated tail at x"""
        xs = np.asarray(x, dtype=float)
        tail, stagnant, _ = self._tail_at(xs.reshape(-1), self.values_at(self._table, xs.reshape(-1)))
        if np.any(stagnant):
            warnings.warn(
                f"{self.representation.value} coefficients not decreasing over orders "
                f"{self.N + 1}..{self.N + self.margin} at {int(np.count_nonzero(stagnant))} point(s); "
                f"raise N or check q",
                TailStagnant, stacklevel=2,
            )
        tail = tail.reshape(xs.shape)
        return float(tail) if tail.ndim == 0 else tail

    # ------------------------------------------------------------------
    # persistence and stats
    # ------------------------------------------------------------------

    def to_frame(self) -> pd.DataFrame:
        """Long-format dump: representation, x, n, re, im (all tabulated orders)"""
        orders, nodes = np.meshgrid(np.arange(self._table.shape[0]), np.arange(len(self.grid)), indexing="ij")
        return pd.DataFrame({
            "representation": self.representation.value,
            "node": (nodes + self.grid.i_left).ravel(),
            "x": self.grid.points[nodes].ravel(),
            "n": orders.ravel(),
            "re": self._table.real.ravel(),
            "im": self._table.imag.ravel(),
        })

    @staticmethod
    def table_from_frame(frame: pd.DataFrame):
        """Inverse of ``to_frame``: (grid, coefficient table)"""
        rows = int(frame["n"].max()) + 1
        nodes = np.sort(frame["node"].unique())
        x_by_node = frame.drop_duplicates("node").set_index("node")["x"]
        far = int(nodes[np.argmax(np.abs(nodes))])
        grid = Grid(h=float(x_by_node[far] / far), i_left=int(nodes[0]), i_right=int(nodes[-1]))
        ordered = frame.sort_values(["n", "node"])
        table = (ordered["re"].to_numpy() + 1j * ordered["im"].to_numpy()).reshape(rows, len(grid))
        return grid, table

    def record_evaluations(self, count: int) -> None:
        self.state["evaluations"] += int(count)

    def get_stats(self) -> Dict[str, Any]:
        """Get kernel statistics"""
        return {
            **self.state,
            "max_tail": float(np.max(self.tail)),
            "stagnant_nodes": int(np.count_nonzero(self.tail_stagnant)),
        }


def log_prefactor(n: int) -> float:
    """log(sqrt(pi) * 2^n * n!)"""
    return 0.5 * math.log(math.pi) + n * math.log(2.0) + math.lgamma(n + 1)
