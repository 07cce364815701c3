"""Uniform square grids, nodal density fields, and open 1D quadrature rules.

All quadrature rules here are *open*: their nodes are strictly interior to
the integration interval.  This matters because the diffusion matrix of the
target problem class degenerates on the domain boundary, so integrands may
be singular (0/0) there and must never be evaluated at interval endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalEvaluationError


class QuadratureRule(Enum):
    MIDPOINT = "midpoint"
    OPEN_NEWTON_COTES_2 = "open-newton-cotes-2"
    OPEN_NEWTON_COTES_4 = "open-newton-cotes-4"
    OPEN_NEWTON_COTES_6 = "open-newton-cotes-6"
    GAUSS_LEGENDRE_8 = "gauss-legendre-8"


# Short aliases used by the CLI and in scheme labels (SP_2, SP_4, SP_6, SP_G).
RULE_ALIASES = {
    "mid": QuadratureRule.MIDPOINT,
    "nc2": QuadratureRule.OPEN_NEWTON_COTES_2,
    "nc4": QuadratureRule.OPEN_NEWTON_COTES_4,
    "nc6": QuadratureRule.OPEN_NEWTON_COTES_6,
    "gauss8": QuadratureRule.GAUSS_LEGENDRE_8,
}


def parse_rule(name: str) -> QuadratureRule:
    key = name.strip().lower()
    if key in RULE_ALIASES:
        return RULE_ALIASES[key]
    for rule in QuadratureRule:
        if rule.value == key:
            return rule
    raise ConfigurationError(f"unknown quadrature rule {name!r}; expected one of "
                             f"{sorted(RULE_ALIASES)} or the long rule names")


def _gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# Unit-interval node fractions and weights (weights sum to 1).  The open
# Newton-Cotes tables are fixed by moment matching: n equispaced interior
# nodes k/(n+1), weights solving the Vandermonde moment system exactly.
# Exactness degrees: midpoint 1, nc2 1, nc4 3, nc6 5, gauss8 15.
_UNIT_RULES: dict[QuadratureRule, tuple[np.ndarray, np.ndarray]] = {
    QuadratureRule.MIDPOINT: (
        np.array([0.5]),
        np.array([1.0]),
    ),
    QuadratureRule.OPEN_NEWTON_COTES_2: (
        np.array([1.0, 2.0]) / 3.0,
        np.array([0.5, 0.5]),
    ),
    QuadratureRule.OPEN_NEWTON_COTES_4: (
        np.array([1.0, 2.0, 3.0, 4.0]) / 5.0,
        np.array([11.0, 1.0, 1.0, 11.0]) / 24.0,
    ),
    QuadratureRule.OPEN_NEWTON_COTES_6: (
        np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]) / 7.0,
        np.array([611.0, -453.0, 562.0, 562.0, -453.0, 611.0]) / 1440.0,
    ),
    QuadratureRule.GAUSS_LEGENDRE_8: _gauss_legendre_unit(8),
}

EXACTNESS_DEGREE = {
    QuadratureRule.MIDPOINT: 1,
    QuadratureRule.OPEN_NEWTON_COTES_2: 1,
    QuadratureRule.OPEN_NEWTON_COTES_4: 3,
    QuadratureRule.OPEN_NEWTON_COTES_6: 5,
    QuadratureRule.GAUSS_LEGENDRE_8: 15,
}


def unit_rule(rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Node fractions t in (0,1) and weights u with sum(u) = 1."""
    try:
        t, u = _UNIT_RULES[rule]
    except KeyError:  # pragma: no cover - enum is closed
        raise ConfigurationError(f"unknown rule kind {rule!r}")
    return t, u


def nodes_and_weights(rule: QuadratureRule, lo: float, hi: float) -> list[tuple[float, float]]:
    """Quadrature nodes and weights on (lo, hi); weights sum to hi - lo."""
    if not lo < hi:
        raise ConfigurationError(f"need lo < hi, got [{lo}, {hi}]")
    t, u = unit_rule(rule)
    h = hi - lo
    return [(lo + h * tk, h * uk) for tk, uk in zip(t, u)]


def integrate_1d(fn: Callable[[float], float], lo: float, hi: float,
                 rule: QuadratureRule) -> float:
    """Apply `rule` to fn on (lo, hi).

    Exact for polynomials up to the rule's algebraic degree.  Raises
    NumericalEvaluationError (carrying the node) if fn is non-finite at
    any node.
    """
    total = 0.0
    for node, weight in nodes_and_weights(rule, lo, hi):
        value = fn(node)
        if not np.isfinite(value):
            raise NumericalEvaluationError(
                f"integrand evaluated to {value!r} at node {node}", location=node)
        total += weight * value
    return total


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid on the square [a, b]^2 with N cells per direction.

    Nodes w_i = a + i*dw for i = 0..N (N+1 per direction); interface
    midpoints w_{i+1/2} = a + (i+1/2)*dw lie strictly inside (a, b).
    """

    a: float
    b: float
    N: int
    dw: float = field(init=False)

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError(f"need at least one cell, got N={self.N}")
        if not self.a < self.b:
            raise ConfigurationError(f"need a < b, got [{self.a}, {self.b}]")
        object.__setattr__(self, "dw", (self.b - self.a) / self.N)

    @property
    def n_nodes(self) -> int:
        return self.N + 1

    def nodes(self) -> np.ndarray:
        return self.a + self.dw * np.arange(self.N + 1)

    def midpoints(self) -> np.ndarray:
        return self.a + self.dw * (np.arange(self.N) + 0.5)

    def node_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """X[i, j], Y[i, j] node coordinate arrays (index i along x)."""
        w = self.nodes()
        return np.meshgrid(w, w, indexing="ij")

    def contains(self, wx: float, wy: float) -> bool:
        return self.a <= wx <= self.b and self.a <= wy <= self.b


@dataclass
class DensityField:
    """Nodal values f[i, j] on the (N+1) x (N+1) grid, i along x, j along y."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.N + 1, self.grid.N + 1)
        if self.values.shape != expected:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid {expected}")

    def copy(self) -> "DensityField":
        return DensityField(self.grid, self.values.copy())

    def mass(self) -> float:
        return self.grid.dw ** 2 * float(self.values.sum())

    def normalized(self) -> "DensityField":
        m = self.mass()
        if m <= 0:
            raise DomainError(f"cannot normalize field with nonpositive mass {m}")
        return DensityField(self.grid, self.values / m)


def trapezoid_weights(N: int) -> np.ndarray:
    """2D trapezoidal nodal weights: 1 interior, 1/2 edges, 1/4 corners."""
    c1 = np.ones(N + 1)
    c1[0] = c1[-1] = 0.5
    return np.outer(c1, c1)
