"""Equation-system families ``M_r(x; s_r)``, mode enumeration and deterministic solving."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .combinatorics import count_systems
from .errors import CombinationOverflow, DimensionMismatch, SingularSystem
from .mixture import MixtureDensity

FAMILIES = ("linear", "conic", "portfolio_gradient", "control_residual", "char_poly", "custom")
FAMILY_CODES = {name: code for code, name in enumerate(FAMILIES)}


def _residual_linear(r, x, s, p):
    return s @ x


def _residual_conic(r, x, s, p):
    x1, x2 = x
    return s[:, 0] * x1 * x1 + s[:, 1] * x1 * x2 + s[:, 2] * x2 * x2 + s[:, 3] * x1 + s[:, 4] * x2


def _residual_portfolio(r, x, s, p):
    mu, lam = p["mu"], p["lambda"]
    c3 = s[:, 2] - mu[2]
    d1 = (s[:, 0] - mu[0]) - c3
    d2 = (s[:, 1] - mu[1]) - c3
    dx = d1 * x[0] + d2 * x[1]
    d_r = d1 if r == 0 else d2
    return (s[:, r] - s[:, 2]) - lam * c3 * d_r - lam * d_r * dx


def _residual_control(r, x, s, p):
    g, a, b = p["gamma"], p["alpha"], p["beta"]
    if r == 0:
        return x[0] + g * x[1] + (1.0 - a) * s[:, 0] + b * s[:, 1]
    return g * x[0] + x[1] - b * s[:, 0] + (1.0 - a) * s[:, 1]


def _residual_char_poly(r, x, s, p):
    a11, a12, a13, a22, a23, a33 = (s[:, k] for k in range(6))
    t = x[0]
    c2 = a11 + a22 + a33
    c1 = a11 * a22 + a11 * a33 + a22 * a33 - a12 * a12 - a13 * a13 - a23 * a23
    c0 = a11 * a22 * a33 + 2.0 * a12 * a23 * a13 - a13 * a13 * a22 - a11 * a23 * a23 - a12 * a12 * a33
    return -t**3 + c2 * t * t - c1 * t + c0


_RESIDUALS = {
    "linear": _residual_linear,
    "conic": _residual_conic,
    "portfolio_gradient": _residual_portfolio,
    "control_residual": _residual_control,
    "char_poly": _residual_char_poly,
}

# (x_dim, equations, block layout) fixed by each non-linear family; None = free
_SHAPES = {
    "conic": (2, None, "conic"),
    "portfolio_gradient": (2, 2, (3,)),
    "control_residual": (2, 2, (2,)),
    "char_poly": (1, 1, (6,)),
}


@dataclass(frozen=True)
class EquationSystem:
    """``R`` scalar equations in ``x_dim`` unknowns.

    ``partition`` lists the block size ``K_r`` read by each equation
    (disjoint blocks), or a single size ``K`` shared by all equations.
    ``custom`` systems supply ``func(r, x, s_block) -> residuals`` where
    ``s_block`` has shape ``(N, K_r)``.
    """

    family: str
    x_dim: int
    r_count: int
    partition: tuple[int, ...]
    params: Mapping = field(default_factory=dict)
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILY_CODES:
            raise ValueError(f"unknown equation family {self.family!r}")
        object.__setattr__(self, "partition", tuple(int(k) for k in self.partition))
        if self.r_count < 1 or self.x_dim < 1:
            raise DimensionMismatch("need at least one equation and one unknown")
        if any(k < 1 for k in self.partition):
            raise DimensionMismatch("block sizes must be positive")
        if len(self.partition) != self.r_count and len(self.partition) != 1:
            raise DimensionMismatch(
                f"partition has {len(self.partition)} blocks for {self.r_count} equations"
            )
        if self.family == "linear":
            if any(k != self.x_dim for k in self.partition):
                raise DimensionMismatch("linear equations read x_dim coefficients each")
        elif self.family == "custom":
            if self.func is None:
                raise ValueError("custom systems need a residual function")
        else:
            n, r, blocks = _SHAPES[self.family]
            if self.x_dim != n or (r is not None and self.r_count != r):
                raise DimensionMismatch(f"{self.family} needs x_dim={n}" + (f", R={r}" if r else ""))
            if blocks == "conic":
                if self.partition != (5,) * self.r_count:
                    raise DimensionMismatch("conic equations read 5 parameters each")
            elif self.partition != blocks:
                raise DimensionMismatch(f"{self.family} uses the block layout {blocks}")
        for key in {"portfolio_gradient": ("mu", "lambda"), "control_residual": ("gamma", "alpha", "beta")}.get(self.family, ()):
            if key not in self.params:
                raise ValueError(f"{self.family} needs parameter {key!r}")

    @property
    def k_total(self) -> int:
        return sum(self.partition)

    @property
    def is_partitioned(self) -> bool:
        return len(self.partition) == self.r_count

    def block(self, r: int) -> tuple[int, int]:
        """``(start, size)`` of the parameter slots read by equation ``r``."""
        if not 0 <= r < self.r_count:
            raise IndexError(r)
        if not self.is_partitioned:
            return 0, self.partition[0]
        return sum(self.partition[:r]), self.partition[r]

    def residuals(self, r: int, x, s_block) -> np.ndarray:
        """``M_r(x; s)`` for every row of ``s_block`` (shape ``(N, K_r)``)."""
        x = np.asarray(x, dtype=float)
        s_block = np.atleast_2d(np.asarray(s_block, dtype=float))
        if x.shape != (self.x_dim,):
            raise DimensionMismatch(f"x has shape {x.shape}, expected ({self.x_dim},)")
        size = self.block(r)[1]
        if s_block.shape[1] != size:
            raise DimensionMismatch(f"equation {r} reads {size} parameters, got {s_block.shape[1]}")
        if self.family == "custom":
            return np.asarray(self.func(r, x, s_block), dtype=float)
        return _RESIDUALS[self.family](r, x, s_block, self.params)

    def kernel_params(self) -> np.ndarray:
        """Flat float parameters consumed by the compiled kernels."""
        p = self.params
        if self.family == "portfolio_gradient":
            return np.array([*p["mu"], p["lambda"]], dtype=float)
        if self.family == "control_residual":
            return np.array([p["gamma"], p["alpha"], p["beta"]], dtype=float)
        return np.zeros(1)


def eval_equation(system: EquationSystem, r: int, x, s_r) -> float:
    return float(system.residuals(r, x, np.asarray(s_r, dtype=float)[None, :])[0])


def linear_system(rows: int, cols: int) -> EquationSystem:
    return EquationSystem("linear", cols, rows, (cols,) * rows)


def conic_system(rows: int) -> EquationSystem:
    return EquationSystem("conic", 2, rows, (5,) * rows)


@dataclass(frozen=True)
class ModeAssignment:
    a_indices: tuple[int, ...]
    b_indices: tuple[int, ...]


def enumerate_modes(
    system: EquationSystem,
    a_densities: Sequence[MixtureDensity],
    b_densities: Sequence[MixtureDensity],
    cap: int = 10**6,
) -> Iterator[ModeAssignment]:
    """All component-index tuples ``P x Q`` in lexicographic order.

    Raises :class:`CombinationOverflow` eagerly when the count exceeds ``cap``.
    """
    if len(a_densities) != system.k_total:
        raise DimensionMismatch(f"{len(a_densities)} parameter densities for {system.k_total} slots")
    la = [d.n_components for d in a_densities]
    lb = [d.n_components for d in b_densities]
    total = count_systems(la, lb)
    if total > cap:
        raise CombinationOverflow(f"{total} mode combinations exceed the cap of {cap}")

    def gen():
        for idx in itertools.product(*(range(n) for n in la + lb)):
            yield ModeAssignment(tuple(idx[:len(la)]), tuple(idx[len(la):]))

    return gen()


def solve_linear_deterministic(a_matrix, b) -> np.ndarray:
    """Solve a square system by Gaussian elimination with partial pivoting."""
    a = np.array(a_matrix, dtype=float)
    rhs = np.array(b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or rhs.shape != (n,):
        raise DimensionMismatch("need a square matrix and a matching right-hand side")
    scale = np.abs(a).max() if a.size else 0.0
    if scale == 0.0:
        raise SingularSystem("zero matrix")
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) < 1e-12 * scale:
            raise SingularSystem(f"pivot {a[piv, col]:.3g} below tolerance in column {col}")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            rhs[[col, piv]] = rhs[[piv, col]]
        f = a[col + 1:, col] / a[col, col]
        a[col + 1:, col:] -= f[:, None] * a[col, col:]
        rhs[col + 1:] -= f * rhs[col]
    x = np.empty(n)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x
