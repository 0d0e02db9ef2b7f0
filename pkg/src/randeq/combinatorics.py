"""Exact counting of mode-combination equation systems and the L/ln(L) cost model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


def count_systems(l_a: Sequence[int], l_b: Sequence[int]) -> int:
    """Number of deterministic systems ``#P * #Q`` spanned by the mixture components.

    ``l_a`` holds the component count of every parameter slot, ``l_b`` that of
    every right-hand side (empty for implicit equations).
    """
    counts = list(l_a) + list(l_b)
    if any(int(c) < 1 for c in counts):
        raise ValueError("component counts must be >= 1")
    return math.prod(int(c) for c in counts)


def count_partitioned(k_r: Sequence[int], l_a: Sequence[int], l_b: Sequence[int]) -> tuple[int, int]:
    """Systems and distinct equations of a partitioned system.

    ``k_r`` gives the block size of each equation, ``l_a`` the component
    count of every slot in block order (``len(l_a) == sum(k_r)``), ``l_b``
    one count per equation. Returns ``(systems, distinct_equations)``.
    """
    if len(k_r) != len(l_b):
        raise ValueError("need one right-hand-side count per equation")
    if sum(k_r) != len(l_a):
        raise ValueError(f"block sizes sum to {sum(k_r)} but {len(l_a)} slot counts were given")
    if any(int(c) < 1 for c in list(l_a) + list(l_b)) or any(k < 0 for k in k_r):
        raise ValueError("component counts must be >= 1")
    systems, distinct, start = 1, 0, 0
    for k, lb in zip(k_r, l_b):
        per_eq = math.prod(int(c) for c in l_a[start:start + k]) * int(lb)
        systems *= per_eq
        distinct += per_eq
        start += k
    return systems, distinct


def format_scientific(n: int, digits: int = 2) -> str:
    """Render a non-negative big integer as ``m.mm·10^e`` without going through float."""
    if n < 0:
        return "-" + format_scientific(-n, digits)
    s = str(n)
    exp = len(s) - 1
    if exp < 3:
        return s
    # round on the decimal digit string
    head = int(s[:digits + 1])
    if int(s[digits + 1:digits + 2] or 0) >= 5:
        head += 1
    if head >= 10 ** (digits + 1):
        head //= 10
        exp += 1
    mant = str(head)
    return f"{mant[0]}.{mant[1:]}e{exp}" if digits else f"{mant[0]}e{exp}"


@dataclass(frozen=True)
class CostModelInput:
    L: int
    K_r: int
    T: float
    S: int = 1

    def __post_init__(self):
        if self.L < 2 or self.T <= 1 or self.S < 1 or self.K_r < 1:
            raise ValueError("cost model needs L >= 2, T > 1, S >= 1, K_r >= 1")

    @property
    def equations(self) -> float:
        """Equation count ``R`` that spans ``T`` combinations with ``L`` components each."""
        return math.log(self.T) / ((self.K_r + 1) * math.log(self.L))

    @property
    def evaluations(self) -> float:
        """Sampling evaluations ``K * L * S`` with ``K = R * K_r``."""
        return self.K_r * self.L * self.S * math.log(self.T) / ((self.K_r + 1) * math.log(self.L))


def cost_overhead(L: int) -> float:
    """Relative evaluation overhead of ``L`` components against the optimum ``L = 3``."""
    if L < 2:
        raise ValueError("L must be >= 2")
    return (L / math.log(L)) / (3.0 / math.log(3.0)) - 1.0
