"""Likelihood and posterior intensity maps over a rectangular solution grid.

The likelihood of ``x`` is the density of ``M(x; A) - B`` at zero, estimated
by Monte Carlo over one fixed sample set of the parameters ``A``::

    L(x) ~ 1/N sum_n prod_r f_Br(M_r(x; s_n))

For systems whose equations read disjoint parameter blocks the integral
factorises into a product of per-equation averages (the partitioned
estimator). Posteriors multiply by a prior and normalise on the grid.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _kernels
from .equations import FAMILY_CODES, EquationSystem
from .errors import AtomEvaluation, NotPartitioned, ZeroPosterior
from .mixture import ATOM, GAUSSIAN, UNIFORM, MixtureDensity, SampleSet, sample_joint

DEFAULT_SAMPLES = 200_000
DEFAULT_PINHOLE_TAU = 8.0
# implicit right-hand sides get this fraction of the grid extent as width
EPSILON_GRID_FRACTION = 1e-2


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred rectangular grid in 1 to 3 dimensions."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        cells = tuple(int(c) for c in self.cells)
        if not (len(lo) == len(hi) == len(cells)) or not 1 <= len(lo) <= 3:
            raise ValueError("grid needs matching lo/hi/cells of dimension 1, 2 or 3")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("grid bounds need lo < hi")
        if any(c < 2 for c in cells):
            raise ValueError("grid needs at least 2 cells per dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def square(cls, lo: float, hi: float, cells: int, dim: int = 2) -> "GridSpec":
        return cls((lo,) * dim, (hi,) * dim, (cells,) * dim)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return math.prod(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / c for a, b, c in zip(self.lo, self.hi, self.cells))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def domain_volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lo, self.hi))

    @property
    def extent(self) -> float:
        return max(b - a for a, b in zip(self.lo, self.hi))

    def axes(self) -> list[np.ndarray]:
        return [a + (np.arange(c) + 0.5) * h for a, c, h in zip(self.lo, self.cells, self.spacing)]

    def points(self) -> np.ndarray:
        """Cell centres as a ``(size, dim)`` array in row-major (C) order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.ascontiguousarray(np.stack([m.ravel() for m in mesh], axis=1))

    def point(self, index) -> tuple[float, ...]:
        return tuple(a + (i + 0.5) * h for a, i, h in zip(self.lo, index, self.spacing))

    def index_of(self, point) -> tuple[int, ...]:
        """Index of the cell containing ``point`` (clamped to the grid)."""
        return tuple(
            int(min(max(math.floor((p - a) / h), 0), c - 1))
            for p, a, h, c in zip(point, self.lo, self.spacing, self.cells)
        )

    def contains(self, point) -> bool:
        return all(a <= p < b for p, a, b in zip(point, self.lo, self.hi))

    def cell_distance(self, p, q) -> int:
        """Chebyshev distance between the cells holding two points."""
        return max(abs(i - j) for i, j in zip(self.index_of(p), self.index_of(q)))

    def with_cells(self, cells) -> "GridSpec":
        if isinstance(cells, int):
            cells = (cells,) * self.dim
        return GridSpec(self.lo, self.hi, tuple(cells))


@dataclass(frozen=True)
class IntensityMap:
    """Likelihood or posterior values at the cell centres of ``grid``."""

    grid: GridSpec
    values: np.ndarray
    kind: str = "likelihood"
    normalized: bool = False
    normalization: float | None = None

    def __post_init__(self):
        if self.kind not in ("likelihood", "posterior", "histogram"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        object.__setattr__(self, "values", values)

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def unit_mass(self) -> np.ndarray:
        """Values rescaled to integrate to one over the grid."""
        m = self.mass()
        if m <= 0:
            raise ZeroPosterior("map has no mass")
        return self.values / m

    def peak_normalized(self) -> np.ndarray:
        peak = self.values.max()
        if peak <= 0:
            raise ZeroPosterior("map is identically zero")
        return self.values / peak


# -- priors -----------------------------------------------------------------

PRIOR_KINDS = ("constant", "disc", "box", "simplex_interior", "discrete_grid")


@dataclass(frozen=True)
class Prior:
    """Solution-space prior.

    ``disc``: ``center``, ``radius``. ``box``: ``lo``, ``hi``.
    ``simplex_interior``: ``x_i > 0`` and ``sum(x) < 1``.
    ``discrete_grid``: gaussian bumps of width ``scale`` on the lattice
    ``center + step * k``; ``C`` limits ``|k_i| <= C`` (unbounded if absent).
    """

    kind: str = "constant"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        p = self.params
        if self.kind == "disc" and (p.get("radius", 0) <= 0 or "center" not in p):
            raise ValueError("disc prior needs a center and a positive radius")
        if self.kind == "box" and ("lo" not in p or "hi" not in p):
            raise ValueError("box prior needs lo and hi")
        if self.kind == "discrete_grid" and p.get("step", 1.0) <= 0:
            raise ValueError("discrete_grid prior needs a positive step")

    def density(self, points: np.ndarray, grid: GridSpec) -> np.ndarray:
        points = np.atleast_2d(points)
        n = points.shape[1]
        p = self.params
        if self.kind == "constant":
            return np.full(points.shape[0], 1.0 / grid.domain_volume)
        if self.kind == "disc":
            center = np.asarray(p["center"], dtype=float)
            c = float(p["radius"])
            ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * c**n
            inside = np.linalg.norm(points - center, axis=1) < c
            return np.where(inside, 1.0 / ball, 0.0)
        if self.kind == "box":
            lo = np.asarray(p["lo"], dtype=float)
            hi = np.asarray(p["hi"], dtype=float)
            inside = np.all((points > lo) & (points < hi), axis=1)
            return np.where(inside, 1.0 / float(np.prod(hi - lo)), 0.0)
        if self.kind == "simplex_interior":
            inside = np.all(points > 0, axis=1) & (points.sum(axis=1) < 1)
            return np.where(inside, float(math.factorial(n)), 0.0)
        return self._lattice_density(points, grid)

    def _lattice_density(self, points, grid):
        p = self.params
        n = points.shape[1]
        step = float(p.get("step", 1.0))
        scale = float(p.get("scale", 0.1 * step))
        center = np.broadcast_to(np.asarray(p.get("center", 0.0), dtype=float), (n,))
        out = np.ones(points.shape[0])
        n_nodes = 1
        for d in range(n):
            if "C" in p:
                ks = np.arange(-int(p["C"]), int(p["C"]) + 1)
            else:
                k_lo = math.ceil((grid.lo[d] - 4 * scale - center[d]) / step)
                k_hi = math.floor((grid.hi[d] + 4 * scale - center[d]) / step)
                ks = np.arange(k_lo, k_hi + 1)
            nodes = center[d] + step * ks
            z = (points[:, d, None] - nodes[None, :]) / scale
            out *= np.exp(-0.5 * z * z).sum(axis=1) / (scale * math.sqrt(2 * math.pi))
            n_nodes *= max(len(ks), 1)
        return out / n_nodes


# -- pinhole ------------------------------------------------------------------

def apply_pinhole(b_density: MixtureDensity, threshold: float = DEFAULT_PINHOLE_TAU) -> Callable:
    """Predicate telling whether ``f_B(arg)`` needs evaluating.

    True when ``arg`` lies within ``threshold`` standard deviations of a
    gaussian component or inside a uniform component's support.
    """
    if threshold <= 0:
        raise ValueError("pinhole threshold must be positive")
    kinds, locs, scales = b_density.kinds, b_density.locations, b_density.scales
    reach = np.where(kinds == GAUSSIAN, threshold * scales, np.where(kinds == UNIFORM, scales, 0.0))

    def predicate(arg):
        arg = np.asarray(arg, dtype=float)
        hit = np.abs(arg[..., None] - locs) <= reach
        out = hit.any(axis=-1)
        return out if out.ndim else bool(out)

    return predicate


# -- estimators ---------------------------------------------------------------

def _threads():
    raw = os.environ.get("RANDEQ_THREADS")
    if raw:
        import numba

        numba.set_num_threads(max(1, min(int(raw), numba.config.NUMBA_NUM_THREADS)))


def _check_rhs(b_densities):
    for r, d in enumerate(b_densities):
        if d.has_atoms:
            raise AtomEvaluation(f"right-hand side {r} has atom components; widen them first")


def _tau(value):
    return math.inf if value is None else float(value)


def draw_samples(scenario, n: int | None = None, seed: int | None = None) -> SampleSet:
    """The joint LHS sample set of all parameter slots for ``scenario``."""
    cfg = scenario.sampling
    return sample_joint(scenario.a_densities, cfg.n if n is None else n, cfg.seed if seed is None else seed)


def _evaluate(scenario, grid, samples, tau, partitioned, engine):
    system: EquationSystem = scenario.system
    grid = scenario.grid if grid is None else grid
    if samples is None:
        samples = draw_samples(scenario)
    s = samples.values
    if s.ndim != 2 or s.shape[1] != system.k_total:
        raise ValueError(f"samples have shape {s.shape}, expected (N, {system.k_total})")
    _check_rhs(scenario.b_densities)
    points = grid.points()
    if engine == "auto":
        engine = "numpy" if system.family == "custom" else "compiled"
    if engine == "compiled":
        values = _evaluate_compiled(system, scenario.b_densities, points, s, tau, partitioned)
    elif engine == "numpy":
        values = _evaluate_numpy(system, scenario.b_densities, points, s, tau, partitioned)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return IntensityMap(grid, values.reshape(grid.shape), "likelihood")


def _evaluate_compiled(system, b_densities, points, samples, tau, partitioned):
    _threads()
    starts = np.array([system.block(r)[0] for r in range(system.r_count)], dtype=np.int64)
    sizes = np.array([system.block(r)[1] for r in range(system.r_count)], dtype=np.int64)
    packed = _kernels.pack_densities(b_densities, tau)
    out = np.empty(points.shape[0])
    kernel = _kernels.partitioned_kernel if partitioned else _kernels.joint_kernel
    with warnings.catch_warnings():
        # numba probes for a newer TBB than some systems ship and falls back quietly
        warnings.filterwarnings("ignore", message=".*TBB.*")
        kernel(FAMILY_CODES[system.family], system.kernel_params(), points,
               np.ascontiguousarray(np.asarray(samples, dtype=float).T), starts, sizes, *packed, tau, out)
    return out


def factor_values(system, b_densities, x, samples, r, tau=math.inf):
    """Per-sample values ``f_Br(M_r(x; s_n))`` with per-component pinhole truncation."""
    start, size = system.block(r)
    m = system.residuals(r, x, samples[:, start:start + size])
    d = b_densities[r]
    out = np.zeros(m.shape)
    for k, loc, sc, w in zip(d.kinds, d.locations, d.scales, d.weights):
        z = (m - loc) / sc
        if k == GAUSSIAN:
            out += np.where(np.abs(z) <= tau, w * np.exp(-0.5 * z * z) / (sc * math.sqrt(2 * math.pi)), 0.0)
        elif k == UNIFORM:
            out += np.where(np.abs(z) <= 1.0, w / (2.0 * sc), 0.0)
        elif k == ATOM:
            raise AtomEvaluation("right-hand side atoms cannot be evaluated")
    return out


def _evaluate_numpy(system, b_densities, points, samples, tau, partitioned):
    out = np.empty(points.shape[0])
    for i, x in enumerate(points):
        factors = [factor_values(system, b_densities, x, samples, r, tau) for r in range(system.r_count)]
        if partitioned:
            out[i] = math.prod(float(f.mean()) for f in factors)
        else:
            out[i] = float(np.prod(factors, axis=0).mean())
    return out


def likelihood_map(scenario, grid: GridSpec | None = None, samples: SampleSet | None = None, *,
                   pinhole_tau: float | None | str = "scenario", engine: str = "auto") -> IntensityMap:
    """Joint Monte Carlo likelihood over ``grid`` with one shared sample set.

    ``pinhole_tau`` defaults to the scenario's setting; ``None`` disables
    the pinhole.
    """
    tau = scenario.sampling.pinhole_tau if pinhole_tau == "scenario" else pinhole_tau
    return _evaluate(scenario, grid, samples, _tau(tau), False, engine)


def likelihood_map_partitioned(scenario, grid: GridSpec | None = None, samples: SampleSet | None = None, *,
                               pinhole_tau: float | None | str = "scenario", engine: str = "auto") -> IntensityMap:
    """Product of per-equation Monte Carlo means; needs disjoint parameter blocks."""
    if not scenario.system.is_partitioned:
        raise NotPartitioned("equations share a joint parameter block")
    tau = scenario.sampling.pinhole_tau if pinhole_tau == "scenario" else pinhole_tau
    return _evaluate(scenario, grid, samples, _tau(tau), True, engine)


def estimate_likelihood(scenario, grid=None, samples=None, **kw) -> IntensityMap:
    """Dispatch on the scenario's ``partitioned`` sampling flag."""
    if scenario.sampling.partitioned:
        return likelihood_map_partitioned(scenario, grid, samples, **kw)
    return likelihood_map(scenario, grid, samples, **kw)


def posterior_map(lik: IntensityMap, prior: Prior) -> IntensityMap:
    """Pointwise likelihood times prior, normalised to unit mass on the grid."""
    if lik.kind != "likelihood":
        raise ValueError("posterior_map expects a likelihood map")
    grid = lik.grid
    prior_values = prior.density(grid.points(), grid).reshape(grid.shape)
    product = lik.values * prior_values
    z = float(product.sum() * grid.cell_volume)
    if not z > 0:
        raise ZeroPosterior("prior support does not overlap the likelihood on this grid")
    return IntensityMap(grid, product / z, "posterior", normalized=True, normalization=z)


# -- point extraction ---------------------------------------------------------

def argmax(imap: IntensityMap) -> tuple[tuple[float, ...], float]:
    """Cell centre and value of the maximum; ties go to the lowest row-major index."""
    flat = int(np.argmax(imap.values))
    index = np.unravel_index(flat, imap.grid.shape)
    return imap.grid.point(index), float(imap.values.flat[flat])


def local_maxima(imap: IntensityMap, rel_threshold: float = 0.0) -> list[tuple[tuple[int, ...], float]]:
    """Strict local maxima (8-neighbourhood in 2-D, 2 neighbours in 1-D).

    Only maxima above ``rel_threshold`` times the global maximum are kept;
    result is sorted by decreasing value.
    """
    v = imap.values
    if v.ndim not in (1, 2):
        raise ValueError("local maxima are defined for 1-D and 2-D maps")
    padded = np.pad(v, 1, constant_values=-np.inf)
    core = tuple(slice(1, -1) for _ in range(v.ndim))
    is_max = np.ones(v.shape, dtype=bool)
    offsets = [(-1,), (1,)] if v.ndim == 1 else [
        (di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)
    ]
    for off in offsets:
        shifted = tuple(slice(1 + o, padded.shape[k] - 1 + o) for k, o in enumerate(off))
        is_max &= padded[core] > padded[shifted]
    is_max &= v > rel_threshold * v.max()
    idx = np.argwhere(is_max)
    found = [(tuple(int(i) for i in row), float(v[tuple(row)])) for row in idx]
    return sorted(found, key=lambda item: -item[1])


def default_epsilon(grid: GridSpec) -> float:
    return EPSILON_GRID_FRACTION * grid.extent
