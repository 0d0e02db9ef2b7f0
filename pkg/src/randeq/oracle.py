"""Independent reference computations used to check the Monte Carlo engine.

* exact likelihood of random linear systems with gaussian/atom mixtures,
  obtained by expanding the products of sums into single gaussian terms;
* deterministic solutions for every mode combination of a linear system;
* eigenvalue histograms of random symmetric 3x3 matrices via the
  closed-form trigonometric solution of the characteristic cubic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .equations import enumerate_modes, solve_linear_deterministic
from .errors import (CombinationOverflow, DegenerateVariance, DimensionMismatch, SingularSystem,
                     UnsupportedComponent)
from .inference import GridSpec, IntensityMap
from .mixture import GAUSSIAN, UNIFORM, MixtureDensity, with_random_scales


@dataclass(frozen=True)
class GaussianSumTerm:
    weight: float
    mean: float
    variance: float


def _require_linear(scenario):
    if scenario.system.family != "linear":
        raise DimensionMismatch("oracle needs a linear system")
    for d in (*scenario.a_densities, *scenario.b_densities):
        if d.has_uniform:
            raise UnsupportedComponent("oracle supports gaussian and atom components only")


def _equation_terms(scenario, r):
    """Weights, coefficient means/variances and rhs means/variances of equation r's expansion."""
    start, size = scenario.system.block(r)
    dens = scenario.a_densities[start:start + size]
    combos = list(itertools.product(*(range(d.n_components) for d in dens)))
    w = np.array([math.prod(d.weights[j] for d, j in zip(dens, c)) for c in combos])
    mu = np.array([[d.locations[j] for d, j in zip(dens, c)] for c in combos])
    var = np.array([[d.scales[j] ** 2 for d, j in zip(dens, c)] for c in combos])
    b = scenario.b_densities[r]
    return w, mu, var, b.weights, b.locations, b.scales**2


def _term_count(scenario):
    total = 0
    for r in range(scenario.system.r_count):
        start, size = scenario.system.block(r)
        total += math.prod(d.n_components for d in scenario.a_densities[start:start + size]) * \
            scenario.b_densities[r].n_components
    return total


def exact_likelihood_points(scenario, points, cap: int = 10**6) -> np.ndarray:
    """Exact likelihood at each row of ``points``.

    Each mode combination contributes ``w * phi(0; mu.x - b, var.x^2 + s_b^2)``
    because a fixed linear combination of independent gaussians is gaussian.
    """
    _require_linear(scenario)
    if _term_count(scenario) > cap:
        raise CombinationOverflow(f"exact expansion needs more than {cap} terms")
    x = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.ones(x.shape[0])
    for r in range(scenario.system.r_count):
        w, mu, var, wb, mb, vb = _equation_terms(scenario, r)
        m_a = x @ mu.T                      # (P, terms)
        v_a = (x * x) @ var.T
        acc = np.zeros(x.shape[0])
        for wq, bq, vq in zip(wb, mb, vb):
            mean = m_a - bq
            v = v_a + vq
            degenerate = v == 0
            if np.any(degenerate & (mean == 0)):
                raise DegenerateVariance("all-atom combination solved exactly; likelihood is a Dirac spike")
            safe_v = np.where(degenerate, 1.0, v)
            phi = np.where(degenerate, 0.0, np.exp(-0.5 * mean * mean / safe_v) / np.sqrt(2 * np.pi * safe_v))
            acc += wq * (phi @ w)
        out *= acc
    return out


def exact_likelihood_linear_gaussian(scenario, x, cap: int = 10**6) -> float:
    return float(exact_likelihood_points(scenario, np.asarray(x, dtype=float)[None, :], cap)[0])


def exact_likelihood_map(scenario, grid: GridSpec | None = None, cap: int = 10**6) -> IntensityMap:
    grid = scenario.grid if grid is None else grid
    values = exact_likelihood_points(scenario, grid.points(), cap)
    return IntensityMap(grid, values.reshape(grid.shape), "likelihood")


def gaussian_sum_terms(scenario, r: int) -> list[GaussianSumTerm]:
    """Expanded terms of equation ``r`` at the unit point, mostly for inspection."""
    _require_linear(scenario)
    w, mu, var, wb, mb, vb = _equation_terms(scenario, r)
    ones = np.ones(mu.shape[1])
    return [
        GaussianSumTerm(float(wi * wq), float(mi @ ones - bq), float(vi @ ones + vq))
        for wi, mi, vi in zip(w, mu, var)
        for wq, bq, vq in zip(wb, mb, vb)
    ]


class ModeSolutions(NamedTuple):
    solutions: list
    assignments: list
    skipped: int
    total: int


def mode_solutions_linear(scenario, cap: int = 10**6) -> ModeSolutions:
    """Solve the deterministic system at every combination of component locations."""
    system = scenario.system
    if system.family != "linear":
        raise DimensionMismatch("mode solutions need a linear system")
    n = system.x_dim
    if system.r_count != n:
        raise DimensionMismatch("mode solutions need a square system")
    a_locs = [d.locations for d in scenario.a_densities]
    b_locs = [d.locations for d in scenario.b_densities]
    solutions, assignments, skipped, total = [], [], 0, 0
    for assignment in enumerate_modes(system, scenario.a_densities, scenario.b_densities, cap):
        total += 1
        a = np.array([a_locs[i][p] for i, p in enumerate(assignment.a_indices)]).reshape(n, n)
        b = np.array([b_locs[r][q] for r, q in enumerate(assignment.b_indices)])
        try:
            solutions.append(solve_linear_deterministic(a, b))
            assignments.append(assignment)
        except SingularSystem:
            skipped += 1
    return ModeSolutions(solutions, assignments, skipped, total)


# -- random symmetric matrices --------------------------------------------------

def symmetric_eigenvalues(a11, a12, a13, a22, a23, a33) -> np.ndarray:
    """Eigenvalues of symmetric 3x3 matrices in descending order, shape ``(m, 3)``.

    Trigonometric solution of the characteristic cubic after shifting by the
    mean eigenvalue and scaling to unit spread.
    """
    a11, a12, a13, a22, a23, a33 = (np.asarray(v, dtype=float) for v in (a11, a12, a13, a22, a23, a33))
    q = (a11 + a22 + a33) / 3.0
    p1 = a12 * a12 + a13 * a13 + a23 * a23
    p2 = (a11 - q) ** 2 + (a22 - q) ** 2 + (a33 - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b11, b22, b33 = (a11 - q) / safe, (a22 - q) / safe, (a33 - q) / safe
    b12, b13, b23 = a12 / safe, a13 / safe, a23 / safe
    det_b = (b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13) + b13 * (b12 * b23 - b22 * b13))
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l1 = q + 2.0 * p * np.cos(phi)
    l3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l2 = 3.0 * q - l1 - l3
    return np.stack([l1, l2, l3], axis=-1)


def draw_direct(density: MixtureDensity, size: int, rng: np.random.Generator) -> np.ndarray:
    """Plain i.i.d. draws: pick a component by weight, then sample inside it."""
    j = rng.choice(density.n_components, size=size, p=density.weights)
    kinds, locs, scales = density.kinds[j], density.locations[j], density.scales[j]
    z = rng.standard_normal(size)
    u = rng.uniform(-1.0, 1.0, size)
    return np.where(kinds == GAUSSIAN, locs + scales * z, np.where(kinds == UNIFORM, locs + scales * u, locs))


def eigen_histogram(entry_density: MixtureDensity, sigma_range, m: int, bins: GridSpec, seed: int,
                    sigma_seed: int = 0, chunk: int = 250_000) -> IntensityMap:
    """Density histogram of all eigenvalues of ``m`` random symmetric 3x3 matrices.

    The six independent entries share ``entry_density``; with ``sigma_range``
    its component scales are first redrawn uniformly from that range using
    ``sigma_seed``. The histogram is normalised by ``3 m`` and bin width, so
    eigenvalues outside ``bins`` lose their mass.
    """
    if bins.dim != 1:
        raise DimensionMismatch("eigenvalue histograms need a 1-D grid")
    density = entry_density if sigma_range is None else with_random_scales(entry_density, sigma_range, sigma_seed)
    rng = np.random.default_rng(seed)
    edges = np.linspace(bins.lo[0], bins.hi[0], bins.cells[0] + 1)
    counts = np.zeros(bins.cells[0], dtype=np.int64)
    done = 0
    while done < m:
        k = min(chunk, m - done)
        entries = [draw_direct(density, k, rng) for _ in range(6)]
        lam = symmetric_eigenvalues(*entries)
        counts += np.histogram(lam.ravel(), bins=edges)[0]
        done += k
    values = counts / (3.0 * m * bins.spacing[0])
    return IntensityMap(bins, values, "histogram", normalized=True, normalization=float(3 * m))


def total_variation(p: np.ndarray, q: np.ndarray, cell_volume: float) -> float:
    """Total-variation distance of two grid densities after renormalising each."""
    p = p / (p.sum() * cell_volume)
    q = q / (q.sum() * cell_volume)
    return 0.5 * float(np.abs(p - q).sum() * cell_volume)
