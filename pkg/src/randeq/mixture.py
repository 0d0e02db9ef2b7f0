"""One-dimensional mixture densities: evaluation, latin hypercube sampling, algebra.

A density is a weighted list of components of three kinds:

* ``gaussian``: ``location`` is the mean, ``scale`` the standard deviation;
* ``uniform``: constant on ``[location - scale, location + scale]``;
* ``atom``: a point mass at ``location`` (``scale == 0``).

Atoms can be sampled but never evaluated as a pdf; equations whose
right-hand side would be an atom replace it by a narrow gaussian
(see :func:`widen_atoms`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import AtomEvaluation, UnsupportedComponent

GAUSSIAN, UNIFORM, ATOM = 0, 1, 2
KIND_NAMES = ("gaussian", "uniform", "atom")
KIND_CODES = {name: code for code, name in enumerate(KIND_NAMES)}

# table size used to bracket quantiles before the Newton refinement
_BRACKET_POINTS = 4097
_QUANTILE_TOL = 1e-12
# above this many components LHS switches to component-stratified inversion
_CDF_INVERSION_MAX_COMPONENTS = 64

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureComponent:
    kind: str
    location: float
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown component kind {self.kind!r}")
        if not math.isfinite(self.location) or not math.isfinite(self.scale):
            raise ValueError("component location and scale must be finite")
        if self.kind == "atom":
            if self.scale != 0:
                raise ValueError("atom components require scale == 0")
        elif self.scale <= 0:
            raise ValueError(f"{self.kind} components require scale > 0")


def gaussian(location: float, scale: float) -> MixtureComponent:
    return MixtureComponent("gaussian", float(location), float(scale))


def uniform(location: float, half_width: float) -> MixtureComponent:
    return MixtureComponent("uniform", float(location), float(half_width))


def atom(location: float) -> MixtureComponent:
    return MixtureComponent("atom", float(location), 0.0)


class MixtureDensity:
    """Immutable weighted mixture of :class:`MixtureComponent`.

    Parameters
    ----------
    components : sequence of MixtureComponent
    weights : sequence of float, optional
        Positive weights summing to one. Equal weights when omitted.
    """

    def __init__(self, components: Sequence[MixtureComponent], weights: Sequence[float] | None = None):
        components = list(components)
        if not components:
            raise ValueError("a mixture needs at least one component")
        kinds = np.array([KIND_CODES[c.kind] for c in components], dtype=np.int64)
        locs = np.array([c.location for c in components], dtype=float)
        scales = np.array([c.scale for c in components], dtype=float)
        if weights is None:
            w = np.full(len(components), 1.0 / len(components))
        else:
            w = np.asarray(weights, dtype=float)
        self._init_arrays(kinds, locs, scales, w)

    @classmethod
    def from_arrays(cls, kinds, locations, scales, weights) -> "MixtureDensity":
        """Build from parallel arrays; ``kinds`` holds integer codes or kind names."""
        obj = cls.__new__(cls)
        kinds = np.asarray(kinds)
        if kinds.dtype.kind in "US":
            kinds = np.array([KIND_CODES[str(k)] for k in kinds], dtype=np.int64)
        obj._init_arrays(
            kinds.astype(np.int64),
            np.asarray(locations, dtype=float),
            np.asarray(scales, dtype=float),
            np.asarray(weights, dtype=float),
        )
        return obj

    def _init_arrays(self, kinds, locs, scales, weights):
        n = kinds.shape[0]
        if n == 0:
            raise ValueError("a mixture needs at least one component")
        if not (locs.shape == scales.shape == weights.shape == (n,)):
            raise ValueError("component arrays and weights must have equal length")
        if np.any((kinds < 0) | (kinds > 2)):
            raise ValueError("invalid component kind code")
        if not (np.all(np.isfinite(locs)) and np.all(np.isfinite(scales))):
            raise ValueError("component location and scale must be finite")
        if np.any(scales[kinds == ATOM] != 0):
            raise ValueError("atom components require scale == 0")
        if np.any(scales[kinds != ATOM] <= 0):
            raise ValueError("gaussian and uniform components require scale > 0")
        if np.any(weights <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {weights.sum()!r}, expected 1")
        for arr in (kinds, locs, scales, weights):
            arr.flags.writeable = False
        self.kinds, self.locations, self.scales, self.weights = kinds, locs, scales, weights

    # -- structure ---------------------------------------------------------

    @property
    def n_components(self) -> int:
        return int(self.kinds.shape[0])

    @property
    def components(self) -> tuple[MixtureComponent, ...]:
        return tuple(
            MixtureComponent(KIND_NAMES[k], float(l), float(s))
            for k, l, s in zip(self.kinds, self.locations, self.scales)
        )

    @cached_property
    def has_atoms(self) -> bool:
        return bool(np.any(self.kinds == ATOM))

    @cached_property
    def has_uniform(self) -> bool:
        return bool(np.any(self.kinds == UNIFORM))

    def __len__(self):
        return self.n_components

    def __eq__(self, other):
        if not isinstance(other, MixtureDensity):
            return NotImplemented
        return (
            np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.locations, other.locations)
            and np.array_equal(self.scales, other.scales)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def __repr__(self):
        parts = ", ".join(
            f"{w:.4g}*{KIND_NAMES[k]}({l:.4g}, {s:.4g})"
            for k, l, s, w in zip(self.kinds[:6], self.locations, self.scales, self.weights)
        )
        more = "" if self.n_components <= 6 else f", ... ({self.n_components} components)"
        return f"MixtureDensity({parts}{more})"

    # -- moments -----------------------------------------------------------

    def mean(self) -> float:
        return float(np.dot(self.weights, self.locations))

    def variance(self) -> float:
        comp_var = np.where(self.kinds == UNIFORM, self.scales**2 / 3.0, self.scales**2)
        second = np.dot(self.weights, comp_var + self.locations**2)
        return float(max(second - self.mean() ** 2, 0.0))

    # -- evaluation --------------------------------------------------------

    def pdf(self, t):
        """Mixture pdf at ``t`` (scalar or array)."""
        if self.has_atoms:
            raise AtomEvaluation("pdf requested on a density with atom components")
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for k, loc, s, w in zip(self.kinds, self.locations, self.scales, self.weights):
            z = (t - loc) / s
            if k == GAUSSIAN:
                out += w * np.exp(-0.5 * z * z) / (s * _SQRT_2PI)
            else:
                out += np.where(np.abs(z) <= 1.0, w / (2.0 * s), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, t):
        """Mixture cdf; atoms are right-continuous steps."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for k, loc, s, w in zip(self.kinds, self.locations, self.scales, self.weights):
            if k == GAUSSIAN:
                out += w * ndtr((t - loc) / s)
            elif k == UNIFORM:
                out += w * np.clip((t - loc + s) / (2.0 * s), 0.0, 1.0)
            else:
                out += w * (t >= loc)
        return out if out.ndim else float(out)

    def _continuous_cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for k, loc, s, w in zip(self.kinds, self.locations, self.scales, self.weights):
            if k == GAUSSIAN:
                out += w * ndtr((t - loc) / s)
            elif k == UNIFORM:
                out += w * np.clip((t - loc + s) / (2.0 * s), 0.0, 1.0)
        return out

    def support_bounds(self, width: float = 12.0) -> tuple[float, float]:
        smax = float(self.scales.max())
        return float(self.locations.min() - width * smax), float(self.locations.max() + width * smax)

    # -- quantiles ---------------------------------------------------------

    def quantile(self, u):
        """Generalised inverse ``inf{t : F(t) >= u}`` by bracketed, safeguarded Newton steps."""
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        out = np.empty_like(flat)
        pending = np.ones(flat.shape, dtype=bool)

        if self.has_atoms:
            atom_locs = np.unique(self.locations[self.kinds == ATOM])
            for a in atom_locs:
                below = self.weights[(self.kinds == ATOM) & (self.locations < a)].sum()
                at = self.weights[(self.kinds == ATOM) & (self.locations == a)].sum()
                left = float(self._continuous_cdf(a)) + below
                hit = pending & (flat > left) & (flat <= left + at)
                out[hit] = a
                pending &= ~hit

        if pending.any():
            out[pending] = self._invert_cdf(flat[pending])
        return out.reshape(u.shape) if u.ndim else float(out[0])

    def _invert_cdf(self, u):
        lo, hi = self.support_bounds()
        pad = 1e-6 * (1.0 + hi - lo)
        table_t = np.linspace(lo - pad, hi + pad, _BRACKET_POINTS)
        table_f = self.cdf(table_t)
        idx = np.clip(np.searchsorted(table_f, u, side="left"), 1, _BRACKET_POINTS - 1)
        a = table_t[idx - 1]
        b = table_t[idx]
        fa, fb = table_f[idx - 1], table_f[idx]
        span = fb - fa
        t = np.where(span > 0, a + (u - fa) / np.where(span > 0, span, 1.0) * (b - a), 0.5 * (a + b))
        # safeguarded Newton: keep the bracket, fall back to its midpoint
        width = table_t[1] - table_t[0]
        max_steps = 8 + max(0, math.ceil(math.log2(width / _QUANTILE_TOL)))
        active = np.ones(u.shape, dtype=bool)
        for _ in range(max_steps):
            ia = np.flatnonzero(active)
            if ia.size == 0:
                break
            ti = t[ia]
            f = self.cdf(ti) - u[ia]
            left = f < 0
            a[ia] = np.where(left, ti, a[ia])
            b[ia] = np.where(left, b[ia], ti)
            dens = self._continuous_pdf(ti)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = ti - f / dens
            ok = np.isfinite(step) & (step > a[ia]) & (step < b[ia])
            nxt = np.where(ok, step, 0.5 * (a[ia] + b[ia]))
            done = (np.abs(nxt - ti) <= _QUANTILE_TOL) | (b[ia] - a[ia] <= _QUANTILE_TOL)
            t[ia] = nxt
            active[ia[done]] = False
        return t

    def _continuous_pdf(self, t):
        out = np.zeros(t.shape)
        for k, loc, s, w in zip(self.kinds, self.locations, self.scales, self.weights):
            if k == GAUSSIAN:
                z = (t - loc) / s
                out += w * np.exp(-0.5 * z * z) / (s * _SQRT_2PI)
            elif k == UNIFORM:
                out += np.where(np.abs(t - loc) <= s, w / (2.0 * s), 0.0)
        return out

    def _component_quantile(self, u):
        """Stratified inverse of the component-stacked cdf (components sorted by location)."""
        order = np.argsort(self.locations, kind="stable")
        w = self.weights[order]
        cum = np.cumsum(w)
        cum[-1] = 1.0
        j = np.minimum(np.searchsorted(cum, u, side="left"), len(w) - 1)
        start = cum[j] - w[j]
        v = np.clip((u - start) / w[j], 1e-300, 1.0 - 1e-16)
        kinds = self.kinds[order][j]
        locs = self.locations[order][j]
        scales = self.scales[order][j]
        return np.where(
            kinds == GAUSSIAN,
            locs + scales * ndtri(v),
            np.where(kinds == UNIFORM, locs + scales * (2.0 * v - 1.0), locs),
        )


@dataclass(frozen=True)
class SampleSet:
    """A fixed Monte Carlo draw. ``values`` is ``(N,)`` for one variable or ``(N, K)`` joint."""

    values: np.ndarray
    seed: int
    count: int

    def block(self, start: int, size: int) -> np.ndarray:
        return self.values[:, start:start + size]


def _auto_method(density: MixtureDensity) -> str:
    return "cdf" if density.n_components <= _CDF_INVERSION_MAX_COMPONENTS else "component"


def sample_lhs(density: MixtureDensity, n: int, seed, method: str = "auto") -> SampleSet:
    """Latin hypercube sample of size ``n``.

    The unit interval is cut into ``n`` equal-probability strata, one uniform
    draw is taken per stratum, the strata are randomly permuted and mapped
    through the mixture quantile function. ``method='cdf'`` inverts the full
    mixture cdf; ``method='component'`` inverts the component-stacked cdf,
    which is exact in distribution and much cheaper for very large mixtures.
    ``'auto'`` picks ``cdf`` up to 64 components.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    u = (rng.permutation(n) + rng.random(n)) / n
    u = np.clip(u, 1e-300, 1.0)
    if method == "auto":
        method = _auto_method(density)
    if method == "cdf":
        values = density.quantile(u)
    elif method == "component":
        values = density._component_quantile(u)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return SampleSet(values=np.asarray(values, dtype=float), seed=seed, count=n)


def sample_joint(densities: Sequence[MixtureDensity], n: int, seed: int) -> SampleSet:
    """Independent LHS columns, column ``k`` seeded by ``(seed, k)``."""
    cols = [sample_lhs(d, n, [int(seed), k]).values for k, d in enumerate(densities)]
    values = np.column_stack(cols) if cols else np.empty((n, 0))
    return SampleSet(values=np.ascontiguousarray(values), seed=int(seed), count=n)


def pdf(density: MixtureDensity, t):
    return density.pdf(t)


def mode_list(density: MixtureDensity) -> list[float]:
    return [float(v) for v in density.locations]


def affine_combine(densities: Sequence[MixtureDensity], coeffs: Sequence[float], offset: float = 0.0) -> MixtureDensity:
    """Exact mixture of ``offset + sum(coeffs[k] * X_k)`` for independent gaussian/atom mixtures.

    Components enumerate the Cartesian product of the inputs' components in
    lexicographic order (first input varies slowest).
    """
    if len(densities) != len(coeffs):
        raise ValueError("need one coefficient per density")
    means = np.array([float(offset)])
    var = np.array([0.0])
    w = np.array([1.0])
    for d, c in zip(densities, coeffs):
        if d.has_uniform:
            raise UnsupportedComponent("affine_combine supports gaussian and atom components only")
        means = (means[:, None] + c * d.locations[None, :]).ravel()
        var = (var[:, None] + (c * c) * (d.scales**2)[None, :]).ravel()
        w = (w[:, None] * d.weights[None, :]).ravel()
    scales = np.sqrt(var)
    kinds = np.where(scales > 0, GAUSSIAN, ATOM)
    w = w / w.sum()
    return MixtureDensity.from_arrays(kinds, means, scales, w)


def widen_atoms(density: MixtureDensity, epsilon: float) -> MixtureDensity:
    """Replace every atom by a gaussian of standard deviation ``epsilon`` at the same location."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not density.has_atoms:
        return density
    atoms = density.kinds == ATOM
    kinds = np.where(atoms, GAUSSIAN, density.kinds)
    scales = np.where(atoms, epsilon, density.scales)
    return MixtureDensity.from_arrays(kinds, density.locations, scales, density.weights)


def with_random_scales(density: MixtureDensity, scale_range: tuple[float, float], seed) -> MixtureDensity:
    """Redraw every non-atom component scale uniformly from ``scale_range``."""
    lo, hi = scale_range
    if not 0 < lo <= hi:
        raise ValueError("scale range must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    drawn = rng.uniform(lo, hi, size=density.n_components)
    scales = np.where(density.kinds == ATOM, 0.0, drawn)
    return MixtureDensity.from_arrays(density.kinds, density.locations, scales, density.weights)


def gaussian_mixture(locations: Sequence[float], scales, weights=None) -> MixtureDensity:
    """Shorthand for an all-gaussian mixture; ``scales`` may be a scalar."""
    locations = list(locations)
    if np.isscalar(scales):
        scales = [scales] * len(locations)
    return MixtureDensity([gaussian(l, s) for l, s in zip(locations, scales)], weights)


def single(component: MixtureComponent) -> MixtureDensity:
    return MixtureDensity([component], [1.0])
