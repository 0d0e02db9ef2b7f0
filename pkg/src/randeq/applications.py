"""Scenario builders for the applied studies: portfolio weights, a discrete-time
control loop and eigenvalue spectra of random symmetric matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .equations import EquationSystem
from .errors import ComponentExplosion, UnsupportedComponent
from .inference import (
    DEFAULT_PINHOLE_TAU,
    DEFAULT_SAMPLES,
    GridSpec,
    IntensityMap,
    Prior,
    argmax,
    default_epsilon,
    likelihood_map,
    posterior_map,
)
from .mixture import MixtureDensity, affine_combine, gaussian, single, widen_atoms, with_random_scales
from .scenario import SamplingConfig, Scenario

DEFAULT_COMPONENT_CAP = 100_000


# -- portfolio ------------------------------------------------------------------

@dataclass(frozen=True)
class PortfolioSpec:
    """Three assets with mixture returns, expected returns ``mu`` and risk factor ``lam``.

    ``epsilon`` is the width of the artificial gaussian right-hand sides;
    ``None`` picks the grid-relative default.
    """

    asset_densities: tuple[MixtureDensity, ...]
    mu: tuple[float, float, float]
    lam: float
    epsilon: float | None = None
    grid: GridSpec = GridSpec((0.0, 0.0), (1.0, 1.0), (128, 128))
    sampling: SamplingConfig = SamplingConfig()

    def __post_init__(self):
        if len(self.asset_densities) != 3 or len(self.mu) != 3:
            raise ValueError("the portfolio study uses exactly three assets")
        if not np.all(np.isfinite(self.mu)):
            raise ValueError("expected returns must be finite")
        if self.lam < 0:
            raise ValueError("risk adjustment factor must be non-negative")


def build_portfolio_system(spec: PortfolioSpec) -> Scenario:
    """Gradient of the mean-variance objective in ``(x1, x2)`` with ``x3 = 1 - x1 - x2``.

    Both gradient equations read all three asset returns, so the parameter
    block is shared. The simplex constraint lives in the prior.
    """
    eps = default_epsilon(spec.grid) if spec.epsilon is None else spec.epsilon
    system = EquationSystem("portfolio_gradient", 2, 2, (3,), {"mu": [float(v) for v in spec.mu],
                                                               "lambda": float(spec.lam)})
    rhs = single(gaussian(0.0, eps))
    params = {"mu": [float(v) for v in spec.mu], "lambda": float(spec.lam), "epsilon": float(eps)}
    return Scenario(system, spec.asset_densities, (rhs, rhs), Prior("simplex_interior"), spec.grid,
                    spec.sampling, params)


def portfolio_return_density(x, spec: PortfolioSpec) -> MixtureDensity:
    """Return density of the allocation ``(x1, x2, 1 - x1 - x2)``."""
    x1, x2 = float(x[0]), float(x[1])
    x3 = 1.0 - x1 - x2
    if min(x1, x2, x3) < -1e-12:
        raise ValueError("allocation lies outside the simplex")
    return affine_combine(spec.asset_densities, (x1, x2, x3), 0.0)


def portfolio_spec_from_scenario(sc: Scenario, lam: float | None = None) -> PortfolioSpec:
    return PortfolioSpec(
        sc.a_densities,
        tuple(sc.system.params["mu"]),
        sc.system.params["lambda"] if lam is None else lam,
        float(sc.b_densities[0].scales[0]),
        sc.grid,
        sc.sampling,
    )


# -- control loop ---------------------------------------------------------------

@dataclass(frozen=True)
class ControlSpec:
    """Linear two-state control loop with mixture states and mixture targets."""

    gamma: float
    alpha: float
    beta: float
    state_densities: tuple[MixtureDensity, MixtureDensity]
    target_densities: tuple[MixtureDensity, MixtureDensity]
    action_grid: GridSpec
    iterations: int = 4
    sampling: SamplingConfig = SamplingConfig()
    component_cap: int = DEFAULT_COMPONENT_CAP
    epsilon: float | None = None

    def __post_init__(self):
        if len(self.state_densities) != 2 or len(self.target_densities) != 2:
            raise ValueError("the control study has two states and two targets")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.action_grid.dim != 2:
            raise ValueError("action grid must be 2-D")


@dataclass
class ControlStep:
    action: tuple[float, float]
    next_state: tuple[MixtureDensity, MixtureDensity] | None
    posterior: IntensityMap
    peak: float


@dataclass
class ControlIteration:
    iteration: int
    component_counts: tuple[int, int]
    state: tuple[MixtureDensity, MixtureDensity]
    action: tuple[float, float]
    peak: float
    posterior: IntensityMap = field(repr=False)

    def summary(self) -> dict:
        return {
            "iteration": self.iteration,
            "component_counts": list(self.component_counts),
            "action": list(self.action),
            "posterior_peak": self.peak,
            "state_means": [d.mean() for d in self.state],
            "state_std": [float(np.sqrt(d.variance())) for d in self.state],
            "max_component_std": [float(d.scales.max()) for d in self.state],
        }


def control_scenario(state: Sequence[MixtureDensity], spec: ControlSpec, seed: int | None = None) -> Scenario:
    params = {"gamma": float(spec.gamma), "alpha": float(spec.alpha), "beta": float(spec.beta)}
    system = EquationSystem("control_residual", 2, 2, (2,), params)
    eps = default_epsilon(spec.action_grid) if spec.epsilon is None else spec.epsilon
    targets = tuple(widen_atoms(t, eps) for t in spec.target_densities)
    sampling = spec.sampling if seed is None else SamplingConfig(
        spec.sampling.n, seed, False, spec.sampling.pinhole_tau)
    fp = dict(params, iterations=spec.iterations)
    return Scenario(system, tuple(state), targets, Prior("constant"), spec.action_grid, sampling, fp)


def control_step(state: Sequence[MixtureDensity], spec: ControlSpec, seed: int | None = None,
                 propagate: bool = True) -> ControlStep:
    """Pick the posterior-maximising action and push the state mixtures through the update."""
    for d in state:
        if d.has_uniform:
            raise UnsupportedComponent("control states must be gaussian or atom mixtures")
    sc = control_scenario(state, spec, seed)
    post = posterior_map(likelihood_map(sc), sc.prior)
    (x1, x2), peak = argmax(post)
    next_state = None
    if propagate:
        g, a, b = spec.gamma, spec.alpha, spec.beta
        s1 = affine_combine(state, (1.0 - a, b), x1 + g * x2)
        s2 = affine_combine(state, (-b, 1.0 - a), g * x1 + x2)
        next_state = (s1, s2)
    return ControlStep((x1, x2), next_state, post, peak)


def run_control_loop(spec: ControlSpec) -> list[ControlIteration]:
    """Iterate :func:`control_step`; iteration ``k`` uses sample seed ``(seed, k)``.

    Raises :class:`ComponentExplosion` before an iteration whose state
    mixtures would exceed ``spec.component_cap`` components.
    """
    state = tuple(spec.state_densities)
    out = []
    for k in range(1, spec.iterations + 1):
        counts = (state[0].n_components, state[1].n_components)
        if max(counts) > spec.component_cap:
            raise ComponentExplosion(
                f"iteration {k} needs {max(counts)} state components, cap is {spec.component_cap}")
        step = control_step(state, spec, seed=spec.sampling.seed * 1000 + k, propagate=k < spec.iterations)
        out.append(ControlIteration(k, counts, state, step.action, step.peak, step.posterior))
        if step.next_state is not None:
            predicted = step.next_state[0].n_components
            if predicted > spec.component_cap:
                raise ComponentExplosion(
                    f"iteration {k + 1} needs {predicted} state components, cap is {spec.component_cap}")
            state = step.next_state
    return out


def control_spec_from_scenario(sc: Scenario, iterations: int | None = None, cap: int = DEFAULT_COMPONENT_CAP):
    p = sc.system.params
    return ControlSpec(
        p["gamma"], p["alpha"], p["beta"], tuple(sc.a_densities), tuple(sc.b_densities), sc.grid,
        iterations if iterations is not None else int(sc.family_params.get("iterations", 4)),
        sc.sampling, cap, sc.family_params.get("epsilon"),
    )


# -- random matrix spectra --------------------------------------------------------

@dataclass(frozen=True)
class RandomMatrixSpec:
    """Symmetric 3x3 matrices with i.i.d. entries from ``entry_density``.

    With ``sigma_range`` the component scales are redrawn uniformly from that
    range (seeded by ``sigma_seed``) before use.
    """

    entry_density: MixtureDensity
    x_grid: GridSpec
    sigma_range: tuple[float, float] | None = None
    epsilon: float | None = None
    sigma_seed: int = 0
    sampling: SamplingConfig = SamplingConfig()

    def __post_init__(self):
        if self.x_grid.dim != 1:
            raise ValueError("eigenvalue grid must be 1-D")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def realized_density(self) -> MixtureDensity:
        if self.sigma_range is None:
            return self.entry_density
        return with_random_scales(self.entry_density, self.sigma_range, self.sigma_seed)


def build_eigen_scenario(spec: RandomMatrixSpec) -> Scenario:
    """Characteristic polynomial ``det(M - xI) = B`` with ``B ~ N(0, eps)``."""
    eps = default_epsilon(spec.x_grid) if spec.epsilon is None else spec.epsilon
    system = EquationSystem("char_poly", 1, 1, (6,))
    entry = spec.realized_density
    fp = {"epsilon": float(eps)}
    if spec.sigma_range is not None:
        fp["sigma_range"] = [float(v) for v in spec.sigma_range]
    return Scenario(system, (entry,) * 6, (single(gaussian(0.0, eps)),), Prior("constant"), spec.x_grid,
                    spec.sampling, fp)


__all__ = [
    "DEFAULT_COMPONENT_CAP",
    "DEFAULT_PINHOLE_TAU",
    "DEFAULT_SAMPLES",
    "ControlIteration",
    "ControlSpec",
    "ControlStep",
    "PortfolioSpec",
    "RandomMatrixSpec",
    "build_eigen_scenario",
    "build_portfolio_system",
    "control_scenario",
    "control_spec_from_scenario",
    "control_step",
    "portfolio_return_density",
    "portfolio_spec_from_scenario",
    "run_control_loop",
]
