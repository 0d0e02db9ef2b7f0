"""Likelihood and posterior maps for systems of equations with random coefficients."""

from .errors import RandeqError, ScenarioError
from .inference import (
    GridSpec,
    IntensityMap,
    Prior,
    argmax,
    estimate_likelihood,
    likelihood_map,
    likelihood_map_partitioned,
    local_maxima,
    posterior_map,
)
from .mixture import MixtureComponent, MixtureDensity, atom, gaussian, sample_joint, sample_lhs, uniform
from .scenario import SamplingConfig, Scenario, load_builtin, load_scenario, save_scenario

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "IntensityMap",
    "MixtureComponent",
    "MixtureDensity",
    "Prior",
    "RandeqError",
    "SamplingConfig",
    "Scenario",
    "ScenarioError",
    "__version__",
    "argmax",
    "atom",
    "estimate_likelihood",
    "gaussian",
    "likelihood_map",
    "likelihood_map_partitioned",
    "load_builtin",
    "load_scenario",
    "local_maxima",
    "posterior_map",
    "sample_joint",
    "sample_lhs",
    "save_scenario",
    "uniform",
]
