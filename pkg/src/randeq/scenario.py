"""Scenarios: an equation system with its densities, prior, grid and sampling setup.

Scenario files are JSON documents validated against :data:`SCHEMA`; unknown
fields are rejected with the path of the offending field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import jsonschema

from .equations import FAMILIES, EquationSystem
from .errors import ScenarioError
from .inference import DEFAULT_PINHOLE_TAU, DEFAULT_SAMPLES, PRIOR_KINDS, GridSpec, Prior, default_epsilon
from .mixture import KIND_NAMES, MixtureComponent, MixtureDensity, gaussian, single, widen_atoms

FORMAT_VERSION = 1
# right-hand sides of these families are implicit (M(x; A) = 0)
IMPLICIT_FAMILIES = ("portfolio_gradient", "char_poly")


@dataclass(frozen=True)
class SamplingConfig:
    n: int = DEFAULT_SAMPLES
    seed: int = 0
    partitioned: bool = False
    pinhole_tau: float | None = DEFAULT_PINHOLE_TAU


@dataclass(frozen=True)
class Scenario:
    system: EquationSystem
    a_densities: tuple[MixtureDensity, ...]
    b_densities: tuple[MixtureDensity, ...]
    prior: Prior
    grid: GridSpec
    sampling: SamplingConfig = SamplingConfig()
    family_params: Mapping = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "a_densities", tuple(self.a_densities))
        object.__setattr__(self, "b_densities", tuple(self.b_densities))
        if len(self.a_densities) != self.system.k_total:
            raise ScenarioError(
                f"{len(self.a_densities)} densities for {self.system.k_total} parameter slots", "a_densities"
            )
        if len(self.b_densities) != self.system.r_count:
            raise ScenarioError(
                f"{len(self.b_densities)} densities for {self.system.r_count} equations", "b_densities"
            )
        if self.grid.dim != self.system.x_dim:
            raise ScenarioError(f"grid has dimension {self.grid.dim}, system has {self.system.x_dim}", "grid")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_sampling(self, **changes) -> "Scenario":
        return dataclasses.replace(self, sampling=dataclasses.replace(self.sampling, **changes))


# -- schema -------------------------------------------------------------------

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 3}

_COMPONENT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "location"],
    "properties": {
        "kind": {"enum": list(KIND_NAMES)},
        "location": {"type": "number"},
        "scale": {"type": "number", "minimum": 0},
    },
}

_DENSITY = {
    "type": "object",
    "additionalProperties": False,
    "required": ["components"],
    "properties": {
        "components": {"type": "array", "minItems": 1, "items": _COMPONENT},
        "weights": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "family", "x_dim", "grid", "equations", "partition", "a_densities"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "description": {"type": "string"},
        "family": {"enum": [f for f in FAMILIES if f != "custom"]},
        "x_dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lo", "hi", "cells"],
            "properties": {
                "lo": _NUMBER_LIST,
                "hi": _NUMBER_LIST,
                "cells": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1, "maxItems": 3},
            },
        },
        "equations": {"type": "integer", "minimum": 1},
        "partition": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "a_densities": {"type": "array", "minItems": 1, "items": _DENSITY},
        "b_densities": {"type": "array", "items": _DENSITY},
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": list(PRIOR_KINDS)}, "params": {"type": "object"}},
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "partitioned": {"type": "boolean"},
                "pinhole_tau": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "family_params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"type": "number"},
                "alpha": {"type": "number"},
                "beta": {"type": "number"},
                "mu": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                "lambda": {"type": "number", "minimum": 0},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "sigma_range": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                                "minItems": 2, "maxItems": 2},
                "iterations": {"type": "integer", "minimum": 1},
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _error_path(err: jsonschema.ValidationError) -> str:
    path = "/" + "/".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - allowed)
        if extra:
            return path.rstrip("/") + "/" + extra[0]
    return path


def validate(doc) -> None:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ScenarioError(err.message, _error_path(err))


# -- conversion ---------------------------------------------------------------

def density_from_dict(d: Mapping, path: str = "") -> MixtureDensity:
    try:
        comps = [MixtureComponent(c["kind"], float(c["location"]), float(c.get("scale", 0.0)))
                 for c in d["components"]]
        return MixtureDensity(comps, d.get("weights"))
    except ValueError as exc:
        raise ScenarioError(str(exc), path) from None


def density_to_dict(d: MixtureDensity) -> dict:
    return {
        "components": [{"kind": c.kind, "location": c.location, "scale": c.scale} for c in d.components],
        "weights": [float(w) for w in d.weights],
    }


def scenario_from_dict(doc: Mapping) -> Scenario:
    validate(doc)
    family = doc["family"]
    fp = dict(doc.get("family_params", {}))
    try:
        grid = GridSpec(doc["grid"]["lo"], doc["grid"]["hi"], doc["grid"]["cells"])
    except ValueError as exc:
        raise ScenarioError(str(exc), "/grid") from None
    r_count = doc["equations"]

    a = [density_from_dict(d, f"/a_densities/{i}") for i, d in enumerate(doc["a_densities"])]
    if family == "char_poly" and len(a) == 1:
        a = a * 6

    eps = fp.get("epsilon", default_epsilon(grid))
    if "b_densities" in doc:
        b = [widen_atoms(density_from_dict(d, f"/b_densities/{i}"), eps) for i, d in enumerate(doc["b_densities"])]
    elif family in IMPLICIT_FAMILIES:
        b = [single(gaussian(0.0, eps))] * r_count
    else:
        raise ScenarioError(f"family {family} needs explicit right-hand-side densities", "/b_densities")

    params = {}
    if family == "portfolio_gradient":
        if "mu" not in fp or "lambda" not in fp:
            raise ScenarioError("portfolio_gradient needs mu and lambda", "/family_params")
        params = {"mu": [float(v) for v in fp["mu"]], "lambda": float(fp["lambda"])}
    elif family == "control_residual":
        missing = [k for k in ("gamma", "alpha", "beta") if k not in fp]
        if missing:
            raise ScenarioError(f"control_residual needs {missing}", "/family_params")
        params = {k: float(fp[k]) for k in ("gamma", "alpha", "beta")}
    try:
        system = EquationSystem(family, doc["x_dim"], r_count, tuple(doc["partition"]), params)
    except ValueError as exc:
        raise ScenarioError(str(exc), "/partition") from None

    default_prior = "simplex_interior" if family == "portfolio_gradient" else "constant"
    prior_doc = doc.get("prior", {"kind": default_prior})
    try:
        prior = Prior(prior_doc["kind"], dict(prior_doc.get("params", {})))
    except ValueError as exc:
        raise ScenarioError(str(exc), "/prior") from None

    s = doc.get("sampling", {})
    sampling = SamplingConfig(
        n=s.get("n", DEFAULT_SAMPLES),
        seed=s.get("seed", 0),
        partitioned=s.get("partitioned", False),
        pinhole_tau=s.get("pinhole_tau", DEFAULT_PINHOLE_TAU),
    )
    if sampling.partitioned and not system.is_partitioned:
        raise ScenarioError("partitioned sampling needs disjoint parameter blocks", "/sampling/partitioned")
    return Scenario(system, tuple(a), tuple(b), prior, grid, sampling, fp, doc.get("description", ""))


def scenario_to_dict(sc: Scenario) -> dict:
    a = list(sc.a_densities)
    if sc.system.family == "char_poly" and all(d == a[0] for d in a):
        a = a[:1]
    doc = {
        "version": FORMAT_VERSION,
        "family": sc.system.family,
        "x_dim": sc.system.x_dim,
        "grid": {"lo": list(sc.grid.lo), "hi": list(sc.grid.hi), "cells": list(sc.grid.cells)},
        "equations": sc.system.r_count,
        "partition": list(sc.system.partition),
        "a_densities": [density_to_dict(d) for d in a],
        "b_densities": [density_to_dict(d) for d in sc.b_densities],
        "prior": {"kind": sc.prior.kind, "params": dict(sc.prior.params)},
        "sampling": {
            "n": sc.sampling.n,
            "seed": sc.sampling.seed,
            "partitioned": sc.sampling.partitioned,
            "pinhole_tau": sc.sampling.pinhole_tau,
        },
    }
    if sc.family_params:
        doc["family_params"] = dict(sc.family_params)
    if sc.description:
        doc["description"] = sc.description
    return doc


def scenario_hash(sc: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(sc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_scenario(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def builtin_names() -> list[str]:
    files = resources.files("randeq.scenarios").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def builtin_document(name: str) -> dict:
    ref = resources.files("randeq.scenarios") / f"{name}.json"
    if not ref.is_file():
        raise ScenarioError(f"no built-in scenario named {name!r}")
    return json.loads(ref.read_text())


def load_builtin(name: str) -> Scenario:
    return scenario_from_dict(builtin_document(name))
