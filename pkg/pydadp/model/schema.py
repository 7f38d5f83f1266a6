#
# Copyright The pydadp Authors.
#
# This file is part of pydadp.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""Reading and writing problem definition files (JSON or YAML).

A problem file has the sections ``horizon``, ``noise``, ``subsystems`` and ``coupling``,
plus an optional ``discretization`` section consumed by the grid solvers and an optional
``slack_unit`` naming the subsystem that absorbs the coupling residual in simulation::

    horizon: 3
    noise:
      names: [demand]
      partition: [null]          # null = global, i = local to subsystem i
      stages:                    # one entry per stage, or a single stationary entry
        - support: [[2.0], [4.0]]
          probabilities: [0.5, 0.5]
    coupling:
      dimension: 1
      demand: {coordinate: demand, unit: 0}   # folds -d_t into that unit's coupling
    subsystems:
      - name: unit_0
        x0: []
        control_dim: 1
        dynamics: {kind: affine_dynamics, state_matrix: [], ...}
        stage_cost: {kind: quadratic_cost, hessian: [[1.0]], linear: [0.0]}
        final_cost: {kind: quadratic_cost, hessian: [], linear: []}
        coupling: {kind: affine_coupling, control_matrix: [[1.0]], offset: [0.0]}
        state_bounds: {lower: [], upper: []}
        control_bounds: {lower: [0.0], upper: [4.0]}

Bounds may be given per stage or once for all stages; ``null`` means unbounded.
"""
import json
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np
import yaml

from pydadp.model.catalog import AffineCoupling, AffineDynamics, QuadraticCost, cost_from_dict
from pydadp.model.helpers import ValidationReport, validate_problem
from pydadp.model.problem import NoiseModel, ProblemSpec, SubsystemSpec, stage_bounds


def read_document(file_path: str) -> Dict[str, Any]:
    """Parses a JSON or YAML document into a dictionary."""
    with open(file_path, "r", encoding="utf-8") as file:
        if file_path.endswith((".yaml", ".yml")):
            return yaml.safe_load(file)
        return json.load(file)


def _mapping(value: Any, where: str) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ValueError(f"{where} must be a mapping, got {type(value).__name__}")
    return value


def noise_from_dict(data: Dict[str, Any], horizon: int) -> NoiseModel:
    """Builds the noise model of a problem file."""
    data = _mapping(data, "The noise section")
    names = list(data["names"])
    partition = data.get("partition", [None] * len(names))
    stages = [_mapping(stage, f"Noise stage {t}") for t, stage in enumerate(data["stages"])]
    if len(stages) == 1 and horizon > 1:
        stages = stages * horizon
    if len(stages) != horizon:
        raise ValueError(f"The noise section has {len(stages)} stages for a horizon of {horizon}")
    return NoiseModel(tuple(stage["support"] for stage in stages),
                      tuple(stage["probabilities"] for stage in stages),
                      tuple(names),
                      tuple(partition))


def subsystem_from_dict(entry: Dict[str, Any], index: int, horizon: int, q: int) -> SubsystemSpec:
    """Builds one subsystem of a problem file."""
    entry = _mapping(entry, f"Subsystem {index}")
    x0 = np.asarray(entry.get("x0", []), dtype=float).reshape(-1)
    n = x0.shape[0]
    m = int(entry["control_dim"])
    dynamics = _mapping(entry["dynamics"], f"Subsystem {index}: dynamics")
    coupling = _mapping(entry["coupling"], f"Subsystem {index}: coupling")
    if dynamics.get("kind") != AffineDynamics.kind:
        raise ValueError(f"Subsystem {index}: dynamics must be of kind '{AffineDynamics.kind}'")
    if coupling.get("kind") != AffineCoupling.kind:
        raise ValueError(f"Subsystem {index}: coupling must be of kind '{AffineCoupling.kind}'")
    final = entry.get("final_cost")
    state_bounds = _mapping(entry.get("state_bounds", {}), f"Subsystem {index}: state_bounds")
    control_bounds = _mapping(entry.get("control_bounds", {}),
                              f"Subsystem {index}: control_bounds")
    return SubsystemSpec(
        name=entry.get("name", f"unit_{index}"),
        x0=x0,
        dynamics=AffineDynamics.from_dict(dynamics, n, m, q),
        stage_cost=cost_from_dict(entry["stage_cost"], n + m),
        final_cost=(cost_from_dict(final, n) if final is not None
                    else QuadraticCost(np.zeros((n, n)), np.zeros(n))),
        coupling=AffineCoupling.from_dict(coupling, n, m, q),
        state_lower=stage_bounds(state_bounds.get("lower"), horizon + 1, n, -np.inf),
        state_upper=stage_bounds(state_bounds.get("upper"), horizon + 1, n, np.inf),
        control_lower=stage_bounds(control_bounds.get("lower"), horizon, m, -np.inf),
        control_upper=stage_bounds(control_bounds.get("upper"), horizon, m, np.inf),
        metadata=dict(entry.get("metadata", {})),
    )


def problem_from_dict(data: Dict[str, Any]) -> ProblemSpec:
    """Builds a problem from the sections of a problem file."""
    horizon = int(data["horizon"])
    noise = noise_from_dict(data["noise"], horizon)
    subsystems = [subsystem_from_dict(entry, index, horizon, noise.dimension)
                  for index, entry in enumerate(data["subsystems"])]
    coupling = _mapping(data.get("coupling", {}), "The coupling section")
    demand = coupling.get("demand")
    if demand is not None:
        if isinstance(demand, str):
            demand = {"coordinate": demand}
        demand = _mapping(demand, "The demand")
        unit = int(demand.get("unit", 0))
        folded = subsystems[unit].coupling.fold_demand(noise.coordinate(demand["coordinate"]))
        subsystems[unit] = replace(subsystems[unit], coupling=folded)
    return ProblemSpec(tuple(subsystems), noise, int(coupling.get("dimension", 1)),
                       data.get("name", "problem"))


def _bounds_to_lists(lower: np.ndarray, upper: np.ndarray) -> Dict[str, Any]:
    def convert(array):
        return [[None if np.isinf(value) else float(value) for value in row] for row in array]
    return {"lower": convert(lower), "upper": convert(upper)}


def problem_to_dict(spec: ProblemSpec, discretization: Optional[dict] = None,
                    slack_unit: Optional[str] = None) -> Dict[str, Any]:
    """Serializes a problem; demand is already folded into the couplings."""
    data: Dict[str, Any] = {
        "name": spec.name,
        "horizon": spec.horizon,
        "noise": spec.noise.to_dict(),
        "coupling": {"dimension": spec.coupling_dim},
        "subsystems": [{
            "name": sub.name,
            "x0": sub.x0.tolist(),
            "control_dim": sub.control_dim,
            "dynamics": sub.dynamics.to_dict(),
            "stage_cost": sub.stage_cost.to_dict(),
            "final_cost": sub.final_cost.to_dict(),
            "coupling": sub.coupling.to_dict(),
            "state_bounds": _bounds_to_lists(sub.state_lower, sub.state_upper),
            "control_bounds": _bounds_to_lists(sub.control_lower, sub.control_upper),
            "metadata": sub.metadata,
        } for sub in spec.subsystems],
    }
    if discretization is not None:
        data["discretization"] = discretization
    if slack_unit is not None:
        data["slack_unit"] = slack_unit
    return data


@dataclass
class ProblemFile:
    """A parsed problem file: the problem (if it could be built) and its report."""

    path: str
    spec: Optional[ProblemSpec]
    report: ValidationReport
    discretization: Dict[str, Any] = field(default_factory=dict)
    slack_unit: Optional[str] = None


def load_problem(file_path: str) -> ProblemFile:
    """Reads and validates a problem file; schema violations end up in the report."""
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"The problem file, {file_path}, was not found.")
    report = ValidationReport()
    try:
        data = read_document(file_path)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        report.add("file", f"not a JSON or YAML document: {exc}")
        return ProblemFile(file_path, None, report)
    if not isinstance(data, dict):
        report.add("file", "the document is not a mapping of sections")
        return ProblemFile(file_path, None, report)
    for section in ("horizon", "noise", "subsystems"):
        if section not in data:
            report.add("schema", f"missing section '{section}'")
    if not report.is_valid:
        return ProblemFile(file_path, None, report)
    try:
        spec = problem_from_dict(data)
    except (KeyError, ValueError, TypeError, IndexError,
            AttributeError) as exc:  # a section of the wrong shape
        report.add("schema", f"{type(exc).__name__}: {exc}")
        return ProblemFile(file_path, None, report)
    return ProblemFile(file_path, spec, validate_problem(spec),
                       dict(data.get("discretization", {})), data.get("slack_unit"))


def write_problem(file_path: str, spec: ProblemSpec, discretization: Optional[dict] = None,
                  slack_unit: Optional[str] = None):
    """Writes a problem file as JSON."""
    with open(file_path, "w", encoding="utf-8") as file:
        json.dump(problem_to_dict(spec, discretization, slack_unit), file, indent=2)
