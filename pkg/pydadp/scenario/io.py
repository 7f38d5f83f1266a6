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
"""CSV import and export of scenarios and trajectories."""
from typing import Optional

import numpy as np
import pandas as pd

from pydadp.model.problem import NoiseModel
from pydadp.scenario.sampling import ScenarioSet
from pydadp.scenario.simulation import TrajectoryBundle

FLOAT_FORMAT = "%.17g"


def scenario_frame(scenarios: ScenarioSet) -> pd.DataFrame:
    """One row per (scenario_id, t) with the probability and the noise coordinates."""
    count, horizon = scenarios.count, scenarios.horizon
    frame = pd.DataFrame({
        "scenario_id": np.repeat(np.arange(count), horizon),
        "t": np.tile(np.arange(horizon), count),
        "probability": np.repeat(scenarios.probabilities, horizon),
    })
    values = scenarios.noise.reshape(count * horizon, -1)
    for k, name in enumerate(scenarios.names):
        frame[name] = values[:, k]
    return frame


def write_scenarios(path: str, scenarios: ScenarioSet):
    """Writes the scenario CSV."""
    scenario_frame(scenarios).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_scenarios(path: str, noise: Optional[NoiseModel] = None) -> ScenarioSet:
    """Reads a scenario CSV; with a noise model, the columns are taken in its order."""
    frame = pd.read_csv(path).sort_values(["scenario_id", "t"], kind="stable")
    if noise is not None:
        missing = [name for name in noise.names if name not in frame.columns]
        if missing:
            raise ValueError(f"Scenario file {path} lacks the noise columns {missing}")
        names = list(noise.names)
    else:
        names = [column for column in frame.columns
                 if column not in ("scenario_id", "t", "probability")]
    identifiers = frame["scenario_id"].unique()
    horizon = int(frame["t"].max()) + 1
    if frame.shape[0] != identifiers.shape[0] * horizon:
        raise ValueError(f"Scenario file {path} does not give every scenario all "
                         f"{horizon} stages")
    if noise is not None and horizon != noise.horizon:
        raise ValueError(f"Scenario file {path} has {horizon} stages, "
                         f"the problem {noise.horizon}")
    values = frame[names].to_numpy(dtype=float).reshape(identifiers.shape[0], horizon,
                                                        len(names))
    if "probability" in frame.columns:
        probabilities = frame["probability"].to_numpy(dtype=float)[::horizon]
    else:
        probabilities = np.full(identifiers.shape[0], 1.0 / identifiers.shape[0])
    return ScenarioSet(values, probabilities, None, "file", tuple(names))


def trajectory_frame(bundle: TrajectoryBundle) -> pd.DataFrame:
    """One row per (scenario_id, t, subsystem); stage T carries the final states only.

    State and control columns are padded with NaN up to the largest subsystem dimension.
    """
    spec = bundle.spec
    count, horizon = bundle.count, spec.horizon
    state_width = max(sub.state_dim for sub in spec.subsystems)
    control_width = max(sub.control_dim for sub in spec.subsystems)
    frames = []
    for i, sub in enumerate(spec.subsystems):
        frame = pd.DataFrame({
            "scenario_id": np.repeat(np.arange(count), horizon + 1),
            "t": np.tile(np.arange(horizon + 1), count),
            "subsystem": sub.name,
        })
        states = bundle.states[i].reshape(count * (horizon + 1), sub.state_dim)
        for k in range(state_width):
            frame[f"state_{k}"] = states[:, k] if k < sub.state_dim else np.nan
        padded = np.full((count, horizon + 1, control_width), np.nan)
        padded[:, :horizon, :sub.control_dim] = bundle.controls[i]
        padded = padded.reshape(count * (horizon + 1), control_width)
        for k in range(control_width):
            frame[f"control_{k}"] = padded[:, k]
        costs = np.full((count, horizon + 1), np.nan)
        costs[:, :horizon] = bundle.stage_costs[:, :, i]
        costs[:, horizon] = bundle.final_costs[:, i]
        frame["cost"] = costs.reshape(-1)
        frames.append(frame)
    frame = pd.concat(frames, ignore_index=True).sort_values(
        ["scenario_id", "t"], kind="stable").reset_index(drop=True)
    residuals = np.full((count, horizon + 1, spec.coupling_dim), np.nan)
    residuals[:, :horizon] = bundle.residuals
    residuals = residuals.reshape(count * (horizon + 1), spec.coupling_dim)
    rows = frame["scenario_id"].to_numpy() * (horizon + 1) + frame["t"].to_numpy()
    for j in range(spec.coupling_dim):
        frame[f"residual_{j}"] = residuals[rows, j]
    return frame
