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
"""Test cases for the scenario and trajectory CSVs."""

import os

import numpy as np
import pandas as pd
import pytest

from pydadp.bench.generators.three_unit.generator import ThreeUnitParams, make_three_unit
from pydadp.scenario.io import (read_scenarios, scenario_frame, trajectory_frame,
                                write_scenarios)
from pydadp.scenario.sampling import enumerate_tree, sample_scenarios
from pydadp.scenario.simulation import simulate_policy
from tests.problems import FixedPolicy, load_hydro_thermal


def test_scenario_frame_layout():
    """One row per scenario and stage, noise coordinates by name."""
    scenarios = enumerate_tree(load_hydro_thermal()[0].noise)
    frame = scenario_frame(scenarios)
    assert list(frame.columns) == ["scenario_id", "t", "probability", "demand", "inflow"]
    assert frame.shape[0] == 8 * 3
    assert list(frame["t"][:3]) == [0, 1, 2]
    np.testing.assert_allclose(frame["probability"], 0.125)


def test_written_scenarios_read_back(tmp_path):
    """Sampled paths survive the CSV exactly."""
    noise = load_hydro_thermal()[0].noise
    scenarios = sample_scenarios(noise, 20, seed=3)
    path = os.path.join(tmp_path, "scenarios.csv")
    write_scenarios(path, scenarios)
    reread = read_scenarios(path, noise)
    assert reread.source == "file"
    np.testing.assert_array_equal(reread.noise, scenarios.noise)
    np.testing.assert_array_equal(reread.probabilities, scenarios.probabilities)


def test_read_scenarios_orders_columns_by_the_noise_model(tmp_path):
    """Columns are matched by name; rows may come in any order."""
    frame = pd.DataFrame({"t": [1, 0, 0, 1], "scenario_id": [0, 0, 1, 1],
                          "inflow": [0.5, 0.5, 0.5, 0.5], "demand": [4.0, 2.0, 2.0, 2.0],
                          "extra": [9.0, 9.0, 9.0, 9.0]})
    path = os.path.join(tmp_path, "shuffled.csv")
    frame.to_csv(path, index=False)
    noise = load_hydro_thermal()[0].noise
    with pytest.raises(ValueError, match="has 2 stages, the problem 3"):
        read_scenarios(path, noise)
    scenarios = read_scenarios(path)
    assert scenarios.names == ("inflow", "demand", "extra")
    np.testing.assert_array_equal(scenarios.noise[0, :, 1], [2.0, 4.0])
    np.testing.assert_allclose(scenarios.probabilities, [0.5, 0.5])


@pytest.mark.parametrize("frame,message", [
    pytest.param(pd.DataFrame({"scenario_id": [0, 0, 0], "t": [0, 1, 2],
                               "demand": [2.0, 2.0, 2.0]}),
                 "lacks the noise columns", id="missing-column"),
    pytest.param(pd.DataFrame({"scenario_id": [0, 0, 0, 1], "t": [0, 1, 2, 0],
                               "demand": [2.0] * 4, "inflow": [0.5] * 4}),
                 "does not give every scenario all 3 stages", id="incomplete-scenario"),
])
def test_malformed_scenario_files(tmp_path, frame, message):
    """Scenario files that do not fit the problem are refused."""
    path = os.path.join(tmp_path, "malformed.csv")
    frame.to_csv(path, index=False)
    with pytest.raises(ValueError, match=message):
        read_scenarios(path, load_hydro_thermal()[0].noise)


def test_trajectory_frame_layout():
    """Stage T carries the final states and costs; padding and residuals are NaN there."""
    spec = make_three_unit(ThreeUnitParams(horizon=2, demand_values=(10.0,),
                                           inflow_values=(0.0,), hydro_max=5.0))
    policies = [FixedPolicy([0, 1], [1.0, 1.0]), FixedPolicy([2], [8.0])]
    bundle = simulate_policy(spec, policies, enumerate_tree(spec.noise))
    frame = trajectory_frame(bundle)
    assert frame.shape[0] == 1 * 3 * 3
    assert list(frame.columns) == ["scenario_id", "t", "subsystem", "state_0", "control_0",
                                   "cost", "residual_0"]
    thermal = frame[frame["subsystem"] == "thermal"]
    assert thermal["state_0"].isna().all()
    final = frame[frame["t"] == 2]
    assert final["control_0"].isna().all()
    assert final["residual_0"].isna().all()
    hydro = frame[(frame["subsystem"] == "hydro_1")]
    np.testing.assert_allclose(hydro["state_0"], [5.0, 4.0, 3.0])
    np.testing.assert_allclose(hydro["cost"].iloc[-1], 0.1 * 4.0)
    np.testing.assert_allclose(frame[frame["t"] == 0]["residual_0"], 0.0)
