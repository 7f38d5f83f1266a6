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
"""Test cases for reading and writing problem files."""

import os

import numpy as np
import pytest
import yaml

from pydadp.model.schema import load_problem, problem_to_dict, write_problem
from tests.problems import data_file


def test_load_hydro_thermal():
    """The YAML test problem loads, validates and folds the demand into the thermal unit."""
    problem_file = load_problem(data_file("hydro_thermal.yaml"))
    assert problem_file.report.is_valid
    assert problem_file.slack_unit == "thermal"
    spec = problem_file.spec
    assert spec.horizon == 3
    assert [sub.name for sub in spec.subsystems] == ["hydro", "thermal"]
    assert spec.noise.partition == (None, 0)
    np.testing.assert_array_equal(spec.subsystems[1].coupling.noise_matrix, [[-1.0, 0.0]])
    np.testing.assert_array_equal(spec.subsystems[0].coupling.noise_matrix, [[0.0, 0.0]])
    assert spec.subsystems[1].state_dim == 0
    assert len(problem_file.discretization["units"]) == 2


def test_write_then_load(tmp_path):
    """A written problem reads back into the same serialized form."""
    problem_file = load_problem(data_file("hydro_thermal.yaml"))
    written = problem_to_dict(problem_file.spec, problem_file.discretization,
                              problem_file.slack_unit)
    path = os.path.join(tmp_path, "hydro_thermal.json")
    write_problem(path, problem_file.spec, problem_file.discretization, problem_file.slack_unit)
    reread = load_problem(path)
    assert reread.report.is_valid
    assert problem_to_dict(reread.spec, reread.discretization, reread.slack_unit) == written


def test_structurally_invalid_file():
    """A well-formed file with broken invariants yields a spec and a failing report."""
    problem_file = load_problem(data_file("broken_probabilities.yaml"))
    assert problem_file.spec is not None
    assert not problem_file.report.is_valid
    message = str(problem_file.report)
    assert "probabilities sum to" in message
    assert "initial state outside the state bounds" in message


def test_truncated_document():
    """A document that does not parse is reported, not raised."""
    problem_file = load_problem(data_file("truncated.json"))
    assert problem_file.spec is None
    assert "not a JSON or YAML document" in str(problem_file.report)


def test_missing_file():
    """A missing problem file is an error of the caller."""
    with pytest.raises(FileNotFoundError, match="was not found"):
        load_problem(data_file("does_not_exist.yaml"))


@pytest.mark.parametrize("change,message", [
    pytest.param(lambda data: data.pop("noise"), "missing section 'noise'", id="missing-noise"),
    pytest.param(lambda data: data.pop("subsystems"), "missing section 'subsystems'",
                 id="missing-subsystems"),
    pytest.param(lambda data: data["noise"].update(stages=data["noise"]["stages"] * 2),
                 "2 stages for a horizon of 3", id="noise-stage-mismatch"),
    pytest.param(lambda data: data["subsystems"][0]["stage_cost"].update(kind="spline"),
                 "Unknown cost kind 'spline'", id="unknown-cost"),
    pytest.param(lambda data: data["subsystems"][0]["dynamics"].update(kind="logistic"),
                 "dynamics must be of kind 'affine_dynamics'", id="unknown-dynamics"),
    pytest.param(lambda data: data["coupling"].update(demand="load"),
                 "Unknown noise coordinate 'load'", id="unknown-demand"),
    pytest.param(lambda data: data.update(coupling=[1]),
                 "The coupling section must be a mapping, got list", id="coupling-list"),
    pytest.param(lambda data: data["subsystems"].__setitem__(0, [1, 2]),
                 "Subsystem 0 must be a mapping, got list", id="subsystem-list"),
    pytest.param(lambda data: data["coupling"].update(demand=3),
                 "The demand must be a mapping, got int", id="scalar-demand"),
    pytest.param(lambda data: data["subsystems"][1].update(control_bounds=[0, 1]),
                 "Subsystem 1: control_bounds must be a mapping", id="bounds-list"),
    pytest.param(lambda data: data["noise"]["stages"].__setitem__(0, 2),
                 "Noise stage 0 must be a mapping, got int", id="stage-scalar"),
])
def test_schema_errors(tmp_path, change, message):
    """Schema violations end up in the report without a problem being built."""
    with open(data_file("hydro_thermal.yaml"), "r", encoding="utf-8") as file:
        data = yaml.safe_load(file)
    change(data)
    path = os.path.join(tmp_path, "changed.yaml")
    with open(path, "w", encoding="utf-8") as file:
        yaml.safe_dump(data, file)
    problem_file = load_problem(path)
    assert problem_file.spec is None
    assert message in str(problem_file.report)


def test_document_not_a_mapping(tmp_path):
    """A YAML list is not a problem file."""
    path = os.path.join(tmp_path, "list.yaml")
    with open(path, "w", encoding="utf-8") as file:
        file.write("- 1\n- 2\n")
    assert "not a mapping of sections" in str(load_problem(path).report)
