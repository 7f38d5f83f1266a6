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
"""Test cases for the layered run configuration."""

import io

import pytest

from pydadp.cli.config import DEFAULTS, RunConfig, parse_params_file
from tests.problems import data_file


def test_layers_take_precedence_in_order():
    """defaults < file < cli"""
    config = RunConfig()
    assert config["iters"] == DEFAULTS["iters"]
    config.update_layer("file", {"iters": 5, "seed": 3})
    config.update_layer("cli", {"iters": 2})
    assert config["iters"] == 2
    assert config["seed"] == 3
    assert config["file"] == {"iters": 5, "seed": 3}
    merged = config.get_accumulated_dict()
    assert (merged["iters"], merged["seed"], merged["rho"]) == (2, 3, 0.5)
    copied = RunConfig(config)
    copied["iters"] = 7
    assert (copied["iters"], config["iters"]) == (7, 2)


def test_unknown_keys():
    """Keys and layers outside the known sets are refused."""
    with pytest.raises(KeyError, match="Unknown configuration keys: colour"):
        RunConfig({"colour": "blue"})
    with pytest.raises(KeyError, match="Unknown configuration layer 'env'"):
        RunConfig().get_layer("env")
    assert RunConfig().get("colour", 4) == 4


def test_parse_params_file():
    """The dadp section is read with dashes turned into underscores."""
    params = parse_params_file(io.StringIO("dadp:\n  gap-tolerance: 0.5\n  iters: 3\n"))
    assert params == {"gap_tolerance": 0.5, "iters": 3}
    with pytest.raises(ValueError, match="top-level 'dadp:' section"):
        parse_params_file(io.StringIO("solver:\n  iters: 3\n"))


@pytest.mark.parametrize("values,command,error,message", [
    pytest.param({"bins": 0}, None, ValueError, "bins must be a positive integer",
                 id="zero-bins"),
    pytest.param({"rho": -0.1}, None, ValueError, "rho must be positive", id="negative-rho"),
    pytest.param({"estimator": "spline"}, None, ValueError, "Unknown estimator 'spline'",
                 id="unknown-estimator"),
    pytest.param({"policy": "greedy"}, None, ValueError, "Unknown policy 'greedy'",
                 id="unknown-policy"),
    pytest.param({"problem": "missing.yaml"}, None, FileNotFoundError, "was not found",
                 id="missing-problem"),
    pytest.param({}, "solve-dp", ValueError, "Give a problem file", id="no-problem"),
])
def test_check(tmp_path, values, command, error, message):
    """The first invalid setting is named."""
    config = RunConfig({"output": str(tmp_path / "out"), **values})
    with pytest.raises(error, match=message):
        config.check(command)


def test_check_accepts_a_problem(tmp_path):
    """A readable problem and a writable output pass."""
    RunConfig({"problem": data_file("hydro_thermal.yaml"),
               "output": str(tmp_path / "out")}).check("solve-dadp")


@pytest.mark.parametrize("values,options", [
    pytest.param({}, {}, id="constant"),
    pytest.param({"estimator": "binned", "bins": 4}, {"bins": 4}, id="binned"),
    pytest.param({"estimator": "binned", "info": "perfect"}, {"edges": "singleton"},
                 id="perfect-memory"),
    pytest.param({"estimator": "kernel", "bandwidth": 0.3}, {"bandwidth": 0.3}, id="kernel"),
])
def test_uzawa_config(values, options):
    """Estimator options follow the estimator and the information."""
    config = RunConfig({"iters": 3, "rho": 0.25, **values}).uzawa_config(1)
    assert config.estimator_options == options
    assert (config.max_iterations, config.step_sizes, config.slack_unit) == (3, 0.25, 1)
