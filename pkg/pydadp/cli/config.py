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
"""A RunConfig object keeping defaults, parameter-file values and flags apart"""
import copy
import json
import os
from typing import Any, Dict, Optional

import numpy as np
import yaml

from pydadp.condexp.estimators import KINDS
from pydadp.dadp.coordinator import UzawaConfig

LAYERS = ("defaults", "file", "cli")

DEFAULTS: Dict[str, Any] = {
    "problem": None,
    "generator": None,
    "generator_params": {},
    "output": "dadp_output",
    "info": "constant",
    "estimator": "constant",
    "bins": 10,
    "bandwidth": None,
    "iters": 20,
    "rho": 0.5,
    "scenarios": 500,
    "seed": 0,
    "exhaustive": False,
    "slack_unit": None,
    "gap_tolerance": 1e-8,
    "residual_tolerance": 1e-8,
    "strong_convexity": None,
    "lipschitz": None,
    "state_nodes": None,
    "control_nodes": None,
    "threads": 1,
    "histogram_bins": 20,
    "node_cap": 10 ** 6,
    "tree_cap": 10 ** 7,
    "policy": "dadp",
    "eval_scenarios": 1000,
    "eval_seed": None,
    "scenario_file": None,
    "strugarek": None,
    "oracle": "strugarek",
    "multipliers": False,
}

POSITIVE_INTEGERS = ("bins", "iters", "scenarios", "threads", "histogram_bins", "node_cap",
                     "tree_cap", "eval_scenarios")


def parse_params_file(params_file) -> Dict[str, Any]:
    """Reads the ``dadp`` section of a YAML parameter file, keys normalized to underscores"""
    document = yaml.safe_load(params_file) or {}
    if "dadp" not in document:
        raise ValueError("The parameter file needs a top-level 'dadp:' section")
    params = document["dadp"] or {}
    for param in list(params.keys()):
        params[param.replace("-", "_")] = params.pop(param)
    return params


class RunConfig(dict):
    """The resolved settings of one command, layered as defaults < file < cli"""

    def __init__(self, config=None, **kwargs):
        super().__init__(**kwargs)
        if isinstance(config, RunConfig):
            self.defaults: dict = copy.deepcopy(config["defaults"])
            self.file: dict = copy.deepcopy(config["file"])
            self.cli: dict = copy.deepcopy(config["cli"])
        else:
            self.defaults = copy.deepcopy(DEFAULTS)
            self.file = {}
            self.cli = {}
            if isinstance(config, dict):
                self.update_layer("cli", config)

    def get_accumulated_dict(self) -> Dict[str, Any]:
        """Returns a dictionary of all the layers merged into one."""
        return {**self.defaults, **self.file, **self.cli}

    def __repr__(self):
        return self.get_accumulated_dict().__repr__()

    def __str__(self):
        return json.dumps(self.get_accumulated_dict(), indent=4, sort_keys=True, default=str)

    def get_layer(self, layer: str) -> dict:
        """Returns the dictionary of one layer"""
        if layer not in LAYERS:
            raise KeyError(f"Unknown configuration layer '{layer}', expected one of {LAYERS}")
        return getattr(self, layer)

    def __getitem__(self, k):
        if k in LAYERS:
            return self.get_layer(k)
        for layer in (self.cli, self.file, self.defaults):
            if k in layer:
                return layer[k]
        raise KeyError(k)

    def __setitem__(self, k, v):
        self.update_layer("cli", {k: v})

    def __contains__(self, k):
        return k in self.get_accumulated_dict()

    def keys(self):
        return self.get_accumulated_dict().keys()

    def items(self):
        return sorted(self.get_accumulated_dict().items())

    def __iter__(self):
        return iter(self.get_accumulated_dict())

    def __len__(self):
        return len(self.get_accumulated_dict())

    def get(self, k, default=None):
        try:
            return self[k]
        except KeyError:
            return default

    def update_layer(self, layer: str, values: Dict[str, Any]):
        """Stores known keys in a layer; unknown keys raise a KeyError"""
        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            raise KeyError(f"Unknown configuration keys: {', '.join(unknown)}")
        self.get_layer(layer).update(copy.deepcopy(values))

    def check(self, command: Optional[str] = None):
        """Raises a ValueError (or FileNotFoundError) naming the first invalid setting"""
        for key in POSITIVE_INTEGERS:
            if int(self[key]) < 1:
                raise ValueError(f"{key} must be a positive integer, got {self[key]}")
        if np.any(np.asarray(self["rho"], dtype=float) <= 0):
            raise ValueError(f"rho must be positive, got {self['rho']}")
        if self["estimator"] not in KINDS:
            raise ValueError(f"Unknown estimator '{self['estimator']}', "
                             f"expected one of {KINDS}")
        if self["policy"] not in ("dadp", "dp"):
            raise ValueError(f"Unknown policy '{self['policy']}', expected dadp or dp")
        for key in ("problem", "scenario_file", "strugarek"):
            if self[key] is not None and not os.path.exists(self[key]):
                raise FileNotFoundError(f"The {key.replace('_', ' ')}, {self[key]}, "
                                        f"was not found.")
        if command in ("solve-dp", "solve-dadp", "simulate") \
                and self["problem"] is None and self["generator"] is None:
            raise ValueError("Give a problem file with --problem or a benchmark "
                             "with --generator")
        parent = os.path.dirname(os.path.abspath(self["output"]))
        if not os.access(parent, os.W_OK):
            raise ValueError(f"The output directory {self['output']} is not writable")

    def uzawa_config(self, slack_unit: Optional[int]) -> UzawaConfig:
        """The coordination settings carried by this configuration"""
        options: Dict[str, Any] = {"bins": int(self["bins"])}
        if self["estimator"] == "kernel":
            options = {"bandwidth": self["bandwidth"]}
        elif self["estimator"] == "constant":
            options = {}
        if self["info"] == "perfect" and self["estimator"] == "binned":
            options = {"edges": "singleton"}
        return UzawaConfig(
            step_sizes=self["rho"],
            max_iterations=int(self["iters"]),
            scenario_count=int(self["scenarios"]),
            seed=int(self["seed"]),
            gap_tolerance=float(self["gap_tolerance"]),
            residual_tolerance=float(self["residual_tolerance"]),
            strong_convexity=self["strong_convexity"],
            lipschitz=self["lipschitz"],
            estimator=self["estimator"],
            estimator_options=options,
            exhaustive=bool(self["exhaustive"]),
            slack_unit=slack_unit,
            threads=int(self["threads"]),
            histogram_bins=int(self["histogram_bins"]),
            node_cap=int(self["node_cap"]),
            tree_cap=int(self["tree_cap"]),
        )
