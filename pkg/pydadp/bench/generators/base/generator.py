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
"""The abstract class off of which to implement benchmark generators."""
from abc import ABC, abstractmethod
from dataclasses import fields
from typing import Any, Dict, Optional

from pydadp.bench.helpers import load_defaults
from pydadp.dp.grid import Discretization
from pydadp.model.problem import ProblemSpec


class BaseGenerator(ABC):
    """
    The abstract class off of which to implement generators.

    The name of the directory holding ``generator.py`` is the identifier. Parameters are
    read from the generator's section of ``defaults.yaml`` and overridden by the caller.
    """

    # pylint: disable=too-few-public-methods

    __name__ = "BaseGenerator"

    # Section of defaults.yaml and name on the command line
    name = "base"
    params_class: Any = None
    # Name of the subsystem absorbing the coupling residual in simulation
    slack_unit: Optional[str] = None

    def params(self, overrides: Optional[Dict[str, Any]] = None):
        """The generator's parameters: defaults updated by known override keys."""
        values = load_defaults(self.name)
        names = {entry.name for entry in fields(self.params_class)}
        for key, value in (overrides or {}).items():
            key = key.replace("-", "_")
            if key not in names:
                raise ValueError(f"Unknown parameter '{key}' for the {self.name} generator")
            values[key] = value
        return self.params_class(**{key: value for key, value in values.items()
                                    if key in names})

    def slack_index(self, spec: ProblemSpec) -> Optional[int]:
        """Index of the slack unit in a generated problem"""
        return None if self.slack_unit is None else spec.unit_index(self.slack_unit)

    @abstractmethod
    def make(self, params) -> ProblemSpec:
        """Builds the benchmark problem"""

    def discretization(self, spec: ProblemSpec, params) -> Optional[Discretization]:
        """Default grids of the benchmark, if it has any"""
        return None


GENERATOR = BaseGenerator
