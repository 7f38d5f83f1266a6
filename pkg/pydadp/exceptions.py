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
"""Exceptions defined for use across pydadp"""


class InvalidProblemProvided(ValueError):
    """Raised when a problem definition fails validation; carries the report"""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


class GridCapExceeded(RuntimeError):
    """A grid or joint control set is larger than the configured cap"""


class ProblemInfeasible(RuntimeError):
    """No admissible control exists on the discretization"""


class NonFiniteValue(ValueError):
    """A policy, sample or residual produced a NaN or an infinite value"""


class DevianceUndefined(ValueError):
    """The deviance needs at least two rows with nonzero target variance"""


class TreeCapExceeded(RuntimeError):
    """The scenario tree times the control grid exceeds the evaluation cap"""


class IterationFailed(RuntimeError):
    """A coordination iteration aborted; keeps the reports produced before it"""

    def __init__(self, message: str, iteration: int, trace: list):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace
