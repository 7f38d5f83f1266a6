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
"""Structural validation of decomposable problems."""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from pydadp.model.problem import NoiseModel, ProblemSpec, SubsystemSpec

PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Violation:
    """One violated structural invariant and where it was found."""

    location: str
    message: str

    def __str__(self):
        return f"{self.location}: {self.message}"


@dataclass
class ValidationReport:
    """Every violated invariant of a problem; empty when the problem is valid."""

    violations: List[Violation] = field(default_factory=list)

    def add(self, location: str, message: str):
        """Records a violation."""
        self.violations.append(Violation(location, message))

    @property
    def is_valid(self) -> bool:
        """True when nothing was reported."""
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __str__(self):
        if self.is_valid:
            return "OK"
        return "\n".join(str(violation) for violation in self.violations)


def validate_noise(noise: NoiseModel, size: int, report: ValidationReport):
    """Checks stage distributions and the local/global partition."""
    if noise.horizon < 1:
        report.add("noise", "horizon must be at least one stage")
    for t, (support, probabilities) in enumerate(zip(noise.supports, noise.probabilities)):
        location = f"noise, stage {t}"
        if support.shape[0] != probabilities.shape[0]:
            report.add(location, f"{support.shape[0]} support points but "
                                 f"{probabilities.shape[0]} probabilities")
            continue
        if support.shape[0] == 0:
            report.add(location, "empty support")
            continue
        if not np.all(np.isfinite(support)):
            report.add(location, "non-finite support point")
        if np.any(probabilities < 0):
            report.add(location, "negative probability")
        if abs(float(np.sum(probabilities)) - 1.0) > PROBABILITY_TOLERANCE:
            report.add(location, f"probabilities sum to {float(np.sum(probabilities))!r}, not 1")
    if len(noise.partition) != noise.dimension:
        report.add("noise", f"partition has {len(noise.partition)} entries for "
                            f"{noise.dimension} coordinates")
    for k, owner in enumerate(noise.partition):
        if owner is not None and not (isinstance(owner, (int, np.integer)) and 0 <= owner < size):
            report.add(f"noise, coordinate {k}",
                       f"partition entry {owner!r} is neither global nor a subsystem index")


def _check_bounds(sub: SubsystemSpec, horizon: int, location: str, report: ValidationReport):
    n, m = sub.state_dim, sub.control_dim
    for name, bound, rows, dim in (("state_lower", sub.state_lower, horizon + 1, n),
                                   ("state_upper", sub.state_upper, horizon + 1, n),
                                   ("control_lower", sub.control_lower, horizon, m),
                                   ("control_upper", sub.control_upper, horizon, m)):
        if bound.shape != (rows, dim):
            report.add(location, f"{name} has shape {bound.shape}, expected {(rows, dim)} "
                                 "(horizon mismatch)")
            return
    for t in range(horizon):
        if np.any(sub.control_lower[t] > sub.control_upper[t]):
            report.add(f"{location}, stage {t}", "control bounds inverted")
    for t in range(horizon + 1):
        if np.any(sub.state_lower[t] > sub.state_upper[t]):
            report.add(f"{location}, stage {t}", "state bounds inverted")
    if np.any(sub.x0 < sub.state_lower[0]) or np.any(sub.x0 > sub.state_upper[0]):
        report.add(f"{location}, stage 0", "initial state outside the state bounds")


def validate_subsystem(sub: SubsystemSpec, index: int, spec: ProblemSpec,
                       report: ValidationReport):
    """Checks one subsystem's shapes, bounds and coupling dimension."""
    location = f"subsystem {index}"
    horizon, q = spec.horizon, spec.noise.dimension
    n, m = sub.state_dim, sub.control_dim
    _check_bounds(sub, horizon, location, report)
    for message in sub.dynamics.check_shapes(n, n, m, q, horizon):
        report.add(location, f"dynamics: {message}")
    for message in sub.stage_cost.check_shapes(n + m, q, horizon):
        report.add(location, f"stage cost: {message}")
    for message in sub.final_cost.check_shapes(n, 0, None):
        report.add(location, f"final cost: {message}")
    if sub.coupling.output_dim != spec.coupling_dim:
        report.add(location, f"coupling dimension mismatch: {sub.coupling.output_dim} "
                             f"instead of {spec.coupling_dim}")
    else:
        for message in sub.coupling.check_shapes(spec.coupling_dim, n, m, q, horizon):
            report.add(location, f"coupling: {message}")


def validate_problem(spec: ProblemSpec) -> ValidationReport:
    """Reports every violated structural invariant of a problem; never raises."""
    report = ValidationReport()
    try:
        validate_noise(spec.noise, spec.size, report)
    except (ValueError, TypeError, IndexError, AttributeError) as exc:
        report.add("noise", f"malformed noise model: {exc}")
    if spec.size == 0:
        report.add("problem", "no subsystems")
    if spec.coupling_dim < 1:
        report.add("problem", "coupling dimension must be at least 1")
    for index, sub in enumerate(spec.subsystems):
        try:
            validate_subsystem(sub, index, spec, report)
        except (ValueError, TypeError, IndexError, AttributeError) as exc:
            report.add(f"subsystem {index}", f"malformed subsystem: {exc}")
    return report
