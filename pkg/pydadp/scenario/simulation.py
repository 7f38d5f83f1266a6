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
"""Forward simulation of feedback policies and slack-unit feasibility recovery."""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from pydadp.exceptions import NonFiniteValue
from pydadp.model.catalog import apply_matrix
from pydadp.model.problem import ProblemSpec, coupling_inverse
from pydadp.scenario.sampling import MonteCarloEstimate, ScenarioSet, monte_carlo_estimate

logger = logging.getLogger(__name__)  # pylint: disable=C0103

STATE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TrajectoryBundle:
    """Paths of every subsystem along every scenario.

    ``states[i]`` is (S, T + 1, n_i) and ``controls[i]`` is (S, T, m_i); costs are split by
    subsystem, residuals r_t = Σ_i g_t^i are (S, T, d). ``clipped`` flags policy controls
    moved onto their bounds; ``slack_violations`` and ``slack_shortfall`` record a slack
    requirement that could not be met.
    """

    spec: ProblemSpec
    scenarios: ScenarioSet
    states: Tuple[np.ndarray, ...]
    controls: Tuple[np.ndarray, ...]
    stage_costs: np.ndarray
    final_costs: np.ndarray
    residuals: np.ndarray
    clipped: np.ndarray
    state_violations: np.ndarray
    slack_violations: Optional[np.ndarray] = None
    slack_shortfall: Optional[np.ndarray] = None

    @property
    def count(self) -> int:
        """Number of scenarios S."""
        return self.stage_costs.shape[0]

    def total_costs(self) -> np.ndarray:
        """Per-scenario cost, summed stage by stage in subsystem order, then final costs."""
        total = np.zeros(self.count)
        for t in range(self.stage_costs.shape[1]):
            for i in range(self.stage_costs.shape[2]):
                total = total + self.stage_costs[:, t, i]
        for i in range(self.final_costs.shape[1]):
            total = total + self.final_costs[:, i]
        return total


def _check_coverage(spec: ProblemSpec, policies: Sequence) -> None:
    covered = [unit for policy in policies for unit in policy.units]
    if sorted(covered) != list(range(spec.size)):
        raise ValueError(f"Policies cover subsystems {covered}, expected each of "
                         f"0..{spec.size - 1} exactly once")


def simulate_policy(spec: ProblemSpec, policies: Sequence, scenarios: ScenarioSet,
                    memory: Optional[np.ndarray] = None) -> TrajectoryBundle:
    """Integrates the dynamics along every scenario under hazard-decision feedback.

    Args:
        spec: the problem.
        policies: feedback laws; each covers one or more subsystems (``policy.units``).
        scenarios: the noise paths.
        memory: information memories (S, T, p) for policies that keep y_{t-1}.

    Returns:
        TrajectoryBundle: states, clipped controls, costs and coupling residuals.
    """
    _check_coverage(spec, policies)
    count, horizon = scenarios.count, scenarios.horizon
    subsystems = spec.subsystems
    states = [np.zeros((count, horizon + 1, sub.state_dim)) for sub in subsystems]
    controls = [np.zeros((count, horizon, sub.control_dim)) for sub in subsystems]
    stage_costs = np.zeros((count, horizon, spec.size))
    final_costs = np.zeros((count, spec.size))
    residuals = np.zeros((count, horizon, spec.coupling_dim))
    clipped = np.zeros((count, horizon, spec.size), dtype=bool)
    for i, sub in enumerate(subsystems):
        states[i][:, 0] = sub.x0
    for t in range(horizon):
        w = scenarios.noise[:, t]
        for policy in policies:
            x = np.concatenate([states[i][:, t] for i in policy.units], axis=1)
            if policy.memory_dim:
                if memory is None:
                    raise ValueError("A policy keeps information in memory; pass the memories")
                policy_memory = memory[:, t, :policy.memory_dim]
            else:
                policy_memory = np.zeros((count, 0))
            u = policy.control(t, x, w, policy_memory)
            column = 0
            for i in policy.units:
                width = subsystems[i].control_dim
                controls[i][:, t] = u[:, column:column + width]
                column += width
        for i, sub in enumerate(subsystems):
            u = controls[i][:, t]
            bad = np.flatnonzero(~np.all(np.isfinite(u), axis=1))
            if bad.size:
                raise NonFiniteValue(f"Non-finite control in scenario {bad[0]}, stage {t}, "
                                     f"subsystem {sub.name}")
            bounded = np.clip(u, sub.control_lower[t], sub.control_upper[t])
            clipped[:, t, i] = np.any(bounded != u, axis=1)
            controls[i][:, t] = bounded
            x = states[i][:, t]
            stage_costs[:, t, i] = sub.stage_cost(t, x, bounded, w)
            states[i][:, t + 1] = sub.dynamics(t, x, bounded, w)
            residuals[:, t] = residuals[:, t] + sub.coupling(t, x, bounded, w)
    for i, sub in enumerate(subsystems):
        final_costs[:, i] = sub.terminal(states[i][:, horizon])
    if clipped.any():
        logger.debug("%d policy controls clipped onto their bounds", int(clipped.sum()))
    return TrajectoryBundle(spec, scenarios, tuple(states), tuple(controls), stage_costs,
                            final_costs, residuals, clipped,
                            _state_violations(spec, states))


def _state_violations(spec: ProblemSpec, states: Sequence[np.ndarray]) -> np.ndarray:
    count, steps = states[0].shape[0], states[0].shape[1]
    violations = np.zeros((count, steps, spec.size), dtype=bool)
    for i, sub in enumerate(spec.subsystems):
        for t in range(steps):
            violations[:, t, i] = ~sub.states_within(t, states[i][:, t], STATE_TOLERANCE)
    return violations


def estimate_cost(bundle: TrajectoryBundle) -> MonteCarloEstimate:
    """Expected total cost (stage costs plus final costs) with its 95% CI."""
    return monte_carlo_estimate(bundle.total_costs(), bundle.scenarios)


def recover_feasibility(bundle: TrajectoryBundle, slack_unit: int) -> TrajectoryBundle:
    """Overwrites the slack unit's control so that Σ_i g_t^i = 0 at every stage.

    The other units' paths are left untouched. A requirement outside the slack unit's
    bounds is clipped; the residual that remains, the violation flag and the shortfall
    (required minus applied control) are recorded.

    Residuals keep the sign of the coupling Σ_i g_t^i, shortfalls that of required minus
    applied: a slack requirement of −2 clipped to 0 against a demand of 10 met 12 by the
    others records the residual +2 (overproduction) and the shortfall −2.
    """
    spec = bundle.spec
    sub = spec.subsystems[slack_unit]
    inverses = [coupling_inverse(sub, t) for t in range(spec.horizon)]
    count, horizon = bundle.count, spec.horizon
    states = [array.copy() for array in bundle.states]
    controls = [array.copy() for array in bundle.controls]
    stage_costs = bundle.stage_costs.copy()
    final_costs = bundle.final_costs.copy()
    residuals = bundle.residuals.copy()
    violations = np.zeros((count, horizon), dtype=bool)
    shortfall = np.zeros((count, horizon, sub.control_dim))
    for t in range(horizon):
        w = bundle.scenarios.noise[:, t]
        old_state, new_state = bundle.states[slack_unit][:, t], states[slack_unit][:, t]
        old_control = bundle.controls[slack_unit][:, t]
        residual = residuals[:, t]
        moved = np.any(new_state != old_state, axis=1)
        if moved.any():
            residual = residual + np.where(
                moved[:, None],
                sub.coupling(t, new_state, old_control, w)
                - sub.coupling(t, old_state, old_control, w), 0.0)
        required = old_control - apply_matrix(inverses[t], residual)
        applied = np.clip(required, sub.control_lower[t], sub.control_upper[t])
        shortfall[:, t] = required - applied
        violations[:, t] = np.any(shortfall[:, t] != 0.0, axis=1)
        residuals[:, t] = apply_matrix(sub.coupling.affine_form(t)[1], applied - required)
        controls[slack_unit][:, t] = applied
        stage_costs[:, t, slack_unit] = sub.stage_cost(t, new_state, applied, w)
        states[slack_unit][:, t + 1] = sub.dynamics(t, new_state, applied, w)
    final_costs[:, slack_unit] = sub.terminal(states[slack_unit][:, horizon])
    if violations.any():
        logger.debug("slack requirement out of bounds at %d (scenario, stage) pairs",
                     int(violations.sum()))
    return replace(bundle, states=tuple(states), controls=tuple(controls),
                   stage_costs=stage_costs, final_costs=final_costs, residuals=residuals,
                   state_violations=_state_violations(spec, states),
                   slack_violations=violations, slack_shortfall=shortfall)
