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
"""Synthetic multi-stock problem: N aggregated reservoirs and one thermal unit.

Stock sizes, inflow levels and a seasonal demand are drawn from a seeded generator. The
thermal cost is quadratic with a random coefficient (its availability factor), applied
through the ``scale_coordinate`` of the thermal stage cost.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pydadp.bench.generators.base.generator import BaseGenerator
from pydadp.dp.grid import Discretization, Grid, SubsystemGrid, control_candidates
from pydadp.model.catalog import (AffineCoupling, AffineDynamics, QuadraticCost,
                                  quadratic_final_cost)
from pydadp.model.problem import Marginal, NoiseModel, ProblemSpec, SubsystemSpec, stage_bounds
from pydadp.scenario.sampling import make_rng


@dataclass(frozen=True)
class MultistockParams:
    """Sizes, seed and cost levels of the multi-stock problem."""

    stocks: int = 7
    horizon: int = 12
    seed: int = 0
    epsilon: float = 0.01
    final_weight: float = 0.05
    thermal_quadratic: float = 0.5
    thermal_linear: float = 1.0
    season_length: int = 52
    state_nodes: int = 11
    control_nodes: int = 7
    thermal_nodes: int = 41

    def check(self):
        """Raises ValueError on invalid sizes."""
        if self.stocks < 1:
            raise ValueError("At least one stock is needed")
        if self.horizon < 2:
            raise ValueError("The horizon needs at least two stages")
        if self.epsilon <= 0:
            raise ValueError("strong convexity requires ε>0")


def _levels(rng: np.random.Generator, low: float, high: float) -> float:
    return float(np.round(rng.uniform(low, high) * 2.0) / 2.0)


def make_multistock(params: Optional[MultistockParams] = None) -> ProblemSpec:
    """Builds the problem; identical parameters give identical problems."""
    params = params or MultistockParams()
    params.check()
    rng = make_rng(params.seed)
    size, horizon = params.stocks, params.horizon
    capacities = [_levels(rng, 5.0, 15.0) for _ in range(size)]
    releases = [_levels(rng, 1.0, 3.0) for _ in range(size)]
    inflow_base = [float(rng.uniform(0.2, 1.0)) for _ in range(size)]
    demand_base = float(rng.uniform(0.6, 0.9)) * sum(releases) + 1.0
    names = ("demand", "availability") + tuple(f"inflow_{i + 1}" for i in range(size))
    partition = (None, None) + tuple(range(size))
    stages = []
    for t in range(horizon):
        season = 1.0 + 0.3 * np.cos(2.0 * np.pi * t / params.season_length)
        demand = Marginal.uniform(np.round([demand_base * season * 0.8,
                                            demand_base * season * 1.2], 3))
        availability = Marginal([1.0, 1.5], [0.8, 0.2])
        inflows = [Marginal.uniform(np.round([0.0, 2.0 * base * (2.0 - season)], 3))
                   for base in inflow_base]
        stages.append([demand, availability] + inflows)
    noise = NoiseModel.from_marginals(stages, names, partition)
    q = noise.dimension
    subsystems = []
    for i in range(size):
        selector = np.zeros((1, q))
        selector[0, 2 + i] = 1.0
        start = capacities[i] / 2.0
        subsystems.append(SubsystemSpec(
            name=f"stock_{i + 1}",
            x0=np.array([start]),
            dynamics=AffineDynamics(np.array([[1.0]]), np.array([[-1.0]]), selector,
                                    np.zeros(1)),
            stage_cost=QuadraticCost(np.array([[0.0, 0.0], [0.0, 2.0 * params.epsilon]]),
                                     np.zeros(2)),
            final_cost=quadratic_final_cost(params.final_weight, np.array([start])),
            coupling=AffineCoupling(np.zeros((1, 1)), np.array([[1.0]]), np.zeros((1, q)),
                                    np.zeros(1)),
            state_lower=stage_bounds(0.0, horizon + 1, 1, -np.inf),
            state_upper=stage_bounds(capacities[i], horizon + 1, 1, np.inf),
            control_lower=stage_bounds(0.0, horizon, 1, -np.inf),
            control_upper=stage_bounds(releases[i], horizon, 1, np.inf),
            metadata={"capacity": capacities[i]},
        ))
    thermal_max = float(np.ceil(max(np.max(support[:, 0]) for support in noise.supports)))
    subsystems.append(SubsystemSpec(
        name="thermal",
        x0=np.zeros(0),
        dynamics=AffineDynamics(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((0, q)),
                                np.zeros(0)),
        stage_cost=QuadraticCost(np.array([[2.0 * params.thermal_quadratic]]),
                                 np.array([params.thermal_linear]), scale_coordinate=1),
        final_cost=QuadraticCost(np.zeros((0, 0)), np.zeros(0)),
        coupling=AffineCoupling(np.zeros((1, 0)), np.array([[1.0]]), np.zeros((1, q)),
                                np.zeros(1)).fold_demand(0),
        state_lower=np.zeros((horizon + 1, 0)),
        state_upper=np.zeros((horizon + 1, 0)),
        control_lower=stage_bounds(0.0, horizon, 1, -np.inf),
        control_upper=stage_bounds(thermal_max, horizon, 1, np.inf),
    ))
    return ProblemSpec(tuple(subsystems), noise, 1, "multistock")


def multistock_discretization(spec: ProblemSpec, params: Optional[MultistockParams] = None
                              ) -> Discretization:
    """Uniform grids per stock and a thermal control grid."""
    params = params or MultistockParams()
    units = []
    for sub in spec.subsystems:
        if sub.state_dim:
            grid = Grid.uniform(sub.state_lower[0], sub.state_upper[0], [params.state_nodes])
            nodes = params.control_nodes
        else:
            grid = Grid.empty()
            nodes = params.thermal_nodes
        units.append(SubsystemGrid(grid, control_candidates(sub.control_lower[0],
                                                            sub.control_upper[0], [nodes])))
    return Discretization(units)


class MultistockGenerator(BaseGenerator):
    """Generator for the synthetic multi-stock problem."""

    name = "multistock"
    params_class = MultistockParams
    slack_unit = "thermal"

    def make(self, params) -> ProblemSpec:
        return make_multistock(params)

    def discretization(self, spec: ProblemSpec, params) -> Discretization:
        return multistock_discretization(spec, params)


GENERATOR = MultistockGenerator
