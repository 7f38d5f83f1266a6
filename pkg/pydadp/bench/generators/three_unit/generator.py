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
"""Two hydro plants and one thermal plant meeting a random demand.

The hydro units store water, x' = x − u + a, pay a small quadratic cost ε u² and a final
cost K(x) = w (x − x̄)²; the stockless thermal unit pays L(u) = a₂ u² + a₁ u. Every stage
u¹ + u² + u³ = d_t, folded as g³ = u³ − d_t on the thermal unit, which is also the slack
unit of feasibility recovery.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from pydadp.bench.generators.base.generator import BaseGenerator
from pydadp.dp.grid import Discretization, Grid, SubsystemGrid, control_candidates
from pydadp.model.catalog import (AffineCoupling, AffineDynamics, QuadraticCost,
                                  quadratic_final_cost)
from pydadp.model.problem import Marginal, NoiseModel, ProblemSpec, SubsystemSpec, stage_bounds


@dataclass(frozen=True)
class ThreeUnitParams:
    """Parameters of the three-unit problem."""

    horizon: int = 25
    epsilon: float = 0.01
    thermal_quadratic: float = 1.0
    thermal_linear: float = 0.0
    stock_lower: float = 0.0
    stock_upper: float = 10.0
    initial_stock: float = 5.0
    hydro_max: float = 3.0
    thermal_max: float = 12.0
    final_weight: float = 0.1
    final_target: float = 5.0
    demand_values: Tuple[float, ...] = (2.0, 4.0, 6.0)
    inflow_values: Tuple[float, ...] = (0.0, 1.0, 2.0)
    state_nodes: int = 21
    control_nodes: int = 13
    thermal_nodes: int = 49

    def __post_init__(self):
        object.__setattr__(self, "demand_values", tuple(float(v) for v in self.demand_values))
        object.__setattr__(self, "inflow_values", tuple(float(v) for v in self.inflow_values))

    def check(self):
        """Raises ValueError on parameters outside their ranges."""
        if self.epsilon <= 0:
            raise ValueError("strong convexity requires ε>0")
        if self.horizon < 1:
            raise ValueError("The horizon needs at least one stage")
        if self.thermal_max < 0 or self.hydro_max < 0:
            raise ValueError("Production bounds must be nonnegative")
        if not self.stock_lower <= self.initial_stock <= self.stock_upper:
            raise ValueError("The initial stock must lie within the stock bounds")
        if self.thermal_quadratic < 0:
            raise ValueError("The thermal cost must be convex")
        if not self.demand_values or not self.inflow_values:
            raise ValueError("Demand and inflows need at least one value")


def _hydro(params: ThreeUnitParams, index: int) -> SubsystemSpec:
    horizon = params.horizon
    inflow = np.zeros((1, 3))
    inflow[0, 1 + index] = 1.0
    return SubsystemSpec(
        name=f"hydro_{index + 1}",
        x0=np.array([params.initial_stock]),
        dynamics=AffineDynamics(np.array([[1.0]]), np.array([[-1.0]]), inflow, np.zeros(1)),
        stage_cost=QuadraticCost(np.array([[0.0, 0.0], [0.0, 2.0 * params.epsilon]]),
                                 np.zeros(2)),
        final_cost=quadratic_final_cost(params.final_weight, np.array([params.final_target])),
        coupling=AffineCoupling(np.zeros((1, 1)), np.array([[1.0]]), np.zeros((1, 3)),
                                np.zeros(1)),
        state_lower=stage_bounds(params.stock_lower, horizon + 1, 1, -np.inf),
        state_upper=stage_bounds(params.stock_upper, horizon + 1, 1, np.inf),
        control_lower=stage_bounds(0.0, horizon, 1, -np.inf),
        control_upper=stage_bounds(params.hydro_max, horizon, 1, np.inf),
    )


def _thermal(params: ThreeUnitParams) -> SubsystemSpec:
    horizon = params.horizon
    coupling = AffineCoupling(np.zeros((1, 0)), np.array([[1.0]]), np.zeros((1, 3)),
                              np.zeros(1)).fold_demand(0)
    return SubsystemSpec(
        name="thermal",
        x0=np.zeros(0),
        dynamics=AffineDynamics(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((0, 3)),
                                np.zeros(0)),
        stage_cost=QuadraticCost(np.array([[2.0 * params.thermal_quadratic]]),
                                 np.array([params.thermal_linear])),
        final_cost=QuadraticCost(np.zeros((0, 0)), np.zeros(0)),
        coupling=coupling,
        state_lower=np.zeros((horizon + 1, 0)),
        state_upper=np.zeros((horizon + 1, 0)),
        control_lower=stage_bounds(0.0, horizon, 1, -np.inf),
        control_upper=stage_bounds(params.thermal_max, horizon, 1, np.inf),
    )


def make_three_unit(params: Optional[ThreeUnitParams] = None) -> ProblemSpec:
    """Builds the three-unit problem; demand and inflows are uniform and independent."""
    params = params or ThreeUnitParams()
    params.check()
    stage = [Marginal.uniform(params.demand_values), Marginal.uniform(params.inflow_values),
             Marginal.uniform(params.inflow_values)]
    noise = NoiseModel.from_marginals([stage] * params.horizon,
                                      ("demand", "inflow_1", "inflow_2"), (None, 0, 1))
    return ProblemSpec((_hydro(params, 0), _hydro(params, 1), _thermal(params)), noise, 1,
                       "three_unit")


def three_unit_discretization(params: Optional[ThreeUnitParams] = None) -> Discretization:
    """Uniform stock grids, hydro control grids and a finer thermal control grid."""
    params = params or ThreeUnitParams()
    hydro = SubsystemGrid(Grid.uniform([params.stock_lower], [params.stock_upper],
                                       [params.state_nodes]),
                          control_candidates([0.0], [params.hydro_max], [params.control_nodes]))
    thermal = SubsystemGrid(Grid.empty(),
                            control_candidates([0.0], [params.thermal_max],
                                               [params.thermal_nodes]))
    return Discretization((hydro, hydro, thermal))


def control_convexity(params: ThreeUnitParams) -> float:
    """Modulus of strong convexity of the stage costs in the controls: min(2ε, 2a₂)."""
    return min(2.0 * params.epsilon, 2.0 * params.thermal_quadratic)


def coupling_lipschitz(size: int = 3) -> float:
    """Norm of u ↦ Σ_i u^i on the controls of ``size`` units."""
    return float(np.sqrt(size))


class ThreeUnitGenerator(BaseGenerator):
    """Generator for the three-unit hydro-thermal problem."""

    name = "three_unit"
    params_class = ThreeUnitParams
    slack_unit = "thermal"

    def make(self, params) -> ProblemSpec:
        return make_three_unit(params)

    def discretization(self, spec: ProblemSpec, params) -> Discretization:
        return three_unit_discretization(params)


GENERATOR = ThreeUnitGenerator
