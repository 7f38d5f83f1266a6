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
"""Uncoupled reservoirs, optionally driven by one shared inflow.

Unit i stores water, x' = x − u + a, and pays ½(x − x̄)² + c_i u² per stage and (x − x̄)²
at the end, with c_i = ``cost_step``·(i + 1). The coupling map is identically zero, so the
joint Bellman function is the sum of the unit Bellman functions and the feedback of a
unit only reads its own stock and the noise.
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
class IndependentParams:
    """Parameters of the uncoupled suite."""

    units: int = 2
    shared_noise: bool = False
    horizon: int = 4
    inflow_values: Tuple[float, ...] = (0.0, 0.5, 1.0)
    stock_lower: float = 0.0
    stock_upper: float = 4.0
    initial_stock: float = 2.0
    target: float = 2.0
    release_max: float = 2.0
    cost_step: float = 0.1
    state_nodes: int = 9
    control_nodes: int = 5

    def __post_init__(self):
        object.__setattr__(self, "inflow_values", tuple(float(v) for v in self.inflow_values))

    def check(self):
        """Raises ValueError on invalid sizes."""
        if self.units < 2:
            raise ValueError(f"The suite needs at least two units, got {self.units}")
        if self.horizon < 1:
            raise ValueError("The horizon needs at least one stage")
        if not self.inflow_values:
            raise ValueError("Inflows need at least one value")


def _noise(params: IndependentParams) -> NoiseModel:
    inflow = Marginal.uniform(params.inflow_values)
    if params.shared_noise:
        return NoiseModel.from_marginals([[inflow]] * params.horizon, ("inflow",), (None,))
    names = tuple(f"inflow_{i + 1}" for i in range(params.units))
    return NoiseModel.from_marginals([[inflow] * params.units] * params.horizon, names,
                                     tuple(range(params.units)))


def make_independent_suite(units: int = 2, shared_noise: bool = False,
                           params: Optional[IndependentParams] = None) -> ProblemSpec:
    """Builds ``units`` uncoupled reservoirs; ``params`` overrides the other defaults."""
    params = params or IndependentParams()
    params = IndependentParams(**{**params.__dict__, "units": units,
                                  "shared_noise": shared_noise})
    params.check()
    noise = _noise(params)
    horizon, q = params.horizon, noise.dimension
    subsystems = []
    for i in range(units):
        selector = np.zeros((1, q))
        selector[0, 0 if shared_noise else i] = 1.0
        weight = params.cost_step * (i + 1)
        subsystems.append(SubsystemSpec(
            name=f"unit_{i + 1}",
            x0=np.array([params.initial_stock]),
            dynamics=AffineDynamics(np.array([[1.0]]), np.array([[-1.0]]), selector,
                                    np.zeros(1)),
            stage_cost=QuadraticCost(np.array([[1.0, 0.0], [0.0, 2.0 * weight]]),
                                     np.array([-params.target, 0.0]),
                                     np.asarray(0.5 * params.target ** 2)),
            final_cost=quadratic_final_cost(1.0, np.array([params.target])),
            coupling=AffineCoupling(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, q)),
                                    np.zeros(1)),
            state_lower=stage_bounds(params.stock_lower, horizon + 1, 1, -np.inf),
            state_upper=stage_bounds(params.stock_upper, horizon + 1, 1, np.inf),
            control_lower=stage_bounds(0.0, horizon, 1, -np.inf),
            control_upper=stage_bounds(params.release_max, horizon, 1, np.inf),
        ))
    return ProblemSpec(tuple(subsystems), noise, 1, "independent")


def independent_discretization(spec: ProblemSpec, params: Optional[IndependentParams] = None
                               ) -> Discretization:
    """The same stock and release grids for every unit."""
    params = params or IndependentParams()
    unit = SubsystemGrid(Grid.uniform([params.stock_lower], [params.stock_upper],
                                      [params.state_nodes]),
                         control_candidates([0.0], [params.release_max],
                                            [params.control_nodes]))
    return Discretization(tuple(unit for _ in spec.subsystems))


class IndependentGenerator(BaseGenerator):
    """Generator for the uncoupled suite."""

    name = "independent"
    params_class = IndependentParams

    def make(self, params) -> ProblemSpec:
        return make_independent_suite(params.units, params.shared_noise, params)

    def discretization(self, spec: ProblemSpec, params) -> Discretization:
        return independent_discretization(spec, params)


GENERATOR = IndependentGenerator
