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
"""Unbounded reservoirs sharing a demand, with a closed-form optimal price.

Reservoir j pays c_j u²/2 per stage and γ_j/2 (x_T − x_1)² at the end, with dynamics
x_{t+1} = x_t + a_{t+1} − u_t for t = 1..T−1 and Σ_j u_t^j = d_t. When γ_j = α c_j for a
single α > 0 the optimal multiplier follows an affine recursion in (d, a).

Stage k = 0..T−2 of the generated problem is the original stage t = k + 1. Its noise is
w_k = (d_{k+1}, a_{k+1}^1, ..., a_{k+1}^n) with a_1 ≡ 0, and its state is
z_k = x_{k+1} − a_{k+1}, so that z' = z + a − u keeps the hazard-decision order. The last
inflow a_T enters the final cost through its mean and variance.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from pydadp.bench.generators.base.generator import BaseGenerator
from pydadp.model.catalog import (AffineCoupling, AffineDynamics, QuadraticCost,
                                  quadratic_final_cost)
from pydadp.model.problem import Marginal, NoiseModel, ProblemSpec, SubsystemSpec


@dataclass(frozen=True)
class StrugarekParams:
    """Parameters of the reservoir problem; ``horizon`` is the original T."""

    costs: Tuple[float, ...] = (1.0, 2.0)
    alpha: float = 0.5
    weights: Optional[Tuple[float, ...]] = None
    horizon: int = 3
    demand_values: Tuple[float, ...] = (1.0, 3.0)
    inflow_values: Tuple[float, ...] = (0.0, 1.0)
    initial_stocks: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
        object.__setattr__(self, "demand_values", tuple(float(v) for v in self.demand_values))
        object.__setattr__(self, "inflow_values", tuple(float(v) for v in self.inflow_values))
        if self.weights is None:
            object.__setattr__(self, "weights", tuple(self.alpha * c for c in self.costs))
        else:
            object.__setattr__(self, "weights", tuple(float(g) for g in self.weights))
        if self.initial_stocks is None:
            object.__setattr__(self, "initial_stocks", tuple(0.0 for _ in self.costs))

    @property
    def size(self) -> int:
        """Number of reservoirs n."""
        return len(self.costs)

    @property
    def gain(self) -> float:
        """1 / Σ_j 1/c_j"""
        return 1.0 / sum(1.0 / c for c in self.costs)

    def check(self):
        """Raises ValueError unless the closed-form price hypotheses hold."""
        if self.size < 1:
            raise ValueError("At least one reservoir is needed")
        if any(c <= 0 for c in self.costs):
            raise ValueError("All costs c_j must be positive")
        if self.alpha <= 0:
            raise ValueError("α must be positive")
        if self.horizon < 2:
            raise ValueError("The horizon T must be at least 2")
        if len(self.weights) != self.size or any(
                gamma != self.alpha * c for gamma, c in zip(self.weights, self.costs)):
            raise ValueError(f"The weights γ={list(self.weights)} are not α·c with α={self.alpha}")
        if len(self.initial_stocks) != self.size:
            raise ValueError("One initial stock per reservoir is needed")
        if not self.demand_values or not self.inflow_values:
            raise ValueError("Demand and inflows need at least one value")


def strugarek_noise(params: StrugarekParams) -> NoiseModel:
    """Demand and inflows of stages 0..T−2; the inflows of stage 0 are zero."""
    demand = Marginal.uniform(params.demand_values)
    inflow = Marginal.uniform(params.inflow_values)
    names = ("demand",) + tuple(f"inflow_{j + 1}" for j in range(params.size))
    partition = (None,) + tuple(range(params.size))
    stages = [[demand] + [Marginal.point(0.0)] * params.size]
    stages += [[demand] + [inflow] * params.size] * (params.horizon - 2)
    return NoiseModel.from_marginals(stages, names, partition)


def make_strugarek(params: Optional[StrugarekParams] = None) -> ProblemSpec:
    """Builds the unbounded reservoir problem."""
    params = params or StrugarekParams()
    params.check()
    noise = strugarek_noise(params)
    size, horizon = params.size, params.horizon - 1
    inflow = Marginal.uniform(params.inflow_values)
    subsystems = []
    for j, (cost, gamma, stock) in enumerate(zip(params.costs, params.weights,
                                                  params.initial_stocks)):
        selector = np.zeros((1, size + 1))
        selector[0, 1 + j] = 1.0
        coupling = AffineCoupling(np.zeros((1, 1)), np.array([[1.0]]), np.zeros((1, size + 1)),
                                  np.zeros(1))
        if j == 0:
            coupling = coupling.fold_demand(0)
        subsystems.append(SubsystemSpec(
            name=f"reservoir_{j + 1}",
            x0=np.array([stock]),
            dynamics=AffineDynamics(np.array([[1.0]]), np.array([[-1.0]]), selector,
                                    np.zeros(1)),
            stage_cost=QuadraticCost(np.array([[0.0, 0.0], [0.0, cost]]), np.zeros(2)),
            final_cost=quadratic_final_cost(gamma / 2.0, np.array([stock - inflow.mean()]),
                                            gamma / 2.0 * inflow.variance()),
            coupling=coupling,
            state_lower=np.full((horizon + 1, 1), -np.inf),
            state_upper=np.full((horizon + 1, 1), np.inf),
            control_lower=np.full((horizon, 1), -np.inf),
            control_upper=np.full((horizon, 1), np.inf),
            metadata={"cost": cost, "weight": gamma},
        ))
    return ProblemSpec(tuple(subsystems), noise, 1, "strugarek")


class StrugarekGenerator(BaseGenerator):
    """Generator for the reservoir problem with a closed-form price."""

    name = "strugarek"
    params_class = StrugarekParams

    def make(self, params) -> ProblemSpec:
        return make_strugarek(params)


GENERATOR = StrugarekGenerator
