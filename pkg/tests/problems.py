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
"""Small hand-made problems shared by the test packages."""
import os

import numpy as np

from pydadp.dp.grid import Discretization, Grid, SubsystemGrid, control_candidates
from pydadp.model.catalog import AffineCoupling, AffineDynamics, QuadraticCost
from pydadp.model.problem import Marginal, NoiseModel, ProblemSpec, SubsystemSpec
from pydadp.model.schema import load_problem

DATA_DIR = os.path.join(os.path.dirname(__file__), "data", "problems")


def data_file(name: str) -> str:
    """Path of a problem file under tests/data/problems."""
    return os.path.join(DATA_DIR, name)


def load_hydro_thermal():
    """The grid-aligned hydro/thermal problem with its grids and slack unit."""
    problem_file = load_problem(data_file("hydro_thermal.yaml"))
    spec = problem_file.spec
    return (spec, Discretization.from_dict(spec, problem_file.discretization),
            spec.unit_index(problem_file.slack_unit))


def stateless_unit(name: str, horizon: int, noise_dim: int, upper: float,
                   demand: bool = False, quadratic: float = 1.0) -> SubsystemSpec:
    """A unit without stock paying quadratic/2 · u², coupled through +u (minus the demand)."""
    coupling = AffineCoupling(np.zeros((1, 0)), np.array([[1.0]]), np.zeros((1, noise_dim)),
                              np.zeros(1))
    if demand:
        coupling = coupling.fold_demand(0)
    return SubsystemSpec(
        name=name,
        x0=np.zeros(0),
        dynamics=AffineDynamics(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((0, noise_dim)),
                                np.zeros(0)),
        stage_cost=QuadraticCost(np.array([[quadratic]]), np.zeros(1)),
        final_cost=QuadraticCost(np.zeros((0, 0)), np.zeros(0)),
        coupling=coupling,
        state_lower=np.zeros((horizon + 1, 0)),
        state_upper=np.zeros((horizon + 1, 0)),
        control_lower=np.zeros((horizon, 1)),
        control_upper=np.full((horizon, 1), upper),
    )


def stateless_pair(demand_values=(2.0, 4.0), horizon: int = 3, upper: float = 4.0):
    """Two units with cost u²/2 sharing the demand, u⁰ + u¹ = d_t.

    The optimum splits the demand evenly, costs E[d²]/4 per stage and carries the price
    −d_t/2.
    """
    noise = NoiseModel.from_marginals([[Marginal.uniform(demand_values)]] * horizon,
                                      ("demand",), (None,))
    units = (stateless_unit("unit_0", horizon, 1, upper, demand=True),
             stateless_unit("unit_1", horizon, 1, upper))
    return ProblemSpec(units, noise, 1, "stateless_pair")


def stateless_grids(spec: ProblemSpec, nodes: int = 9, upper: float = 4.0) -> Discretization:
    """The same control grid on [0, upper] for every stateless unit."""
    grid = SubsystemGrid(Grid.empty(), control_candidates([0.0], [upper], [nodes]))
    return Discretization(tuple(grid for _ in spec.subsystems))


def deterministic_stock(horizon: int = 1, lower=0.0, upper=1.0) -> ProblemSpec:
    """x' = x − u from x_0 = 1, stage cost u², final cost x², no coupling."""
    noise = NoiseModel((np.zeros((1, 1)),) * horizon, (np.ones(1),) * horizon, ("none",),
                       (None,))
    unit = SubsystemSpec(
        name="stock",
        x0=np.array([1.0]),
        dynamics=AffineDynamics(np.array([[1.0]]), np.array([[-1.0]]), np.zeros((1, 1)),
                                np.zeros(1)),
        stage_cost=QuadraticCost(np.array([[0.0, 0.0], [0.0, 2.0]]), np.zeros(2)),
        final_cost=QuadraticCost(np.array([[2.0]]), np.zeros(1)),
        coupling=AffineCoupling(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)),
                                np.zeros(1)),
        state_lower=np.broadcast_to(np.asarray(lower, dtype=float).reshape(-1, 1),
                                    (horizon + 1, 1)).copy(),
        state_upper=np.broadcast_to(np.asarray(upper, dtype=float).reshape(-1, 1),
                                    (horizon + 1, 1)).copy(),
        control_lower=np.zeros((horizon, 1)),
        control_upper=np.ones((horizon, 1)),
    )
    return ProblemSpec((unit,), noise, 1, "deterministic_stock")


def stock_grid(nodes: int = 5) -> Discretization:
    """Stock and control grids on [0, 1]."""
    return Discretization((SubsystemGrid(Grid.uniform([0.0], [1.0], [nodes]),
                                         control_candidates([0.0], [1.0], [nodes])),))


class FixedPolicy:
    """Open-loop controls for a group of units, the same along every scenario."""

    memory_dim = 0

    def __init__(self, units, controls):
        self.units = tuple(units)
        self.controls = np.asarray(controls, dtype=float)

    def control(self, t, x, w, memory):
        """Repeats the stage-t controls for every row of the batch."""
        row = self.controls if self.controls.ndim == 1 else self.controls[t]
        return np.tile(row, (x.shape[0], 1))
