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
"""Backward dynamic programming on tensor grids, hazard-decision form.

V_T = K on the nodes, and for t = T-1 .. 0

    V_t(x[, y_{t-1}]) = Σ_w p_t(w) min_u { stage objective + V_{t+1}(f_t(x, u, w)[, y_t]) }

with the minimum taken over the finite control grid. The value table never indexes w_t;
only the policy does.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from pydadp.dadp.information import InformationSpec, constant_information
from pydadp.dp.grid import Discretization, Grid, SubsystemGrid
from pydadp.dp.priced import PricedTerm
from pydadp.dp.stages import DEFAULT_COUPLING_TOLERANCE, JointStage, PricedStage
from pydadp.dp.value import ValueFunction
from pydadp.exceptions import GridCapExceeded, ProblemInfeasible
from pydadp.model.problem import NoiseModel, ProblemSpec, SubsystemSpec

logger = logging.getLogger(__name__)  # pylint: disable=C0103

DEFAULT_NODE_CAP = 10 ** 6
ROW_BUDGET = 2 ** 18


def _chunk_rows(candidates: int) -> int:
    return max(1, ROW_BUDGET // max(candidates, 1))


class Policy:
    """Hazard-decision feedback realized by re-solving the stage minimization at query time.

    Ties between candidates go to the lowest candidate index.
    """

    def __init__(self, stage, value_function: ValueFunction):
        self.stage = stage
        self.value_function = value_function

    @property
    def units(self) -> Tuple[int, ...]:
        """Subsystems whose controls the policy returns, in column order."""
        return self.stage.units

    @property
    def memory_dim(self) -> int:
        """Dimension of the memory y_{t-1} the policy expects."""
        return self.stage.memory_dim

    def _solve(self, t: int, x: np.ndarray, w: np.ndarray, memory: Optional[np.ndarray]):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if x.ndim == 2:
            batch = x.shape[0]
        elif self.stage.state_dim:
            batch = x.size // self.stage.state_dim
        else:
            batch = w.shape[0] if w.ndim == 2 else 1
        x = x.reshape(batch, self.stage.state_dim)
        w = w.reshape(batch, -1)
        if memory is None:
            memory = np.zeros((x.shape[0], self.memory_dim))
        memory = np.asarray(memory, dtype=float).reshape(x.shape[0], self.memory_dim)
        step = _chunk_rows(self.stage.size)
        values = np.empty(x.shape[0])
        controls = None
        for start in range(0, x.shape[0], step):
            rows = slice(start, start + step)
            objective, candidates = self.stage.objective(
                t, x[rows], memory[rows], w[rows],
                lambda points: self.value_function.lookup(t + 1, points))
            best = np.argmin(objective, axis=1)
            picked = np.take_along_axis(candidates, best[:, None, None], axis=1)[:, 0]
            if controls is None:
                controls = np.empty((x.shape[0], picked.shape[1]))
            controls[rows] = picked
            values[rows] = objective[np.arange(objective.shape[0]), best]
        return controls, values

    def control(self, t: int, x: np.ndarray, w: np.ndarray,
                memory: Optional[np.ndarray] = None) -> np.ndarray:
        """Argmin controls (B, m) at a batch of states (B, n) and noises (B, q)."""
        return self._solve(t, x, w, memory)[0]

    def stage_minimum(self, t: int, x: np.ndarray, w: np.ndarray,
                      memory: Optional[np.ndarray] = None) -> np.ndarray:
        """Minimal stage objectives (B,), ``+inf`` where no candidate is admissible."""
        return self._solve(t, x, w, memory)[1]


def backward_recursion(stage, noise: NoiseModel, grid: Grid, axis_names: Sequence[str],
                       node_cap: int = DEFAULT_NODE_CAP,
                       initial_point: Optional[np.ndarray] = None) -> ValueFunction:
    """Fills V_T .. V_0 on the grid nodes; leading ``stage.state_dim`` axes are states."""
    if grid.size > node_cap:
        raise GridCapExceeded(f"The grid has {grid.size} nodes, more than the cap of "
                              f"{node_cap}; decompose the problem or coarsen the grid")
    horizon = noise.horizon
    value_function = ValueFunction(grid, stage.state_dim, [None] * (horizon + 1),
                                   tuple(axis_names))
    nodes = grid.nodes()
    states, memory = nodes[:, :stage.state_dim], nodes[:, stage.state_dim:]
    value_function.set_table(horizon, stage.terminal(states))
    step = _chunk_rows(stage.size)
    for t in reversed(range(horizon)):
        expectation = np.zeros(nodes.shape[0])
        for point, probability in zip(noise.supports[t], noise.probabilities[t]):
            if probability <= 0.0:
                continue
            best = np.empty(nodes.shape[0])
            for start in range(0, nodes.shape[0], step):
                rows = slice(start, start + step)
                count = states[rows].shape[0]
                objective, _ = stage.objective(
                    t, states[rows], memory[rows], np.broadcast_to(point, (count, point.shape[0])),
                    lambda points, t=t: value_function.lookup(t + 1, points))
                best[rows] = objective.min(axis=1)
            expectation = expectation + probability * best
        value_function.set_table(t, expectation)
        logger.debug("stage %d: %d of %d nodes feasible", t,
                     int(np.isfinite(expectation).sum()), expectation.shape[0])
    if initial_point is not None:
        start_value = value_function.lookup(0, np.asarray(initial_point, dtype=float)
                                            .reshape(1, -1))[0]
        if not np.isfinite(start_value):
            raise ProblemInfeasible(f"Problem infeasible on grid: no admissible control "
                                    f"sequence from {np.asarray(initial_point).tolist()}")
    return value_function


def state_axis_names(subs: Sequence[SubsystemSpec]) -> Tuple[str, ...]:
    """Axis labels ``<subsystem>_x<k>`` for the state coordinates."""
    return tuple(f"{sub.name}_x{k}" for sub in subs for k in range(sub.state_dim))


def solve_global_dp(spec: ProblemSpec, discretization: Discretization,
                    slack_unit: Optional[int] = None, node_cap: int = DEFAULT_NODE_CAP,
                    coupling_tolerance: float = DEFAULT_COUPLING_TOLERANCE
                    ) -> Tuple[ValueFunction, Policy]:
    """Solves the undecomposed problem on the product of the subsystem grids.

    Args:
        spec: the problem.
        discretization: state grid and control candidates per subsystem.
        slack_unit: a unit whose control is solved from the coupling constraint.
        node_cap: largest admissible number of grid nodes (and joint candidates).
        coupling_tolerance: admissible |Σ g| without a slack unit.

    Returns:
        (ValueFunction, Policy): value tables on the joint grid and the joint feedback.
    """
    grid = Grid(tuple(axis for unit in discretization for axis in unit.state_grid.axes))
    if grid.size > node_cap:
        raise GridCapExceeded(f"The joint grid has {grid.size} nodes, more than the cap of "
                              f"{node_cap}; decompose the problem or coarsen the grids")
    stage = JointStage(spec, [unit.controls for unit in discretization], slack_unit, node_cap,
                       coupling_tolerance)
    logger.debug("global DP on %d nodes with %d joint candidates", grid.size, stage.size)
    initial_point = np.concatenate([sub.x0 for sub in spec.subsystems])
    value_function = backward_recursion(stage, spec.noise, grid,
                                        state_axis_names(spec.subsystems), node_cap,
                                        initial_point)
    return value_function, Policy(stage, value_function)


def solve_priced_subproblem(sub: SubsystemSpec, noise: NoiseModel,
                            price: Optional[PricedTerm], grid: SubsystemGrid,
                            info: Optional[InformationSpec] = None, unit: int = 0,
                            node_cap: int = DEFAULT_NODE_CAP) -> Tuple[ValueFunction, Policy]:
    """Solves one subsystem priced by λ̂_t(y_t).

    Memoryless information leaves the table indexed by the state; Markovian information
    adds the memory axes so the table is indexed by (x, y_{t-1}).
    """
    if info is None:
        info = constant_information(noise.horizon, noise.dimension)
    if price is not None and price.dimension != sub.coupling_dim:
        raise ValueError(f"The price has dimension {price.dimension}, the coupling of "
                         f"{sub.name} {sub.coupling_dim}")
    full_grid = grid.state_grid
    names = list(state_axis_names([sub]))
    initial_point = sub.x0
    if info.mode == "markovian":
        full_grid = full_grid.product(info.memory_grid)
        names.extend(info.names)
        initial_point = np.concatenate([sub.x0, info.initial])
    stage = PricedStage(sub, unit, grid.controls, price, info)
    value_function = backward_recursion(stage, noise, full_grid, names, node_cap,
                                        initial_point)
    return value_function, Policy(stage, value_function)
