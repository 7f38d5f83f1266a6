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
"""Stage minimization problems solved node by node by the backward recursion.

A stage evaluates every control candidate at a batch of (state, memory, noise) rows and
returns the objective C + coupling price term + continuation value, with ``+inf`` for
candidates that break a control bound, a next-stage state bound or the coupling.
"""
import itertools
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from pydadp.dadp.information import InformationSpec
from pydadp.dp.priced import PricedTerm
from pydadp.exceptions import GridCapExceeded
from pydadp.model.catalog import apply_matrix
from pydadp.model.problem import ProblemSpec, SubsystemSpec, coupling_inverse, within

logger = logging.getLogger(__name__)  # pylint: disable=C0103

STATE_TOLERANCE = 1e-9
DEFAULT_COUPLING_TOLERANCE = 1e-9

Continuation = Callable[[np.ndarray], np.ndarray]


def _offsets(dims: Sequence[int]) -> Tuple[int, ...]:
    return tuple(np.concatenate([[0], np.cumsum(dims, dtype=int)]).tolist())


def expand_rows(values: np.ndarray, count: int) -> np.ndarray:
    """Repeats every row ``count`` times, keeping rows of one node contiguous."""
    return np.repeat(values, count, axis=0)


class JointStage:
    """The undecomposed stage problem over all subsystems together.

    Candidates are the cartesian product of the control grids of every unit except the
    optional slack unit, whose control is solved from the coupling constraint and then
    checked against its bounds. Without a slack unit a combination is admissible when
    |Σ g| is within the coupling tolerance.
    """

    def __init__(self, spec: ProblemSpec, controls: Sequence[np.ndarray],
                 slack_unit: Optional[int] = None, node_cap: Optional[int] = None,
                 coupling_tolerance: float = DEFAULT_COUPLING_TOLERANCE):
        self.spec = spec
        self.units = tuple(range(spec.size))
        self.slack_unit = slack_unit
        self.coupling_tolerance = coupling_tolerance
        self.state_dims = [sub.state_dim for sub in spec.subsystems]
        self.control_dims = [sub.control_dim for sub in spec.subsystems]
        self.state_offsets = _offsets(self.state_dims)
        self.control_offsets = _offsets(self.control_dims)
        free = [i for i in self.units if i != slack_unit]
        count = int(np.prod([len(controls[i]) for i in free], dtype=np.int64))
        if node_cap is not None and count > node_cap:
            raise GridCapExceeded(f"{count} joint control candidates exceed the cap of "
                                  f"{node_cap}; decompose the problem or coarsen the grids")
        combined = np.zeros((count, self.control_offsets[-1]))
        for position, combination in enumerate(
                itertools.product(*(range(len(controls[i])) for i in free))):
            for i, k in zip(free, combination):
                combined[position, self.control_offsets[i]:self.control_offsets[i + 1]] = \
                    controls[i][k]
        self.candidates = combined
        self.inverses = None
        if slack_unit is not None:
            self.inverses = [coupling_inverse(spec.subsystems[slack_unit], t)
                             for t in range(spec.horizon)]

    @property
    def size(self) -> int:
        """Number of control candidates K."""
        return self.candidates.shape[0]

    @property
    def state_dim(self) -> int:
        """Total state dimension."""
        return self.state_offsets[-1]

    @property
    def memory_dim(self) -> int:
        """The joint stage carries no memory."""
        return 0

    def unit_state(self, x: np.ndarray, i: int) -> np.ndarray:
        """Columns of unit i in a joint state batch."""
        return x[:, self.state_offsets[i]:self.state_offsets[i + 1]]

    def unit_control(self, u: np.ndarray, i: int) -> np.ndarray:
        """Columns of unit i in a joint control batch."""
        return u[:, self.control_offsets[i]:self.control_offsets[i + 1]]

    def terminal(self, x: np.ndarray) -> np.ndarray:
        """Σ_i K^i(x^i) on a batch of joint states."""
        total = np.zeros(x.shape[0])
        for i, sub in enumerate(self.spec.subsystems):
            total = total + sub.terminal(self.unit_state(x, i))
        return total

    def objective(self, t: int, x: np.ndarray, memory: np.ndarray, w: np.ndarray,
                  continuation: Continuation) -> Tuple[np.ndarray, np.ndarray]:
        """Objective (B, K) and controls (B, K, Σm) of every candidate at every row."""
        rows = x.shape[0]
        count = self.size
        xs = expand_rows(x, count)
        ws = expand_rows(w, count)
        u = np.tile(self.candidates, (rows, 1))
        feasible = np.ones(rows * count, dtype=bool)
        subsystems = self.spec.subsystems
        if self.slack_unit is not None:
            slack = self.slack_unit
            sub = subsystems[slack]
            rest = sub.coupling(t, self.unit_state(xs, slack),
                                np.zeros((xs.shape[0], sub.control_dim)), ws)
            for i in self.units:
                if i != slack:
                    rest = rest + subsystems[i].coupling(t, self.unit_state(xs, i),
                                                         self.unit_control(u, i), ws)
            required = -apply_matrix(self.inverses[t], rest)
            feasible &= sub.controls_within(t, required, self.coupling_tolerance)
            u[:, self.control_offsets[slack]:self.control_offsets[slack + 1]] = np.clip(
                required, sub.control_lower[t], sub.control_upper[t])
        else:
            total = np.zeros((xs.shape[0], self.spec.coupling_dim))
            for i in self.units:
                total = total + subsystems[i].coupling(t, self.unit_state(xs, i),
                                                       self.unit_control(u, i), ws)
            feasible &= np.all(np.abs(total) <= self.coupling_tolerance, axis=1)
        cost = np.zeros(xs.shape[0])
        next_states = []
        for i, sub in enumerate(subsystems):
            xi, ui = self.unit_state(xs, i), self.unit_control(u, i)
            if i != self.slack_unit:
                feasible &= sub.controls_within(t, ui)
            cost = cost + sub.stage_cost(t, xi, ui, ws)
            following = sub.dynamics(t, xi, ui, ws)
            feasible &= sub.states_within(t + 1, following, STATE_TOLERANCE)
            next_states.append(following)
        objective = np.full(xs.shape[0], np.inf)
        if feasible.any():
            following = np.concatenate(next_states, axis=1)
            objective[feasible] = cost[feasible] + continuation(following[feasible])
        return objective.reshape(rows, count), u.reshape(rows, count, -1)


class PricedStage:
    """The stage of one subsystem priced by λ̂_t(y_t), possibly carrying y_{t-1} in memory.

    The objective is C_t(x, u, w) + λ̂_t(y_t)ᵀ g_t(x, u, w) + V_{t+1}(f_t(x, u, w)[, y_t]).
    """

    def __init__(self, sub: SubsystemSpec, unit: int, controls: np.ndarray,
                 price: Optional[PricedTerm], info: InformationSpec):
        self.sub = sub
        self.units = (unit,)
        self.candidates = np.asarray(controls, dtype=float)
        self.price = price
        self.info = info

    @property
    def size(self) -> int:
        """Number of control candidates K."""
        return self.candidates.shape[0]

    @property
    def state_dim(self) -> int:
        """State dimension of the subsystem."""
        return self.sub.state_dim

    @property
    def memory_dim(self) -> int:
        """Dimension of the information kept in memory."""
        return self.info.memory_dim

    def terminal(self, x: np.ndarray) -> np.ndarray:
        """K(x) on a batch of states."""
        return self.sub.terminal(x)

    def prices(self, t: int, memory: np.ndarray, w: np.ndarray) -> np.ndarray:
        """λ̂_t(y_t) (B, d) at a batch of rows."""
        if self.price is None:
            return np.zeros((w.shape[0], self.sub.coupling_dim))
        return self.price.evaluate(t, self.info.info(t, memory, w))

    def objective(self, t: int, x: np.ndarray, memory: np.ndarray, w: np.ndarray,
                  continuation: Continuation) -> Tuple[np.ndarray, np.ndarray]:
        """Objective (B, K) and controls (B, K, m) of every candidate at every row."""
        rows = x.shape[0]
        count = self.size
        sub = self.sub
        prices = expand_rows(self.prices(t, memory, w), count)
        following_memory = expand_rows(self.info.next_memory(t, memory, w), count)
        xs = expand_rows(x, count)
        ws = expand_rows(w, count)
        u = np.tile(self.candidates, (rows, 1))
        cost = sub.stage_cost(t, xs, u, ws)
        coupling = sub.coupling(t, xs, u, ws)
        for j in range(coupling.shape[1]):
            cost = cost + prices[:, j] * coupling[:, j]
        following = sub.dynamics(t, xs, u, ws)
        feasible = sub.controls_within(t, u) & sub.states_within(t + 1, following,
                                                                 STATE_TOLERANCE)
        objective = np.full(xs.shape[0], np.inf)
        if feasible.any():
            points = np.concatenate([following, following_memory], axis=1)
            objective[feasible] = cost[feasible] + continuation(points[feasible])
        return objective.reshape(rows, count), u.reshape(rows, count, -1)
