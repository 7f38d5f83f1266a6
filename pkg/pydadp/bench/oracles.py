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
"""Exact references for small instances.

``strugarek_price_oracle`` evaluates the closed-form optimal multiplier of the reservoir
problem along a scenario. ``tree_exact_solve`` enumerates the scenario tree and the control
grid on every node, which gives the optimum over grid-restricted non-anticipative
policies. ``tree_kkt_solve`` solves the equality-constrained quadratic program written on
the tree and returns the coupling multipliers of every node.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from pydadp.bench.generators.strugarek.generator import StrugarekParams, strugarek_noise
from pydadp.dadp.information import InformationSpec, markovian_information
from pydadp.dp.grid import Discretization, Grid
from pydadp.dp.stages import DEFAULT_COUPLING_TOLERANCE, JointStage
from pydadp.exceptions import ProblemInfeasible, TreeCapExceeded
from pydadp.model.problem import ProblemSpec
from pydadp.scenario.sampling import DEFAULT_TREE_CAP, Scenario, ScenarioSet, enumerate_tree

logger = logging.getLogger(__name__)  # pylint: disable=C0103

Path = Tuple[int, ...]


def _stage_means(params: StrugarekParams) -> Tuple[np.ndarray, np.ndarray, float]:
    """E[d] per stage, E[a^σ] per stage and E[a_T^σ] of the final inflow."""
    noise = strugarek_noise(params)
    means = np.array([noise.mean(k) for k in range(noise.horizon)])
    final_inflow = params.size * float(np.mean(params.inflow_values))
    return means[:, 0], means[:, 1:].sum(axis=1), final_inflow


def strugarek_price_oracle(params: StrugarekParams, scenario: Scenario) -> np.ndarray:
    """Optimal multipliers λ_0 .. λ_{T-2} along a scenario of the generated problem.

    With K = 1 / Σ_j 1/c_j the price starts from

        λ_0 = −K (d_0 (1 + α) − α Σ_{s≥1} E[a_s^σ] + α Σ_{s≥1} E[d_s])

    (the first sum includes the final inflow) and follows

        λ_{k+1} = λ_k + K d_k − K (1 + α) d_{k+1} + K α E[d_{k+1}] + K α (a_{k+1}^σ − E[a_{k+1}^σ]).

    Prices use the library sign, the multiplier of Σ_j u^j − d in the Lagrangian.
    """
    params.check()
    noise = np.asarray(scenario.noise, dtype=float)
    stages = params.horizon - 1
    if noise.shape != (stages, params.size + 1):
        raise ValueError(f"The scenario has shape {noise.shape}, expected "
                         f"{(stages, params.size + 1)} (demand then one inflow per reservoir)")
    gain, alpha = params.gain, params.alpha
    demand_means, inflow_means, final_inflow = _stage_means(params)
    demand, inflow = noise[:, 0], noise[:, 1:].sum(axis=1)
    prices = np.empty(stages)
    prices[0] = -gain * (demand[0] * (1.0 + alpha)
                         - alpha * (inflow_means[1:].sum() + final_inflow)
                         + alpha * demand_means[1:].sum())
    for k in range(stages - 1):
        prices[k + 1] = (prices[k] + gain * demand[k] - gain * (1.0 + alpha) * demand[k + 1]
                         + gain * alpha * demand_means[k + 1]
                         + gain * alpha * (inflow[k + 1] - inflow_means[k + 1]))
    return prices


def strugarek_information(params: StrugarekParams, info_nodes: int = 11) -> InformationSpec:
    """Markovian information y_k = (λ_k, d_k) under which the projected price is exact.

    The first component replays the price recursion, the second keeps the demand the
    recursion needs at the next stage. The memory grid spans the values reachable on the
    scenario tree.
    """
    params.check()
    noise = strugarek_noise(params)
    horizon, q = noise.horizon, noise.dimension
    gain, alpha = params.gain, params.alpha
    demand_means, inflow_means, final_inflow = _stage_means(params)
    state_matrix = np.zeros((horizon, 2, 2))
    noise_matrix = np.zeros((horizon, 2, q))
    offset = np.zeros((horizon, 2))
    noise_matrix[:, 0, 0] = -gain * (1.0 + alpha)
    noise_matrix[:, 1, 0] = 1.0
    offset[0, 0] = gain * alpha * (inflow_means[1:].sum() + final_inflow
                                   - demand_means[1:].sum())
    for k in range(1, horizon):
        state_matrix[k] = [[1.0, gain], [0.0, 0.0]]
        noise_matrix[k, 0, 1:] = gain * alpha
        offset[k, 0] = gain * alpha * (demand_means[k] - inflow_means[k])
    draft = markovian_information(state_matrix, noise_matrix, offset,
                                  Grid((np.array([0.0, 1.0]), np.array([0.0, 1.0]))),
                                  np.zeros(2), ("price", "demand"))
    memories = draft.memory_trajectory(enumerate_tree(noise).noise)
    axes = []
    for component in range(2):
        low = float(memories[:, :, component].min())
        high = float(memories[:, :, component].max())
        if high - low <= 0.0:
            low, high = low - 1.0, high + 1.0
        axes.append(np.linspace(low, high, info_nodes))
    return markovian_information(state_matrix, noise_matrix, offset, Grid(tuple(axes)),
                                 np.zeros(2), ("price", "demand"))


def oracle_frame(scenarios: ScenarioSet, params: StrugarekParams) -> pd.DataFrame:
    """Oracle prices of every scenario in long format (scenario, t, price)."""
    records = []
    for s in range(scenarios.count):
        for t, price in enumerate(strugarek_price_oracle(params, scenarios[s])):
            records.append({"scenario": s, "t": t, "price": price})
    return pd.DataFrame.from_records(records, columns=["scenario", "t", "price"])


@dataclass(frozen=True)
class TreeProblem:
    """A problem solved on its exhaustive scenario tree.

    Without a discretization only the quadratic program on the tree is available.
    """

    spec: ProblemSpec
    discretization: Optional[Discretization] = None
    slack_unit: Optional[int] = None
    cap: int = DEFAULT_TREE_CAP
    coupling_tolerance: float = DEFAULT_COUPLING_TOLERANCE


@dataclass
class TreeSolution:
    """Optimal expected cost with controls (and multipliers) keyed by node path.

    The path of a stage-t decision node lists the support indices of w_0 .. w_t.
    """

    value: float
    controls: Dict[Path, np.ndarray]
    multipliers: Optional[Dict[Path, np.ndarray]] = None
    evaluations: int = 0


@dataclass(frozen=True)
class _TreeNode:
    stage: int
    path: Path
    parent: Path
    probability: float
    noise: np.ndarray


def tree_nodes(spec: ProblemSpec, cap: int = DEFAULT_TREE_CAP) -> List[_TreeNode]:
    """Decision nodes of positive probability, stage by stage."""
    noise = spec.noise
    nodes: List[_TreeNode] = []
    prefixes: List[Tuple[Path, float]] = [((), 1.0)]
    for t in range(noise.horizon):
        following = []
        for path, probability in prefixes:
            for i, (point, p) in enumerate(zip(noise.supports[t], noise.probabilities[t])):
                if p <= 0.0:
                    continue
                node = _TreeNode(t, path + (i,), path, probability * p, point)
                nodes.append(node)
                following.append((node.path, node.probability))
        if len(nodes) > cap:
            raise TreeCapExceeded(f"The scenario tree has more than {cap} nodes")
        prefixes = following
    return nodes


class _TreeSearch:
    """Exhaustive minimization over the control grid, memoized on (stage, state)."""

    def __init__(self, tp: TreeProblem):
        spec = tp.spec
        self.spec = spec
        self.cap = tp.cap
        self.stage = JointStage(spec, [unit.controls for unit in tp.discretization],
                                tp.slack_unit, None, tp.coupling_tolerance)
        self.memo: Dict[Tuple[int, bytes], float] = {}
        self.evaluations = 0
        self.infeasible: Optional[Path] = None

    def objective(self, t: int, x: np.ndarray, point: np.ndarray, path: Path,
                  counted: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """Objectives and controls of every candidate at one decision node."""
        if counted:
            self.evaluations += self.stage.size
            if self.evaluations > self.cap:
                raise TreeCapExceeded(f"The tree search exceeded {self.cap} evaluations")
        objective, controls = self.stage.objective(
            t, x[None, :], np.zeros((1, 0)), point[None, :],
            lambda points: np.array([self.value(t + 1, row, path) for row in points]))
        return objective[0], controls[0]

    def value(self, t: int, x: np.ndarray, path: Path) -> float:
        """Optimal expected cost-to-go from state x at stage t."""
        if t == self.spec.horizon:
            return self.stage.terminal(x[None, :])[0]
        key = (t, x.tobytes())
        if key in self.memo:
            return self.memo[key]
        noise = self.spec.noise
        total = 0.0
        for i, (point, probability) in enumerate(zip(noise.supports[t],
                                                     noise.probabilities[t])):
            if probability <= 0.0:
                continue
            objective, _ = self.objective(t, x, point, path + (i,))
            best = objective.min()
            if not np.isfinite(best) and self.infeasible is None:
                self.infeasible = path + (i,)
            total = total + probability * best
        self.memo[key] = total
        return total

    def next_state(self, t: int, x: np.ndarray, u: np.ndarray, point: np.ndarray) -> np.ndarray:
        """Joint state reached from x under the joint control u."""
        stage = self.stage
        return np.concatenate([
            sub.dynamics(t, stage.unit_state(x[None, :], i), stage.unit_control(u[None, :], i),
                         point[None, :])[0]
            for i, sub in enumerate(self.spec.subsystems)])

    def forward(self, t: int, x: np.ndarray, path: Path, controls: Dict[Path, np.ndarray]):
        """Records the argmin control of every decision node below a prefix."""
        noise = self.spec.noise
        for i, (point, probability) in enumerate(zip(noise.supports[t],
                                                     noise.probabilities[t])):
            if probability <= 0.0:
                continue
            node = path + (i,)
            objective, candidates = self.objective(t, x, point, node, counted=False)
            best = int(np.argmin(objective))
            controls[node] = candidates[best]
            if t + 1 < self.spec.horizon:
                self.forward(t + 1, self.next_state(t, x, candidates[best], point), node,
                             controls)


def tree_exact_solve(tp: TreeProblem, multipliers: bool = False) -> TreeSolution:
    """Optimal expected cost and per-node controls on the exhaustive tree.

    With a discretization the controls range over the grid candidates and next states
    are evaluated exactly (no interpolation); without one the quadratic program on the
    tree is solved instead. ``multipliers`` adds the coupling multipliers from the tree
    KKT system.

    Raises:
        ProblemInfeasible: when no grid control sequence is admissible, naming the first
            decision node found without any admissible control.
        TreeCapExceeded: when the search needs more evaluations than ``tp.cap``.
    """
    if tp.discretization is None:
        return tree_kkt_solve(tp)
    search = _TreeSearch(tp)
    x0 = np.concatenate([sub.x0 for sub in tp.spec.subsystems])
    value = search.value(0, x0, ())
    if not np.isfinite(value):
        raise ProblemInfeasible(f"Infeasible node {list(search.infeasible or ())}: no grid "
                                f"control satisfies the constraints")
    controls: Dict[Path, np.ndarray] = {}
    search.forward(0, x0, (), controls)
    logger.debug("tree search: value %.12g after %d evaluations", value, search.evaluations)
    solution = TreeSolution(float(value), controls, None, search.evaluations)
    if multipliers:
        solution.multipliers = tree_kkt_solve(tp).multipliers
    return solution


def _offsets(dims) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(dims, dtype=int)]).astype(int)


def tree_kkt_solve(tp: TreeProblem) -> TreeSolution:
    """Solves the affine-quadratic problem on the tree through its KKT system.

    Every node carries its own controls and the states it leads to; the root state is x0.
    Bounds are not imposed, so the result is the optimum only when no bound is active.
    The coupling multiplier of node v is ν_v / p_v, where ν_v solves

        [[Q, Mᵀ], [M, 0]] [z; ν] = [−q; b]

    and p_v is the path probability of v.
    """
    spec = tp.spec
    nodes = tree_nodes(spec, tp.cap)
    subs = spec.subsystems
    state_offsets = _offsets([sub.state_dim for sub in subs])
    control_offsets = _offsets([sub.control_dim for sub in subs])
    n, m, d = state_offsets[-1], control_offsets[-1], spec.coupling_dim
    state_index: Dict[Path, int] = {(): 0}
    control_index: Dict[Path, int] = {}
    position = n
    for node in nodes:
        control_index[node.path] = position
        state_index[node.path] = position + m
        position += m + n
    size = position
    hessian = np.zeros((size, size))
    linear = np.zeros(size)
    constant = 0.0
    rows: List[np.ndarray] = []
    rhs: List[float] = []
    coupling_rows: Dict[Path, List[int]] = {}

    def new_row() -> np.ndarray:
        rows.append(np.zeros(size))
        rhs.append(0.0)
        return rows[-1]

    x0 = np.concatenate([sub.x0 for sub in subs])
    for k in range(n):
        new_row()[k] = 1.0
        rhs[-1] = float(x0[k])
    for node in nodes:
        t, p, w = node.stage, node.probability, node.noise
        parent, here = state_index[node.parent], state_index[node.path]
        controls = control_index[node.path]
        first_coupling = len(rows)
        coupling = [new_row() for _ in range(d)]
        coupling_rows[node.path] = list(range(first_coupling, first_coupling + d))
        for i, sub in enumerate(subs):
            x_cols = np.arange(parent + state_offsets[i], parent + state_offsets[i + 1])
            u_cols = np.arange(controls + control_offsets[i], controls + control_offsets[i + 1])
            next_cols = np.arange(here + state_offsets[i], here + state_offsets[i + 1])
            cost_hessian, cost_linear, cost_constant, scale = sub.stage_cost.quadratic_form(t)
            factor = 1.0 if scale is None else float(w[scale])
            cols = np.concatenate([x_cols, u_cols])
            hessian[np.ix_(cols, cols)] += p * factor * 0.5 * (cost_hessian + cost_hessian.T)
            linear[cols] += p * cost_linear
            constant += p * cost_constant
            state_matrix, control_matrix, noise_matrix, offset = sub.dynamics.affine_form(t)
            for r in range(sub.state_dim):
                row = new_row()
                row[next_cols[r]] = 1.0
                row[x_cols] -= state_matrix[r]
                row[u_cols] -= control_matrix[r]
                rhs[-1] = float(noise_matrix[r] @ w + offset[r])
            state_matrix, control_matrix, noise_matrix, offset = sub.coupling.affine_form(t)
            for j in range(d):
                coupling[j][x_cols] += state_matrix[j]
                coupling[j][u_cols] += control_matrix[j]
                rhs[first_coupling + j] -= float(noise_matrix[j] @ w + offset[j])
            if t == spec.horizon - 1:
                final_hessian, final_linear, final_constant, _ = sub.final_cost.quadratic_form(0)
                hessian[np.ix_(next_cols, next_cols)] += p * 0.5 * (final_hessian
                                                                   + final_hessian.T)
                linear[next_cols] += p * final_linear
                constant += p * final_constant
    matrix = np.array(rows)
    b = np.array(rhs)
    active = np.any(matrix != 0.0, axis=1)
    if np.any(np.abs(b[~active]) > tp.coupling_tolerance):
        raise ProblemInfeasible("Infeasible tree problem: a constraint without variables "
                                "has a nonzero right-hand side")
    kept = np.flatnonzero(active)
    matrix, b = matrix[kept], b[kept]
    kkt = np.block([[hessian, matrix.T], [matrix, np.zeros((kept.shape[0], kept.shape[0]))]])
    try:
        solution = scipy.linalg.solve(kkt, np.concatenate([-linear, b]), assume_a="sym")
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(f"The KKT system of the tree is singular: {exc}") from exc
    z, nu = solution[:size], solution[size:]
    duals = np.zeros(len(rows))
    duals[kept] = nu
    value = float(0.5 * z @ hessian @ z + linear @ z + constant)
    controls = {node.path: z[control_index[node.path]:control_index[node.path] + m]
                for node in nodes}
    multipliers = {node.path: duals[coupling_rows[node.path]] / node.probability
                   for node in nodes}
    logger.debug("tree KKT: %d nodes, %d variables, value %.12g", len(nodes), size, value)
    return TreeSolution(value, controls, multipliers, len(nodes))
