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
"""The coordination loop: project prices, solve priced subproblems, simulate, update.

Every iteration fits λ̂_t(y) = E[λ_t | y_t] on the current scenario-wise multipliers,
solves each subsystem by dynamic programming against that price, simulates the
resulting feedback on a fixed set of coordination scenarios, and moves the multipliers
along the coupling residuals, λ ← λ + ρ r. The dual value is the expected Lagrangian of
the simulated priced policies; the primal value is the true cost after the slack unit
restores the coupling.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from pydadp.dadp.information import InformationSpec
from pydadp.dadp.multipliers import MultiplierStore, multiplier_update, project_price
from pydadp.dp.grid import Discretization
from pydadp.dp.priced import PricedTerm
from pydadp.dp.solver import DEFAULT_NODE_CAP, Policy, solve_priced_subproblem
from pydadp.dp.value import ValueFunction
from pydadp.exceptions import InvalidProblemProvided, IterationFailed
from pydadp.model.helpers import validate_problem
from pydadp.model.problem import ProblemSpec
from pydadp.scenario.sampling import (DEFAULT_TREE_CAP, MonteCarloEstimate, ScenarioSet,
                                      enumerate_tree, monte_carlo_estimate,
                                      sample_scenarios)
from pydadp.scenario.simulation import (TrajectoryBundle, estimate_cost,
                                        recover_feasibility, simulate_policy)

logger = logging.getLogger(__name__)  # pylint: disable=C0103


@dataclass(frozen=True)
class UzawaConfig:
    """Settings of the coordination loop."""

    step_sizes: Any = 0.5
    max_iterations: int = 20
    scenario_count: int = 500
    seed: int = 0
    gap_tolerance: float = 1e-8
    residual_tolerance: float = 1e-8
    strong_convexity: Optional[float] = None
    lipschitz: Optional[float] = None
    estimator: str = "constant"
    estimator_options: Dict[str, Any] = field(default_factory=dict)
    exhaustive: bool = False
    slack_unit: Optional[int] = None
    threads: int = 1
    histogram_bins: int = 20
    node_cap: int = DEFAULT_NODE_CAP
    tree_cap: int = DEFAULT_TREE_CAP

    def __post_init__(self):
        steps = np.asarray(self.step_sizes, dtype=float).reshape(-1)
        if steps.size == 0 or np.any(steps <= 0) or not np.all(np.isfinite(steps)):
            raise ValueError("Step sizes must be positive")
        if self.max_iterations < 1:
            raise ValueError("At least one iteration is needed")
        if self.scenario_count < 1:
            raise ValueError("At least one coordination scenario is needed")
        if self.threads < 1:
            raise ValueError("At least one thread is needed")

    def steps(self, horizon: int) -> np.ndarray:
        """ρ_t for every stage."""
        steps = np.asarray(self.step_sizes, dtype=float).reshape(-1)
        if steps.size not in (1, horizon):
            raise ValueError(f"{steps.size} step sizes given for {horizon} stages")
        return np.broadcast_to(steps, (horizon,)).copy()


@dataclass(frozen=True)
class StepSizeReport:
    """The admissible bound 2α/c² and the distance of every ρ_t to it."""

    bound: float
    margins: np.ndarray


def check_step_size(alpha: float, lipschitz: float, rho) -> Tuple[bool, StepSizeReport]:
    """True iff every ρ_t lies strictly inside (0, 2α/c²)."""
    if alpha <= 0 or lipschitz <= 0:
        raise ValueError("The strong convexity modulus and the Lipschitz constant "
                         "must be positive")
    bound = 2.0 * alpha / lipschitz ** 2
    steps = np.asarray(rho, dtype=float).reshape(-1)
    margins = bound - steps
    return bool(np.all(steps > 0) and np.all(margins > 0)), StepSizeReport(bound, margins)


@dataclass(frozen=True)
class IterationReport:
    """What one coordination iteration measured."""

    iteration: int
    dual: MonteCarloEstimate
    primal: MonteCarloEstimate
    residual_mean: np.ndarray
    residual_sd: np.ndarray
    histograms: Tuple[Tuple[Tuple[np.ndarray, np.ndarray], ...], ...]
    deviance: np.ndarray
    empty_bins: np.ndarray
    slack_violations: int
    wall_time: float

    @property
    def gap(self) -> float:
        """Primal minus dual estimate."""
        return self.primal.mean - self.dual.mean

    @property
    def max_mean_residual(self) -> float:
        """Largest absolute per-stage mean residual."""
        return float(np.max(np.abs(self.residual_mean))) if self.residual_mean.size else 0.0


@dataclass
class DadpResult:
    """Final multipliers, prices and policies with the per-iteration trace."""

    store: MultiplierStore
    price: PricedTerm
    policies: List[Policy]
    value_functions: List[ValueFunction]
    reports: List[IterationReport]
    scenarios: ScenarioSet
    bundle: TrajectoryBundle
    stop_reason: str

    @property
    def converged(self) -> bool:
        """True when a tolerance stopped the loop before the iteration limit."""
        return self.stop_reason in ("gap", "residual")

    def trace_frame(self) -> pd.DataFrame:
        """The iteration trace; wall times are left out to keep it reproducible."""
        rows = []
        for report in self.reports:
            row = {"k": report.iteration, "dual": report.dual.mean,
                   "dual_ci": report.dual.half_width, "primal": report.primal.mean,
                   "primal_ci": report.primal.half_width, "gap": report.gap,
                   "slack_violations": report.slack_violations}
            for t in range(report.residual_mean.shape[0]):
                for j in range(report.residual_mean.shape[1]):
                    suffix = f"_t{t}" if report.residual_mean.shape[1] == 1 else f"_t{t}_{j}"
                    row[f"residual_mean{suffix}"] = report.residual_mean[t, j]
                    row[f"residual_sd{suffix}"] = report.residual_sd[t, j]
            for t, value in enumerate(report.deviance):
                row[f"deviance_t{t}"] = value
            rows.append(row)
        return pd.DataFrame(rows)

    def histogram_frames(self) -> Dict[Tuple[int, int], pd.DataFrame]:
        """Residual histograms keyed by (k, t): bin edges and masses per coupling row."""
        frames = {}
        for report in self.reports:
            for t, per_row in enumerate(report.histograms):
                parts = []
                for j, (edges, masses) in enumerate(per_row):
                    parts.append(pd.DataFrame({"coupling": j, "bin_lower": edges[:-1],
                                               "bin_upper": edges[1:], "mass": masses}))
                frames[(report.iteration, t)] = pd.concat(parts, ignore_index=True)
        return frames


def solve_subproblems(spec: ProblemSpec, price: PricedTerm, info: InformationSpec,
                      discretization: Discretization, node_cap: int = DEFAULT_NODE_CAP,
                      threads: int = 1) -> List[Tuple[ValueFunction, Policy]]:
    """Solves every priced subproblem; results come back in subsystem order."""
    return Parallel(n_jobs=threads, prefer="threads")(
        delayed(solve_priced_subproblem)(sub, spec.noise, price, discretization[i], info, i,
                                         node_cap)
        for i, sub in enumerate(spec.subsystems))


def lagrangian_values(bundle: TrajectoryBundle, price: PricedTerm, info: InformationSpec
                      ) -> np.ndarray:
    """Per-scenario C + λ̂ᵀ Σ g + K along simulated paths."""
    total = bundle.total_costs()
    info_values = info.values(bundle.scenarios.noise)
    for t in range(bundle.residuals.shape[1]):
        prices = price.evaluate(t, info_values[:, t])
        for j in range(bundle.residuals.shape[2]):
            total = total + prices[:, j] * bundle.residuals[:, t, j]
    return total


def _simulate(spec: ProblemSpec, price: PricedTerm, scenarios: ScenarioSet,
              info: InformationSpec, discretization: Discretization, node_cap: int,
              threads: int):
    solutions = solve_subproblems(spec, price, info, discretization, node_cap, threads)
    policies = [policy for _, policy in solutions]
    memory = info.memory_trajectory(scenarios.noise)
    return solutions, simulate_policy(spec, policies, scenarios, memory)


def dual_value(spec: ProblemSpec, price: PricedTerm, scenarios: ScenarioSet,
               info: InformationSpec, discretization: Discretization,
               node_cap: int = DEFAULT_NODE_CAP, threads: int = 1) -> MonteCarloEstimate:
    """Expected Lagrangian of the priced-subproblem policies on the given scenarios."""
    _, bundle = _simulate(spec, price, scenarios, info, discretization, node_cap, threads)
    return monte_carlo_estimate(lagrangian_values(bundle, price, info), scenarios)


def primal_value(spec: ProblemSpec, price: PricedTerm, scenarios: ScenarioSet,
                 slack_unit: int, info: InformationSpec, discretization: Discretization,
                 node_cap: int = DEFAULT_NODE_CAP, threads: int = 1) -> MonteCarloEstimate:
    """Expected true cost of the priced policies once the slack unit restores the coupling."""
    _, bundle = _simulate(spec, price, scenarios, info, discretization, node_cap, threads)
    return estimate_cost(recover_feasibility(bundle, slack_unit))


def residual_statistics(residuals: np.ndarray, scenarios: ScenarioSet
                        ) -> Tuple[np.ndarray, np.ndarray]:
    """Per-stage mean and standard deviation (T, d) of residuals given as (S, T, d)."""
    weights = scenarios.weights()
    if weights is not None:
        mean = np.average(residuals, axis=0, weights=weights)
        spread = np.sqrt(np.average((residuals - mean) ** 2, axis=0, weights=weights))
        return mean, spread
    mean = residuals.mean(axis=0)
    if residuals.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, residuals.std(axis=0, ddof=1)


def residual_histograms(residuals: np.ndarray, scenarios: ScenarioSet, bins: int):
    """Normalized histograms per stage and coupling row."""
    weights = scenarios.weights()
    histograms = []
    for t in range(residuals.shape[1]):
        per_row = []
        for j in range(residuals.shape[2]):
            counts, edges = np.histogram(residuals[:, t, j], bins=bins, weights=weights)
            per_row.append((edges, counts / counts.sum()))
        histograms.append(tuple(per_row))
    return tuple(histograms)


def coordination_scenarios(spec: ProblemSpec, config: UzawaConfig) -> ScenarioSet:
    """The fixed scenario set of the whole run."""
    if config.exhaustive:
        return enumerate_tree(spec.noise, config.tree_cap)
    return sample_scenarios(spec.noise, config.scenario_count, config.seed)


def _check_inputs(spec: ProblemSpec, info: InformationSpec, config: UzawaConfig):
    report = validate_problem(spec)
    if not report.is_valid:
        raise InvalidProblemProvided(report)
    if info.horizon != spec.horizon:
        raise ValueError(f"The information is given for {info.horizon} stages, "
                         f"the problem has {spec.horizon}")
    if info.noise_matrix.shape[2] != spec.noise.dimension:
        raise ValueError("The information maps do not match the noise dimension")
    if config.strong_convexity is not None and config.lipschitz is not None:
        admissible, step_report = check_step_size(config.strong_convexity, config.lipschitz,
                                                  config.steps(spec.horizon))
        if not admissible:
            logger.warning("Step sizes outside (0, %.6g); convergence is not guaranteed",
                           step_report.bound)


def run_dadp(spec: ProblemSpec, info: InformationSpec, config: UzawaConfig,
             discretization: Optional[Discretization] = None,
             scenarios: Optional[ScenarioSet] = None) -> DadpResult:
    """Runs the coordination loop from zero multipliers.

    Args:
        spec: the problem; it must pass validation.
        info: the information variable shared by every subsystem.
        config: loop settings.
        discretization: grids per subsystem, uniform defaults when omitted.
        scenarios: coordination scenarios overriding the ones built from the config.

    The gap stops the loop only with a slack unit, the residual tolerance always does.

    Returns:
        DadpResult: the final store, price term, policies and iteration reports.
    """
    _check_inputs(spec, info, config)
    if discretization is None:
        discretization = Discretization.uniform(spec, 21, 13)
    if scenarios is None:
        scenarios = coordination_scenarios(spec, config)
    steps = config.steps(spec.horizon)
    store = MultiplierStore.zeros(spec.horizon, scenarios.count, spec.coupling_dim)
    reports: List[IterationReport] = []
    stop_reason = "iterations"
    price = solutions = bundle = None
    for iteration in range(1, config.max_iterations + 1):
        started = time.perf_counter()
        try:
            price, deviances = project_price(store, scenarios, info, config.estimator,
                                             **config.estimator_options)
            solutions, bundle = _simulate(spec, price, scenarios, info, discretization,
                                          config.node_cap, config.threads)
            dual = monte_carlo_estimate(lagrangian_values(bundle, price, info), scenarios)
            recovered = bundle
            if config.slack_unit is not None:
                recovered = recover_feasibility(bundle, config.slack_unit)
            primal = estimate_cost(recovered)
        except Exception as exc:  # pylint: disable=broad-except
            raise IterationFailed(f"Iteration {iteration} failed: {exc}", iteration,
                                  reports) from exc
        mean, spread = residual_statistics(bundle.residuals, scenarios)
        report = IterationReport(
            iteration, dual, primal, mean, spread,
            residual_histograms(bundle.residuals, scenarios, config.histogram_bins),
            deviances, np.array([estimator.empty_bins for estimator in price.estimators]),
            0 if recovered.slack_violations is None else int(recovered.slack_violations.sum()),
            time.perf_counter() - started)
        reports.append(report)
        logger.info("iteration %d: dual %.8g, primal %.8g, gap %.3g, max |mean residual| %.3g",
                    iteration, dual.mean, primal.mean, report.gap, report.max_mean_residual)
        # only a recovered primal is feasible
        if config.slack_unit is not None and abs(report.gap) < config.gap_tolerance:
            stop_reason = "gap"
            break
        if report.max_mean_residual < config.residual_tolerance:
            stop_reason = "residual"
            break
        if iteration < config.max_iterations:
            store = multiplier_update(store, np.transpose(bundle.residuals, (1, 0, 2)), steps)
    return DadpResult(store, price, [policy for _, policy in solutions],
                      [value_function for value_function, _ in solutions], reports,
                      scenarios, bundle, stop_reason)


def final_prices(result: DadpResult, info: InformationSpec) -> pd.DataFrame:
    """λ̂_t(y_t^s) along every coordination scenario, one row per (scenario_id, t)."""
    scenarios = result.scenarios
    info_values = info.values(scenarios.noise)
    rows = []
    for t in range(scenarios.horizon):
        prices = result.price.evaluate(t, info_values[:, t])
        for s in range(scenarios.count):
            rows.append({"scenario_id": s, "t": t,
                         **{f"price_{j}": prices[s, j] for j in range(prices.shape[1])}})
    return pd.DataFrame(rows).sort_values(["scenario_id", "t"], kind="stable",
                                          ignore_index=True)


def check_weak_duality(reports: Sequence[IterationReport]) -> bool:
    """primal + CI ≥ dual − CI at every iteration."""
    return all(report.primal.mean + report.primal.half_width
               >= report.dual.mean - report.dual.half_width for report in reports)
