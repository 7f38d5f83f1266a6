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
"""Test cases for the coordination loop."""

import logging
from dataclasses import replace

import numpy as np
import pytest

from pydadp.bench.generators.independent.generator import (independent_discretization,
                                                           make_independent_suite)
from pydadp.dadp.coordinator import (UzawaConfig, check_step_size, check_weak_duality,
                                     dual_value, final_prices, primal_value, run_dadp)
from pydadp.dadp.information import constant_information, perfect_memory_information
from pydadp.dp.priced import PricedTerm
from pydadp.dp.solver import solve_priced_subproblem
from pydadp.exceptions import InvalidProblemProvided, IterationFailed
from pydadp.scenario.sampling import enumerate_tree
from tests.problems import stateless_grids, stateless_pair


def perfect_memory_config(**changes) -> UzawaConfig:
    """Exhaustive coordination with one bin per information value."""
    settings = {"step_sizes": 0.5, "max_iterations": 10, "exhaustive": True,
                "estimator": "binned", "estimator_options": {"edges": "singleton"},
                "slack_unit": 1}
    settings.update(changes)
    return UzawaConfig(**settings)


@pytest.mark.parametrize("alpha,lipschitz,rho,admissible,bound", [
    pytest.param(1.0, 1.0, 1.0, True, 2.0, id="inside"),
    pytest.param(1.0, 2.0, 0.6, False, 0.5, id="above-the-bound"),
    pytest.param(1.0, 1.0, [0.5, 0.0], False, 2.0, id="zero-step"),
])
def test_check_step_size(alpha, lipschitz, rho, admissible, bound):
    """ρ_t must lie strictly inside (0, 2α/c²)."""
    result, report = check_step_size(alpha, lipschitz, rho)
    assert result == admissible
    assert report.bound == pytest.approx(bound)
    with pytest.raises(ValueError, match="must be positive"):
        check_step_size(0.0, lipschitz, rho)


def test_config_validation():
    """Loop settings are checked on construction; stage steps against the horizon."""
    with pytest.raises(ValueError, match="Step sizes must be positive"):
        UzawaConfig(step_sizes=0.0)
    with pytest.raises(ValueError, match="At least one iteration"):
        UzawaConfig(max_iterations=0)
    with pytest.raises(ValueError, match="2 step sizes given for 3 stages"):
        UzawaConfig(step_sizes=[0.1, 0.2]).steps(3)
    np.testing.assert_allclose(UzawaConfig(step_sizes=0.1).steps(3), [0.1, 0.1, 0.1])


def test_perfect_memory_reaches_the_optimum():
    """With the whole demand history as information, one step closes the gap."""
    spec = stateless_pair()
    info = perfect_memory_information(spec.noise)
    result = run_dadp(spec, info, perfect_memory_config(), stateless_grids(spec))
    assert result.stop_reason == "gap"
    assert result.converged
    assert [report.iteration for report in result.reports] == [1, 2]
    first, second = result.reports
    assert first.dual.mean == pytest.approx(0.0)
    assert first.primal.mean == pytest.approx(15.0)
    assert second.dual.mean == pytest.approx(7.5)
    assert second.primal.mean == pytest.approx(7.5)
    assert second.max_mean_residual == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(result.store.values[..., 0],
                               -0.5 * result.scenarios.noise[..., 0].T)
    prices = final_prices(result, info)
    np.testing.assert_allclose(prices["price_0"],
                               -0.5 * result.scenarios.noise[..., 0].reshape(-1))


def test_dual_increases_and_stays_below_the_primal():
    """Small steps: the dual climbs towards 7.5 and weak duality holds throughout."""
    spec = stateless_pair()
    config = perfect_memory_config(step_sizes=0.25, max_iterations=4, strong_convexity=1.0,
                                   lipschitz=np.sqrt(2.0))
    result = run_dadp(spec, perfect_memory_information(spec.noise), config,
                      stateless_grids(spec, nodes=65))
    assert result.stop_reason == "iterations"
    duals = [report.dual.mean for report in result.reports]
    np.testing.assert_allclose(duals, [0.0, 5.625, 7.03125, 7.3828125])
    primals = [report.primal.mean for report in result.reports]
    np.testing.assert_allclose(primals, [15.0, 9.375, 7.96875, 7.6171875])
    assert check_weak_duality(result.reports)
    trace = result.trace_frame()
    assert list(trace["k"]) == [1, 2, 3, 4]
    assert {"dual", "primal", "gap", "residual_mean_t0", "residual_sd_t2",
            "deviance_t1"} <= set(trace.columns)
    assert len(result.histogram_frames()) == 4 * 3


def test_uncoupled_units_stop_at_once():
    """Without coupling the residuals vanish and the multipliers never move."""
    spec = make_independent_suite(shared_noise=True)
    config = UzawaConfig(exhaustive=True, max_iterations=5)
    result = run_dadp(spec, constant_information(spec.horizon, 1), config,
                      independent_discretization(spec))
    assert result.stop_reason == "residual"
    assert len(result.reports) == 1
    assert not result.store.values.any()


def test_dual_value_of_uncoupled_units():
    """At zero price the dual value is the sum of the unit Bellman values at x_0."""
    spec = make_independent_suite(shared_noise=True)
    discretization = independent_discretization(spec)
    info = constant_information(spec.horizon, 1)
    scenarios = enumerate_tree(spec.noise)
    estimate = dual_value(spec, PricedTerm.zero(spec.horizon, 1), scenarios, info,
                          discretization)
    expected = sum(
        solve_priced_subproblem(sub, spec.noise, None, discretization[i], unit=i)[0]
        .lookup(0, sub.x0.reshape(1, -1))[0] for i, sub in enumerate(spec.subsystems))
    assert estimate.mean == pytest.approx(expected, abs=1e-9)
    assert estimate.half_width == 0.0


def test_sampled_runs_are_reproducible():
    """Equal seeds give equal traces."""
    spec = stateless_pair()
    config = UzawaConfig(step_sizes=0.5, max_iterations=3, scenario_count=40, seed=9,
                         slack_unit=1, gap_tolerance=0.0, residual_tolerance=0.0)
    info = constant_information(spec.horizon, 1)
    first = run_dadp(spec, info, config, stateless_grids(spec)).trace_frame()
    second = run_dadp(spec, info, config, stateless_grids(spec)).trace_frame()
    assert first.equals(second)
    assert first.shape[0] == 3


def test_invalid_inputs():
    """The loop refuses invalid problems and information of another horizon."""
    spec = stateless_pair()
    broken = replace(spec, subsystems=())
    with pytest.raises(InvalidProblemProvided, match="no subsystems"):
        run_dadp(broken, constant_information(3, 1), UzawaConfig())
    with pytest.raises(ValueError, match="given for 2 stages"):
        run_dadp(spec, constant_information(2, 1), UzawaConfig(), stateless_grids(spec))


def test_failing_iteration():
    """A failure inside an iteration names it and keeps the reports made before it."""
    spec = make_independent_suite(shared_noise=True)
    config = UzawaConfig(exhaustive=True, slack_unit=0)
    with pytest.raises(IterationFailed, match="Iteration 1 failed") as excinfo:
        run_dadp(spec, constant_information(spec.horizon, 1), config,
                 independent_discretization(spec))
    assert excinfo.value.iteration == 1
    assert excinfo.value.trace == []


def test_step_size_warning(caplog):
    """Step sizes outside the admissible interval are reported, not refused."""
    spec = stateless_pair()
    config = UzawaConfig(step_sizes=1.5, max_iterations=1, exhaustive=True, slack_unit=1,
                         strong_convexity=1.0, lipschitz=np.sqrt(2.0))
    with caplog.at_level(logging.WARNING, logger="pydadp.dadp.coordinator"):
        run_dadp(spec, constant_information(3, 1), config, stateless_grids(spec))
    assert "Step sizes outside (0, 1)" in caplog.text


def test_coupled_units_without_a_slack_unit(caplog):
    """An unrecovered primal matching the dual is no reason to stop; the residual is."""
    spec = stateless_pair()
    config = perfect_memory_config(slack_unit=None)
    with caplog.at_level(logging.INFO, logger="pydadp.dadp.coordinator"):
        result = run_dadp(spec, perfect_memory_information(spec.noise), config,
                          stateless_grids(spec))
    first, second = result.reports
    assert first.gap == pytest.approx(0.0)
    assert first.max_mean_residual == pytest.approx(3.0)
    assert result.stop_reason == "residual"
    assert second.max_mean_residual == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(result.store.values[..., 0],
                               -0.5 * result.scenarios.noise[..., 0].T)
    assert "iteration 2: dual 7.5" in caplog.text


def test_primal_value_at_zero_price():
    """Unpriced units stay idle and the slack unit covers the whole demand."""
    spec = stateless_pair()
    estimate = primal_value(spec, PricedTerm.zero(3, 1), enumerate_tree(spec.noise), 1,
                            constant_information(3, 1), stateless_grids(spec))
    assert estimate.mean == pytest.approx(15.0)
    assert estimate.half_width == 0.0
