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
"""Test cases for the multiplier store, its update and the price projection."""

import numpy as np
import pytest

from pydadp.dadp.information import (constant_information, noise_information,
                                     perfect_memory_information)
from pydadp.dadp.multipliers import MultiplierStore, multiplier_update, project_price
from pydadp.exceptions import NonFiniteValue
from pydadp.scenario.sampling import enumerate_tree, sample_scenarios
from tests.problems import stateless_pair


def test_update_moves_along_the_residual():
    """λ' = λ + ρ r"""
    store = multiplier_update(MultiplierStore.zeros(1, 1, 1), np.full((1, 1, 1), 2.0), 0.5)
    assert store.values[0, 0, 0] == pytest.approx(1.0)
    assert store.iteration == 1
    store = multiplier_update(MultiplierStore(np.array([[[1.0], [-1.0]]]), 3),
                              np.full((1, 2, 1), 10.0), 0.1)
    np.testing.assert_allclose(store.values[0, :, 0], [2.0, 0.0])
    assert store.iteration == 4


def test_update_with_stage_steps():
    """One step size per stage."""
    store = multiplier_update(MultiplierStore.zeros(2, 1, 1), np.ones((2, 1, 1)), [0.5, 2.0])
    np.testing.assert_allclose(store.values[:, 0, 0], [0.5, 2.0])


def test_update_refuses_bad_residuals():
    """Shapes must agree and residuals must be finite."""
    store = MultiplierStore.zeros(2, 3, 1)
    with pytest.raises(ValueError, match="Residuals have shape"):
        multiplier_update(store, np.zeros((3, 2, 1)), 0.5)
    residuals = np.zeros((2, 3, 1))
    residuals[1, 2, 0] = np.inf
    with pytest.raises(NonFiniteValue, match="stage 1, scenario 2"):
        multiplier_update(store, residuals, 0.5)


def test_store_validation():
    """Stores are (T, S, d) and finite."""
    with pytest.raises(ValueError, match="must be shaped"):
        MultiplierStore(np.zeros((2, 3)))
    with pytest.raises(NonFiniteValue):
        MultiplierStore(np.full((1, 1, 1), np.nan))
    assert MultiplierStore.zeros(4, 5, 2).shape == (4, 5, 2)


def test_projection_without_information():
    """Without coordinates the price is the stage mean, whatever the estimator asked for."""
    spec = stateless_pair()
    scenarios = sample_scenarios(spec.noise, 4, seed=0)
    values = np.arange(12, dtype=float).reshape(3, 4, 1)
    price, deviances = project_price(MultiplierStore(values), scenarios,
                                     constant_information(3, 1), "binned", bins=4)
    for t in range(3):
        np.testing.assert_allclose(price.evaluate(t, np.zeros((1, 0))), [[values[t].mean()]])
    np.testing.assert_allclose(deviances, 0.0)


def test_projection_on_the_demand():
    """λ = −d/2 is recovered exactly from the current demand."""
    spec = stateless_pair()
    scenarios = enumerate_tree(spec.noise)
    store = MultiplierStore(-0.5 * np.transpose(scenarios.noise, (1, 0, 2)))
    info = noise_information(spec.noise, "demand")
    price, deviances = project_price(store, scenarios, info, "binned", edges="singleton")
    np.testing.assert_allclose(price.evaluate(1, np.array([[2.0], [4.0]])), [[-1.0], [-2.0]])
    np.testing.assert_allclose(deviances, 1.0)


def test_projection_with_perfect_memory():
    """Singleton bins on the encoded prefix return the scenario-wise multipliers."""
    spec = stateless_pair()
    scenarios = enumerate_tree(spec.noise)
    rng = np.random.Generator(np.random.Philox(4))
    values = np.empty((3, 8, 1))
    for t in range(3):
        # multipliers only depending on the prefix up to t
        per_prefix = rng.normal(size=2 ** (t + 1))
        values[t, :, 0] = np.repeat(per_prefix, 2 ** (2 - t))
    info = perfect_memory_information(spec.noise)
    price, _ = project_price(MultiplierStore(values), scenarios, info, "binned",
                             edges="singleton")
    info_values = info.values(scenarios.noise)
    for t in range(3):
        np.testing.assert_allclose(price.evaluate(t, info_values[:, t]), values[t], rtol=1e-12)


def test_projection_reports_the_stage():
    """Estimator errors name the stage they occurred at."""
    spec = stateless_pair()
    scenarios = enumerate_tree(spec.noise)
    with pytest.raises(ValueError, match="Stage 0: Unknown estimator kind 'spline'"):
        project_price(MultiplierStore.zeros(3, 8, 1), scenarios,
                      noise_information(spec.noise, "demand"), "spline")
