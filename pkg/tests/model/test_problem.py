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
"""Test cases for the problem types and the mapping catalog."""

from dataclasses import replace

import numpy as np
import pytest

from pydadp.model.catalog import (AffineCoupling, AffineDynamics, PiecewiseLinearCost,
                                  QuadraticCost, cost_from_dict, quadratic_final_cost)
from pydadp.model.problem import (Marginal, NoiseModel, coupling_inverse, product_support,
                                  stage_bounds)
from tests.problems import stateless_pair


def test_marginal_moments():
    """Mean and variance of a finite distribution."""
    marginal = Marginal([0.0, 1.0, 2.0], [0.25, 0.5, 0.25])
    assert marginal.mean() == pytest.approx(1.0)
    assert marginal.variance() == pytest.approx(0.5)
    assert Marginal.point(3.0).variance() == 0.0


def test_product_support_order():
    """The first coordinate varies slowest and probabilities multiply."""
    points, probabilities = product_support([Marginal.uniform([1.0, 2.0]),
                                             Marginal([10.0, 20.0], [0.25, 0.75])])
    np.testing.assert_array_equal(points, [[1, 10], [1, 20], [2, 10], [2, 20]])
    np.testing.assert_allclose(probabilities, [0.125, 0.375, 0.125, 0.375])


def test_noise_partition():
    """Local and global coordinates are read off the partition."""
    noise = NoiseModel.from_marginals([[Marginal.point(1.0)] * 3] * 2,
                                      ("demand", "inflow_1", "inflow_2"), (None, 0, 1))
    assert noise.horizon == 2
    assert noise.dimension == 3
    assert noise.global_coordinates() == (0,)
    assert noise.local_coordinates(1) == (2,)
    assert noise.coordinate("inflow_1") == 1
    with pytest.raises(ValueError, match="Unknown noise coordinate 'rain'"):
        noise.coordinate("rain")


def test_stage_bounds():
    """Bounds given once are broadcast; None stands for the fill value."""
    np.testing.assert_array_equal(stage_bounds(2.0, 3, 1, -np.inf), np.full((3, 1), 2.0))
    np.testing.assert_array_equal(stage_bounds(0, 2, 3, np.inf), np.zeros((2, 3)))
    assert np.all(np.isposinf(stage_bounds([None], 2, 1, np.inf)))
    np.testing.assert_array_equal(stage_bounds([[1.0], [None]], 2, 1, -np.inf),
                                  [[1.0], [-np.inf]])
    np.testing.assert_array_equal(stage_bounds([None, 1.0], 2, 2, np.inf),
                                  [[np.inf, 1.0], [np.inf, 1.0]])
    assert np.all(np.isneginf(stage_bounds(None, 4, 2, -np.inf)))


def test_unit_index():
    """Subsystems resolve by name, by index and by a digit string."""
    spec = stateless_pair()
    assert spec.unit_index("unit_1") == 1
    assert spec.unit_index(0) == 0
    assert spec.unit_index("1") == 1
    with pytest.raises(ValueError, match="Unknown subsystem 'hydro'"):
        spec.unit_index("hydro")
    with pytest.raises(ValueError, match="There is no subsystem 5"):
        spec.unit_index(5)


def test_coupling_inverse():
    """Only a unit with an invertible control block can be the slack unit."""
    spec = stateless_pair()
    np.testing.assert_array_equal(coupling_inverse(spec.subsystems[1], 0), [[1.0]])
    sub = spec.subsystems[1]
    frozen = AffineCoupling(sub.coupling.state_matrix, np.zeros((1, 1)),
                            sub.coupling.noise_matrix, sub.coupling.offset)
    with pytest.raises(ValueError, match="cannot be the slack unit"):
        coupling_inverse(replace(sub, coupling=frozen), 0)


def test_affine_dynamics_stage_coefficients():
    """Coefficients with a leading stage axis are read stage by stage."""
    dynamics = AffineDynamics(np.array([[[1.0]], [[2.0]]]), np.array([[-1.0]]),
                              np.array([[1.0]]), np.array([[0.0], [10.0]]))
    x, u, w = np.array([[1.0]]), np.array([[0.5]]), np.array([[0.25]])
    assert dynamics(0, x, u, w)[0, 0] == pytest.approx(0.75)
    assert dynamics(1, x, u, w)[0, 0] == pytest.approx(11.75)


def test_quadratic_cost_scale_coordinate():
    """The quadratic part is multiplied by the named noise coordinate."""
    cost = QuadraticCost(np.array([[2.0]]), np.array([1.0]), np.asarray(0.5),
                         scale_coordinate=1)
    value = cost(0, np.zeros((1, 0)), np.array([[3.0]]), np.array([[7.0, 1.5]]))
    assert value[0] == pytest.approx(0.5 * 2.0 * 9.0 * 1.5 + 3.0 + 0.5)


def test_quadratic_final_cost():
    """weight · |x − target|² + constant"""
    cost = quadratic_final_cost(0.1, np.array([5.0]), 2.0)
    x = np.array([[5.0], [7.0]])
    np.testing.assert_allclose(cost(0, x, x[:, :0], x[:, :0]), [2.0, 2.4])


def test_piecewise_linear_cost():
    """The maximum of the affine pieces; it has no quadratic form."""
    cost = PiecewiseLinearCost(np.array([[1.0], [-1.0]]), np.array([0.0, 0.0]))
    np.testing.assert_allclose(cost(0, np.zeros((3, 0)), np.array([[-2.0], [0.0], [3.0]]),
                                    np.zeros((3, 0))), [2.0, 0.0, 3.0])
    with pytest.raises(NotImplementedError):
        cost.quadratic_form(0)


def test_fold_demand():
    """Folding subtracts the demand coordinate from the first coupling row."""
    coupling = AffineCoupling(np.zeros((1, 0)), np.array([[1.0]]), np.zeros((1, 2)),
                              np.zeros(1)).fold_demand(1)
    value = coupling(0, np.zeros((1, 0)), np.array([[3.0]]), np.array([[0.0, 10.0]]))
    assert value[0, 0] == pytest.approx(-7.0)


def test_cost_from_dict_unknown_kind():
    """The catalog is closed."""
    with pytest.raises(ValueError, match="Unknown cost kind 'spline'"):
        cost_from_dict({"kind": "spline"}, 2)
