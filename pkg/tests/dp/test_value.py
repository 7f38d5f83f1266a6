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
"""Test cases for value tables and their interpolation."""

import numpy as np
import pytest

from pydadp.dp.grid import Grid
from pydadp.dp.value import ValueFunction, interpolate_value


@pytest.fixture(name="value_function")
def fixture_value_function():
    """V_0 = [inf, 1, 2] and V_1 = [0, 2, 4] on the nodes 0, 1, 2."""
    value_function = ValueFunction(Grid.uniform([0.0], [2.0], [3]), 1, [None, None], ("x",))
    value_function.set_table(0, [np.inf, 1.0, 2.0])
    value_function.set_table(1, [0.0, 2.0, 4.0])
    return value_function


def test_linear_interpolation(value_function):
    """Lookups are linear between nodes and exact on them."""
    np.testing.assert_allclose(value_function.lookup(1, np.array([[0.5], [1.0], [1.75]])),
                               [1.0, 2.0, 3.5])
    assert value_function.horizon == 1


def test_infinite_nodes(value_function):
    """A point leaning on an infeasible node is infeasible; the node next to it is not."""
    values = value_function.lookup(0, np.array([[0.5], [1.0], [1.5]]))
    assert np.isinf(values[0])
    np.testing.assert_allclose(values[1:], [1.0, 1.5])


def test_states_outside_the_box(value_function):
    """A state outside the grid box has no value."""
    assert np.isinf(value_function.lookup(1, np.array([[2.5]]))[0])
    with pytest.raises(ValueError, match="outside the grid box"):
        interpolate_value(value_function, 1, [2.5])
    with pytest.raises(ValueError, match="Point has dimension 2"):
        interpolate_value(value_function, 1, [1.0, 1.0])
    assert interpolate_value(value_function, 1, [0.25]) == pytest.approx(0.5)


def test_memory_coordinates_are_clipped():
    """Memory axes beyond the state axes are clipped onto the box instead of refused."""
    grid = Grid.uniform([0.0], [1.0], [2]).product(Grid.uniform([0.0], [1.0], [2]))
    value_function = ValueFunction(grid, 1, [None], ("x", "y"))
    value_function.set_table(0, [0.0, 1.0, 10.0, 11.0])
    np.testing.assert_allclose(value_function.lookup(0, np.array([[0.5, 3.0], [0.5, -1.0]])),
                               [6.0, 5.0])


def test_stateless_table():
    """A table on the empty grid is a single number."""
    value_function = ValueFunction(Grid.empty(), 0, [None], ())
    value_function.set_table(0, 4.5)
    np.testing.assert_array_equal(value_function.lookup(0, np.zeros((2, 0))), [4.5, 4.5])


def test_missing_stage():
    """Stages not computed yet cannot be looked up."""
    value_function = ValueFunction(Grid.uniform([0.0], [1.0], [2]), 1, [None, None], ("x",))
    value_function.set_table(1, [0.0, 1.0])
    with pytest.raises(ValueError, match="Stage 0 of the value function has not been computed"):
        value_function.lookup(0, np.array([[0.5]]))


def test_tidy_frame(value_function):
    """One row per stage and node."""
    frame = value_function.to_frame()
    assert list(frame.columns) == ["t", "x", "value"]
    assert frame.shape[0] == 2 * 3
    assert frame.loc[(frame["t"] == 1) & (frame["x"] == 2.0), "value"].item() == 4.0
