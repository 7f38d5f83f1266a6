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
"""Stage-indexed value tables with multilinear interpolation."""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import xarray as xr
from scipy.interpolate import RegularGridInterpolator

from pydadp.dp.grid import Grid

BOX_TOLERANCE = 1e-9


@dataclass
class ValueFunction:
    """Value tables V_0..V_T on a grid whose leading ``state_dim`` axes are states.

    Any remaining axes index the information kept in memory. Infeasible nodes hold
    ``+inf``. Lookups are multilinear; a point whose interpolation puts positive weight on
    an infinite node is infinite.
    """

    grid: Grid
    state_dim: int
    tables: List[Optional[np.ndarray]]
    axis_names: Tuple[str, ...]
    _interpolators: Dict[int, Callable] = field(default_factory=dict, repr=False, compare=False)

    @property
    def horizon(self) -> int:
        """Number of stages T."""
        return len(self.tables) - 1

    def set_table(self, t: int, values: np.ndarray):
        """Stores V_t given on the grid nodes in C order."""
        self.tables[t] = np.asarray(values, dtype=float).reshape(self.grid.shape)
        self._interpolators.pop(t, None)

    def _interpolator(self, t: int) -> Callable:
        if t not in self._interpolators:
            table = self.tables[t]
            if table is None:
                raise ValueError(f"Stage {t} of the value function has not been computed")
            infinite = np.isinf(table)
            finite = RegularGridInterpolator(self.grid.axes, np.where(infinite, 0.0, table),
                                             method="linear", bounds_error=False,
                                             fill_value=None)
            if infinite.any():
                indicator = RegularGridInterpolator(self.grid.axes, infinite.astype(float),
                                                    method="linear", bounds_error=False,
                                                    fill_value=None)

                def interpolate(points, finite=finite, indicator=indicator):
                    return np.where(indicator(points) > 0.0, np.inf, finite(points))
            else:
                interpolate = finite
            self._interpolators[t] = interpolate
        return self._interpolators[t]

    def lookup(self, t: int, points: np.ndarray) -> np.ndarray:
        """Values at a batch of points (B, dim).

        States outside the grid box are infinite; memory coordinates are clipped onto
        the box.
        """
        points = np.asarray(points, dtype=float)
        if self.grid.dim == 0:
            return np.full(points.shape[0], float(self.tables[t]))
        lower, upper = self.grid.lower, self.grid.upper
        inside = np.all((points[:, :self.state_dim] >= lower[:self.state_dim] - BOX_TOLERANCE)
                        & (points[:, :self.state_dim] <= upper[:self.state_dim] + BOX_TOLERANCE),
                        axis=1)
        values = np.full(points.shape[0], np.inf)
        if inside.any():
            values[inside] = self._interpolator(t)(np.clip(points[inside], lower, upper))
        return values

    def to_dataarray(self) -> xr.DataArray:
        """All tables as one labelled array (stage × grid axes)."""
        data = np.stack([np.asarray(table, dtype=float) for table in self.tables])
        coords = {"t": np.arange(len(self.tables))}
        coords.update(dict(zip(self.axis_names, self.grid.axes)))
        return xr.DataArray(data, dims=("t", *self.axis_names), coords=coords, name="value")

    def to_frame(self) -> pd.DataFrame:
        """Tidy table (t, node coordinates..., value)."""
        return self.to_dataarray().to_dataframe().reset_index()


def interpolate_value(value_function: ValueFunction, t: int, x) -> float:
    """Interpolated V_t(x); raises when x lies outside the grid box."""
    point = np.asarray(x, dtype=float).reshape(1, -1)
    if point.shape[1] != value_function.grid.dim:
        raise ValueError(f"Point has dimension {point.shape[1]}, "
                         f"the value function {value_function.grid.dim}")
    if not value_function.grid.contains(point)[0]:
        raise ValueError(f"Point {point[0].tolist()} lies outside the grid box at stage {t}")
    return float(value_function.lookup(t, point)[0])
