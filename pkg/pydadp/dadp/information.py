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
"""Information variables y_t conditioning the price projection E[λ_t | y_t].

Three modes are supported. ``constant`` carries no information (y_t has dimension 0).
``noise`` is a memoryless affine function of the current noise, y_t = B_t w_t + c_t.
``markovian`` keeps y in memory, y_t = A_t y_{t-1} + B_t w_t + c_t, starting from
y_{-1} = ``initial``; the priced subproblem then carries y_{t-1} next to the state.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from pydadp.dp.grid import Grid
from pydadp.model.catalog import apply_matrix
from pydadp.model.problem import NoiseModel

MODES = ("constant", "noise", "markovian")


@dataclass(frozen=True)
class InformationSpec:
    """A single information process shared by every subsystem."""

    mode: str
    state_matrix: np.ndarray
    noise_matrix: np.ndarray
    offset: np.ndarray
    memory_grid: Grid
    initial: np.ndarray
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"Unknown information mode '{self.mode}', expected one of {MODES}")
        for name in ("state_matrix", "noise_matrix", "offset", "initial"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.mode == "markovian":
            if self.memory_grid.dim != self.info_dim:
                raise ValueError(f"Markovian information of dimension {self.info_dim} needs a "
                                 f"memory grid of the same dimension, got {self.memory_grid.dim}")
            if self.initial.shape != (self.info_dim,):
                raise ValueError("Markovian information needs an initial value y_{-1}")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"y{k}" for k in range(self.info_dim)))

    @property
    def horizon(self) -> int:
        """Number of stages the maps are given for."""
        return self.offset.shape[0]

    @property
    def info_dim(self) -> int:
        """Dimension p of y_t."""
        return self.offset.shape[1]

    @property
    def memory_dim(self) -> int:
        """Dimension of the memory carried by a priced subproblem."""
        return self.info_dim if self.mode == "markovian" else 0

    def info(self, t: int, memory: np.ndarray, w: np.ndarray) -> np.ndarray:
        """y_t (B, p) from the memory y_{t-1} (B, memory_dim) and the noise w_t (B, q)."""
        out = apply_matrix(self.noise_matrix[t], w) + self.offset[t]
        if self.mode == "markovian":
            out = out + apply_matrix(self.state_matrix[t], memory)
        return out

    def next_memory(self, t: int, memory: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Memory handed to stage t + 1."""
        if self.mode != "markovian":
            return memory[:, :0]
        return self.info(t, memory, w)

    def memory_trajectory(self, noise: np.ndarray) -> np.ndarray:
        """Memories (S, T, memory_dim) along scenarios given as noise paths (S, T, q)."""
        count, horizon = noise.shape[0], noise.shape[1]
        out = np.zeros((count, horizon, self.memory_dim))
        memory = np.broadcast_to(self.initial[:self.memory_dim], (count, self.memory_dim)).copy()
        for t in range(horizon):
            out[:, t] = memory
            memory = self.next_memory(t, memory, noise[:, t])
        return out

    def values(self, noise: np.ndarray) -> np.ndarray:
        """Information values y_t (S, T, p) along scenarios given as noise paths (S, T, q)."""
        memories = self.memory_trajectory(noise)
        return np.stack([self.info(t, memories[:, t], noise[:, t])
                         for t in range(noise.shape[1])], axis=1)


def constant_information(horizon: int, noise_dim: int) -> InformationSpec:
    """Minimal information: the price is approximated by its expectation at every stage."""
    return InformationSpec("constant", np.zeros((horizon, 0, 0)),
                           np.zeros((horizon, 0, noise_dim)), np.zeros((horizon, 0)),
                           Grid.empty(), np.zeros(0), ())


def noise_information(noise: NoiseModel,
                      selection: Union[str, Sequence[str]] = "noise") -> InformationSpec:
    """y_t made of selected coordinates of the current noise.

    ``"noise"`` (or ``"all"``) selects every coordinate (maximal memoryless information);
    a name or list of names selects those coordinates.
    """
    if isinstance(selection, str):
        selection = list(noise.names) if selection in ("noise", "all") else [selection]
    coordinates = [noise.coordinate(name) for name in selection]
    picker = np.zeros((len(coordinates), noise.dimension))
    for row, coordinate in enumerate(coordinates):
        picker[row, coordinate] = 1.0
    horizon = noise.horizon
    return InformationSpec("noise", np.zeros((horizon, len(coordinates), 0)),
                           np.broadcast_to(picker, (horizon, *picker.shape)).copy(),
                           np.zeros((horizon, len(coordinates))), Grid.empty(),
                           np.zeros(0), tuple(selection))


def markovian_information(state_matrix, noise_matrix, offset, memory_grid: Grid, initial,
                          names: Sequence[str] = ()) -> InformationSpec:
    """Affine Markovian information with per-stage coefficients."""
    return InformationSpec("markovian", state_matrix, noise_matrix, offset, memory_grid,
                           initial, tuple(names))


def _stage_levels(noise: NoiseModel, coordinate: int, t: int) -> Tuple[float, float, int]:
    """Lowest value, spacing and count of the equally spaced values of one coordinate."""
    values = np.unique(noise.supports[t][noise.probabilities[t] > 0, coordinate])
    if values.shape[0] == 1:
        return float(values[0]), 1.0, 1
    spacing = np.diff(values)
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        raise ValueError(f"Values of {noise.names[coordinate]} at stage {t} are not equally "
                         f"spaced; perfect-memory encoding needs equal spacing")
    return float(values[0]), float(spacing[0]), int(values.shape[0])


def perfect_memory_information(noise: NoiseModel,
                               coordinate: Optional[str] = None) -> InformationSpec:
    """y_t encodes the whole prefix of one noise coordinate as an integer.

    With K_t values at stage t, y_t = K_t · y_{t-1} + index of w_t, so two scenarios share
    y_t exactly when their prefixes up to t coincide. Combined with singleton bins this
    lets the projected price reproduce the scenario-wise multipliers.
    """
    if coordinate is None:
        varying = [k for k in range(noise.dimension)
                   if any(np.unique(support[:, k]).shape[0] > 1 for support in noise.supports)]
        if len(varying) != 1:
            raise ValueError("Name the noise coordinate to encode: "
                             f"{len(varying)} coordinates are random")
        index = varying[0]
    else:
        index = noise.coordinate(coordinate)
    horizon = noise.horizon
    state_matrix = np.zeros((horizon, 1, 1))
    noise_matrix = np.zeros((horizon, 1, noise.dimension))
    offset = np.zeros((horizon, 1))
    paths = 1
    largest = 0
    for t in range(horizon):
        lowest, spacing, count = _stage_levels(noise, index, t)
        state_matrix[t, 0, 0] = count
        noise_matrix[t, 0, index] = 1.0 / spacing
        offset[t, 0] = -lowest / spacing
        paths *= count
        if t <= horizon - 2:
            largest = paths - 1
    top = max(largest, 1)
    grid = Grid((np.arange(top + 1, dtype=float),))
    return InformationSpec("markovian", state_matrix, noise_matrix, offset, grid, np.zeros(1),
                           (f"{noise.names[index]}_path",))
