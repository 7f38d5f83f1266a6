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
"""State, information and control discretizations."""
import itertools
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from pydadp.model.problem import ProblemSpec, SubsystemSpec


@dataclass(frozen=True)
class Grid:
    """A tensor grid given by one strictly increasing breakpoint array per axis.

    A grid without axes has a single node and represents a stateless component.
    """

    axes: Tuple[np.ndarray, ...]

    def __post_init__(self):
        axes = tuple(np.asarray(axis, dtype=float).reshape(-1) for axis in self.axes)
        for k, axis in enumerate(axes):
            if axis.shape[0] < 2:
                raise ValueError(f"Grid axis {k} needs at least two breakpoints")
            if not np.all(np.isfinite(axis)):
                raise ValueError(f"Grid axis {k} has non-finite breakpoints")
            if np.any(np.diff(axis) <= 0):
                raise ValueError(f"Grid axis {k} breakpoints are not strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, lower: Sequence[float], upper: Sequence[float],
                counts: Sequence[int]) -> "Grid":
        """Evenly spaced breakpoints hitting both ends of the box exactly."""
        return cls(tuple(np.linspace(lo, hi, int(count))
                         for lo, hi, count in zip(lower, upper, counts)))

    @classmethod
    def empty(cls) -> "Grid":
        """The single-node grid of a stateless component."""
        return cls(())

    @property
    def dim(self) -> int:
        """Number of axes."""
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Node count per axis."""
        return tuple(axis.shape[0] for axis in self.axes)

    @property
    def size(self) -> int:
        """Total node count."""
        return int(np.prod(self.shape, dtype=np.int64)) if self.axes else 1

    @property
    def lower(self) -> np.ndarray:
        """Lower corner of the box."""
        return np.array([axis[0] for axis in self.axes])

    @property
    def upper(self) -> np.ndarray:
        """Upper corner of the box."""
        return np.array([axis[-1] for axis in self.axes])

    def nodes(self) -> np.ndarray:
        """All nodes, (size, dim), in C order of the axes."""
        if not self.axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([coordinate.reshape(-1) for coordinate in mesh], axis=1)

    def contains(self, points: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
        """Row mask of points inside the box."""
        if not self.axes:
            return np.ones(points.shape[0], dtype=bool)
        return np.all((points >= self.lower - tolerance) & (points <= self.upper + tolerance),
                      axis=1)

    def product(self, other: "Grid") -> "Grid":
        """The grid whose axes are this grid's followed by the other's."""
        return Grid(self.axes + other.axes)


def control_candidates(lower: Sequence[float], upper: Sequence[float],
                       counts: Sequence[int]) -> np.ndarray:
    """All points of a uniform control grid, (K, m), first coordinate varying slowest."""
    axes = [np.linspace(lo, hi, int(count)) if int(count) > 1 else np.array([lo])
            for lo, hi, count in zip(lower, upper, counts)]
    if not axes:
        return np.zeros((1, 0))
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(axes))


@dataclass(frozen=True)
class SubsystemGrid:
    """Discretization of one subsystem: state grid and control candidates (K, m)."""

    state_grid: Grid
    controls: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "controls", np.asarray(self.controls, dtype=float))

    def to_dict(self) -> Dict[str, Any]:
        """Serializes the discretization of one subsystem."""
        return {"state_axes": [axis.tolist() for axis in self.state_grid.axes],
                "controls": self.controls.tolist()}


def _box(sub: SubsystemSpec, kind: str, box: Optional[Tuple[Sequence[float], Sequence[float]]]):
    if box is not None:
        return np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    if kind == "state":
        lower, upper = np.min(sub.state_lower, axis=0), np.max(sub.state_upper, axis=0)
    else:
        lower, upper = np.min(sub.control_lower, axis=0), np.max(sub.control_upper, axis=0)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError(f"Subsystem {sub.name} has unbounded {kind}s; "
                         f"supply a {kind} box for its grid")
    return lower, upper


def uniform_subsystem_grid(sub: SubsystemSpec, state_nodes: int, control_nodes: int,
                           state_box=None, control_box=None) -> SubsystemGrid:
    """Uniform grids over the envelope of the stage-wise bounds (or over a given box)."""
    if sub.state_dim:
        lower, upper = _box(sub, "state", state_box)
        state_grid = Grid.uniform(lower, upper, [state_nodes] * sub.state_dim)
    else:
        state_grid = Grid.empty()
    lower, upper = _box(sub, "control", control_box)
    controls = control_candidates(lower, upper, [control_nodes] * sub.control_dim)
    return SubsystemGrid(state_grid, controls)


class Discretization(tuple):
    """One SubsystemGrid per subsystem, in subsystem order."""

    @classmethod
    def uniform(cls, spec: ProblemSpec, state_nodes, control_nodes,
                state_boxes: Optional[Dict[int, Any]] = None,
                control_boxes: Optional[Dict[int, Any]] = None) -> "Discretization":
        """Uniform grids; node counts are given once or per subsystem."""
        state_boxes = state_boxes or {}
        control_boxes = control_boxes or {}
        size = spec.size
        state_nodes = _per_unit(state_nodes, size, "state_nodes")
        control_nodes = _per_unit(control_nodes, size, "control_nodes")
        return cls(uniform_subsystem_grid(sub, state_nodes[i], control_nodes[i],
                                          state_boxes.get(i), control_boxes.get(i))
                   for i, sub in enumerate(spec.subsystems))

    @classmethod
    def from_dict(cls, spec: ProblemSpec, data: Dict[str, Any]) -> "Discretization":
        """Reads the ``discretization`` section of a problem file.

        Either explicit ``units`` (state axes and control candidates per subsystem) or
        ``state_nodes``/``control_nodes`` with optional ``state_boxes``/``control_boxes``.
        """
        if "units" in data:
            return cls(SubsystemGrid(Grid(tuple(unit["state_axes"])),
                                     np.asarray(unit["controls"], dtype=float)
                                     .reshape(-1, sub.control_dim))
                       for unit, sub in zip(data["units"], spec.subsystems))
        return cls.uniform(spec, data.get("state_nodes", 21), data.get("control_nodes", 13),
                           {int(k): v for k, v in data.get("state_boxes", {}).items()},
                           {int(k): v for k, v in data.get("control_boxes", {}).items()})

    def to_dict(self) -> Dict[str, Any]:
        """Serializes as explicit per-unit axes and candidates."""
        return {"units": [unit.to_dict() for unit in self]}


def _per_unit(value, size: int, name: str):
    if isinstance(value, (list, tuple)):
        if len(value) != size:
            raise ValueError(f"{name} lists {len(value)} entries for {size} subsystems")
        return [int(entry) for entry in value]
    return [int(value)] * size
