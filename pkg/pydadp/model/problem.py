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
"""Decomposable stochastic optimal control problems with finite-support noise."""
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from pydadp.model.catalog import AffineCoupling, AffineDynamics, QuadraticCost


@dataclass(frozen=True)
class Marginal:
    """A finite distribution of one scalar noise coordinate."""

    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(-1))
        object.__setattr__(self, "probabilities",
                           np.asarray(self.probabilities, dtype=float).reshape(-1))

    @classmethod
    def uniform(cls, values: Sequence[float]) -> "Marginal":
        """Equal probability on every value."""
        values = np.asarray(values, dtype=float)
        return cls(values, np.full(values.shape[0], 1.0 / values.shape[0]))

    @classmethod
    def point(cls, value: float) -> "Marginal":
        """A degenerate distribution."""
        return cls([value], [1.0])

    def mean(self) -> float:
        """Expectation of the coordinate."""
        return float(self.probabilities @ self.values)

    def variance(self) -> float:
        """Variance of the coordinate."""
        return float(self.probabilities @ (self.values - self.mean()) ** 2)


def product_support(marginals: Sequence[Marginal]) -> Tuple[np.ndarray, np.ndarray]:
    """Joint support of independent coordinates, first coordinate varying slowest."""
    points = []
    probabilities = []
    for combination in itertools.product(*(range(len(m.values)) for m in marginals)):
        points.append([marginal.values[k] for marginal, k in zip(marginals, combination)])
        probability = 1.0
        for marginal, k in zip(marginals, combination):
            probability *= marginal.probabilities[k]
        probabilities.append(probability)
    return (np.asarray(points, dtype=float).reshape(len(points), len(marginals)),
            np.asarray(probabilities))


@dataclass(frozen=True)
class NoiseModel:
    """Stage-wise independent noise with a finite support at every stage.

    ``partition[k]`` is ``None`` for a global coordinate (demand-like) or the index of the
    subsystem the coordinate is local to.
    """

    supports: Tuple[np.ndarray, ...]
    probabilities: Tuple[np.ndarray, ...]
    names: Tuple[str, ...]
    partition: Tuple[Optional[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "supports", tuple(
            np.asarray(support, dtype=float).reshape(len(support), len(self.names))
            for support in self.supports))
        object.__setattr__(self, "probabilities", tuple(
            np.asarray(probabilities, dtype=float).reshape(-1)
            for probabilities in self.probabilities))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "partition", tuple(self.partition))

    @classmethod
    def from_marginals(cls,
                       stages: Sequence[Sequence[Marginal]],
                       names: Sequence[str],
                       partition: Sequence[Optional[int]]) -> "NoiseModel":
        """Builds every stage support as the product of independent marginals."""
        supports, probabilities = zip(*(product_support(marginals) for marginals in stages))
        return cls(tuple(supports), tuple(probabilities), tuple(names), tuple(partition))

    @property
    def horizon(self) -> int:
        """Number of stages T."""
        return len(self.supports)

    @property
    def dimension(self) -> int:
        """Number of noise coordinates q."""
        return len(self.names)

    def coordinate(self, name: str) -> int:
        """Index of a named coordinate."""
        try:
            return self.names.index(name)
        except ValueError as exc:
            raise ValueError(f"Unknown noise coordinate '{name}', "
                             f"available: {', '.join(self.names)}") from exc

    def mean(self, t: int) -> np.ndarray:
        """Expectation of w_t."""
        return self.probabilities[t] @ self.supports[t]

    def variance(self, t: int) -> np.ndarray:
        """Coordinate-wise variance of w_t."""
        return self.probabilities[t] @ (self.supports[t] - self.mean(t)) ** 2

    def local_coordinates(self, unit: int) -> Tuple[int, ...]:
        """Coordinates marked local to a subsystem."""
        return tuple(k for k, owner in enumerate(self.partition) if owner == unit)

    def global_coordinates(self) -> Tuple[int, ...]:
        """Coordinates shared by every subsystem."""
        return tuple(k for k, owner in enumerate(self.partition) if owner is None)

    def to_dict(self) -> dict:
        """Serializes the noise section of a problem file."""
        return {
            "names": list(self.names),
            "partition": list(self.partition),
            "stages": [{"support": support.tolist(), "probabilities": probabilities.tolist()}
                       for support, probabilities in zip(self.supports, self.probabilities)],
        }


def stage_bounds(value, rows: int, dim: int, fill: float) -> np.ndarray:
    """Broadcasts a bound given per stage, once for all stages or not at all."""
    if value is None:
        return np.full((rows, dim), fill)
    # frompyfunc returns a bare Python scalar for 0-d input
    array = np.asarray(np.frompyfunc(lambda entry: fill if entry is None else entry, 1, 1)(
        np.array(value, dtype=object)), dtype=float)
    if array.ndim <= 1:
        return np.broadcast_to(array, (rows, dim)).copy()
    return array


@dataclass(frozen=True)
class SubsystemSpec:
    """One unit of the decomposable problem.

    State bounds are stored per stage 0..T (shape ``(T + 1, n)``), control bounds per
    stage 0..T-1 (shape ``(T, m)``); ``±inf`` marks an unbounded coordinate.
    """

    name: str
    x0: np.ndarray
    dynamics: AffineDynamics
    stage_cost: QuadraticCost
    final_cost: QuadraticCost
    coupling: AffineCoupling
    state_lower: np.ndarray
    state_upper: np.ndarray
    control_lower: np.ndarray
    control_upper: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("x0", "state_lower", "state_upper", "control_lower", "control_upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def state_dim(self) -> int:
        """n_i"""
        return self.x0.shape[0]

    @property
    def control_dim(self) -> int:
        """m_i"""
        return self.control_lower.shape[-1]

    @property
    def coupling_dim(self) -> int:
        """Output dimension of the coupling map."""
        return self.coupling.output_dim

    def terminal(self, x: np.ndarray) -> np.ndarray:
        """K(x) on a batch of states."""
        return self.final_cost(0, x, x[:, :0], x[:, :0])

    def controls_within(self, t: int, u: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
        """Row mask of controls inside the stage-t control bounds."""
        return within(u, self.control_lower[t], self.control_upper[t], tolerance)

    def states_within(self, t: int, x: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
        """Row mask of states inside the stage-t state bounds."""
        return within(x, self.state_lower[t], self.state_upper[t], tolerance)


def within(values: np.ndarray, lower: np.ndarray, upper: np.ndarray,
           tolerance: float = 0.0) -> np.ndarray:
    """Row mask of a batch lying inside a box, up to a tolerance."""
    return np.all((values >= lower - tolerance) & (values <= upper + tolerance), axis=1)


@dataclass(frozen=True)
class ProblemSpec:
    """Subsystems coupled stage-wise by Σ_i g_t^i(x_t^i, u_t^i, w_t) = 0."""

    subsystems: Tuple[SubsystemSpec, ...]
    noise: NoiseModel
    coupling_dim: int
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))

    @property
    def horizon(self) -> int:
        """Number of stages T."""
        return self.noise.horizon

    @property
    def size(self) -> int:
        """Number of subsystems N."""
        return len(self.subsystems)

    def unit_index(self, name_or_index) -> int:
        """Resolves a subsystem given by name or index."""
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < self.size:
                raise ValueError(f"There is no subsystem {name_or_index} in {self.name}")
            return int(name_or_index)
        names = [sub.name for sub in self.subsystems]
        if name_or_index in names:
            return names.index(name_or_index)
        if str(name_or_index).isdigit():
            return self.unit_index(int(name_or_index))
        raise ValueError(f"Unknown subsystem '{name_or_index}', available: {', '.join(names)}")


def coupling_inverse(sub: SubsystemSpec, t: int) -> np.ndarray:
    """Inverse of the control block of a subsystem's coupling at stage t.

    Raises ValueError unless the block is square and invertible, i.e. unless the unit can
    act as the slack of the coupling constraint.
    """
    control_matrix = sub.coupling.affine_form(t)[1]
    if control_matrix.shape[0] != control_matrix.shape[1] \
            or np.linalg.matrix_rank(control_matrix) < control_matrix.shape[0]:
        raise ValueError(f"Subsystem {sub.name} cannot be the slack unit: its coupling is "
                         f"not invertible in its control at stage {t}")
    return np.linalg.inv(control_matrix)
