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
"""The closed catalog of evaluable mappings a subsystem is built from.

Every entry is a frozen dataclass of coefficient arrays and is serialized by its
``kind`` plus those arrays. Coefficients may carry a leading stage axis, in which case
stage ``t`` reads slice ``t``.

All mappings are evaluated on batches ``x (B, n)``, ``u (B, m)``, ``w (B, q)``. The small
dimensions are looped over explicitly so that the value computed for a row never depends
on the batch it was evaluated in; the dynamic programming solver and the scenario-tree
oracle rely on this to agree bit for bit.
"""
from dataclasses import dataclass, field, fields
from typing import Any, ClassVar, Dict, List, Optional, Tuple

import numpy as np


def _coefficient(array: np.ndarray, t: int, base_ndim: int) -> np.ndarray:
    """Returns the stage slice of a coefficient if it carries a stage axis."""
    if array.ndim > base_ndim:
        return array[t]
    return array


def _accumulate(out: np.ndarray, matrix: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Adds ``values @ matrix.T`` to ``out``, one column at a time."""
    for j in range(matrix.shape[1]):
        out = out + values[:, j:j + 1] * matrix[:, j]
    return out


def _as_shape(array: Any, shape: Tuple[int, ...]) -> np.ndarray:
    """Converts a serialized array, restoring the shape of empty ones."""
    array = np.asarray(array, dtype=float)
    if array.size == 0:
        return np.zeros(shape)
    return array


def _shape_error(name: str, array: np.ndarray, shape: Tuple[int, ...],
                 horizon: Optional[int]) -> List[str]:
    allowed = [shape]
    if horizon is not None:
        allowed.append((horizon, *shape))
    if array.shape in allowed:
        return []
    return [f"{name} has shape {array.shape}, expected {shape}"]


def _to_lists(entry) -> Dict[str, Any]:
    serialized: Dict[str, Any] = {"kind": entry.kind}
    for entry_field in fields(entry):
        value = getattr(entry, entry_field.name)
        serialized[entry_field.name] = value.tolist() if isinstance(value, np.ndarray) else value
    return serialized


@dataclass(frozen=True)
class _AffineMap:
    """out = state_matrix x + control_matrix u + noise_matrix w + offset"""

    state_matrix: np.ndarray
    control_matrix: np.ndarray
    noise_matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        for entry_field in fields(self):
            object.__setattr__(self, entry_field.name,
                               np.asarray(getattr(self, entry_field.name), dtype=float))

    @property
    def output_dim(self) -> int:
        """Number of rows of the map."""
        return self.offset.shape[-1]

    def __call__(self, t: int, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        state_matrix, control_matrix, noise_matrix, offset = self.affine_form(t)
        out = np.zeros((x.shape[0], offset.shape[0]))
        out = _accumulate(out, state_matrix, x)
        out = _accumulate(out, control_matrix, u)
        out = _accumulate(out, noise_matrix, w)
        return out + offset

    def affine_form(self, t: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """The stage-t coefficients (state, control, noise, offset)."""
        return (_coefficient(self.state_matrix, t, 2),
                _coefficient(self.control_matrix, t, 2),
                _coefficient(self.noise_matrix, t, 2),
                _coefficient(self.offset, t, 1))

    def check_shapes(self, rows: int, n: int, m: int, q: int, horizon: int) -> List[str]:
        """Lists the coefficient arrays whose shapes do not fit the subsystem."""
        return (_shape_error("state_matrix", self.state_matrix, (rows, n), horizon)
                + _shape_error("control_matrix", self.control_matrix, (rows, m), horizon)
                + _shape_error("noise_matrix", self.noise_matrix, (rows, q), horizon)
                + _shape_error("offset", self.offset, (rows,), horizon))

    def to_dict(self) -> Dict[str, Any]:
        """Serializes the entry by kind and coefficients."""
        return _to_lists(self)


@dataclass(frozen=True)
class AffineDynamics(_AffineMap):
    """Affine state transition x' = A x + B u + E w + c"""

    kind: ClassVar[str] = "affine_dynamics"

    @classmethod
    def from_dict(cls, entry: Dict[str, Any], n: int, m: int, q: int) -> "AffineDynamics":
        """Builds the entry from its serialized form."""
        return cls(state_matrix=_as_shape(entry["state_matrix"], (n, n)),
                   control_matrix=_as_shape(entry["control_matrix"], (n, m)),
                   noise_matrix=_as_shape(entry["noise_matrix"], (n, q)),
                   offset=_as_shape(entry.get("offset", np.zeros(n)), (n,)))


@dataclass(frozen=True)
class AffineCoupling(_AffineMap):
    """Affine coupling contribution g = Gx x + Gu u + Gw w + g0"""

    kind: ClassVar[str] = "affine_coupling"

    @classmethod
    def from_dict(cls, entry: Dict[str, Any], n: int, m: int, q: int) -> "AffineCoupling":
        """Builds the entry from its serialized form."""
        rows = len(entry["offset"]) if "offset" in entry else len(entry["control_matrix"])
        return cls(state_matrix=_as_shape(entry.get("state_matrix", []), (rows, n)),
                   control_matrix=_as_shape(entry["control_matrix"], (rows, m)),
                   noise_matrix=_as_shape(entry.get("noise_matrix", []), (rows, q)),
                   offset=_as_shape(entry.get("offset", np.zeros(rows)), (rows,)))

    def fold_demand(self, coordinate: int, row: int = 0) -> "AffineCoupling":
        """Subtracts the noise coordinate from one coupling row (demand folding)."""
        noise_matrix = self.noise_matrix.copy()
        noise_matrix[..., row, coordinate] -= 1.0
        return AffineCoupling(self.state_matrix, self.control_matrix, noise_matrix, self.offset)


@dataclass(frozen=True)
class QuadraticCost:
    """Quadratic cost in z = [x; u]: ½ zᵀHz · s(w) + hᵀz + const.

    When ``scale_coordinate`` is set, the quadratic part is multiplied by that noise
    coordinate (a random cost coefficient). A final cost uses ``m = 0``.
    """

    kind: ClassVar[str] = "quadratic_cost"

    hessian: np.ndarray
    linear: np.ndarray
    constant: np.ndarray = field(default_factory=lambda: np.zeros(()))
    scale_coordinate: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "hessian", np.asarray(self.hessian, dtype=float))
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        object.__setattr__(self, "constant", np.asarray(self.constant, dtype=float))

    def __call__(self, t: int, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        hessian, linear, constant, scale_coordinate = self.quadratic_form(t)
        z = np.concatenate([x, u], axis=1)
        quadratic = np.zeros(z.shape[0])
        for i in range(hessian.shape[0]):
            for j in range(hessian.shape[1]):
                if hessian[i, j] != 0.0:
                    quadratic = quadratic + (0.5 * hessian[i, j]) * z[:, i] * z[:, j]
        if scale_coordinate is not None:
            quadratic = quadratic * w[:, scale_coordinate]
        affine = np.zeros(z.shape[0])
        for i in range(linear.shape[0]):
            if linear[i] != 0.0:
                affine = affine + linear[i] * z[:, i]
        return quadratic + affine + constant

    def quadratic_form(self, t: int) -> Tuple[np.ndarray, np.ndarray, float, Optional[int]]:
        """The stage-t (hessian, linear, constant, scale coordinate)."""
        return (_coefficient(self.hessian, t, 2),
                _coefficient(self.linear, t, 1),
                float(_coefficient(self.constant, t, 0)),
                self.scale_coordinate)

    def check_shapes(self, size: int, q: int, horizon: Optional[int]) -> List[str]:
        """Lists the coefficient arrays whose shapes do not fit ``z`` of length size."""
        errors = (_shape_error("hessian", self.hessian, (size, size), horizon)
                  + _shape_error("linear", self.linear, (size,), horizon)
                  + _shape_error("constant", self.constant, (), horizon))
        if self.scale_coordinate is not None and not 0 <= self.scale_coordinate < q:
            errors.append(f"scale_coordinate {self.scale_coordinate} is not a noise coordinate")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """Serializes the entry by kind and coefficients."""
        return _to_lists(self)

    @classmethod
    def from_dict(cls, entry: Dict[str, Any], size: int) -> "QuadraticCost":
        """Builds the entry from its serialized form."""
        return cls(hessian=_as_shape(entry["hessian"], (size, size)),
                   linear=_as_shape(entry.get("linear", np.zeros(size)), (size,)),
                   constant=np.asarray(entry.get("constant", 0.0), dtype=float),
                   scale_coordinate=entry.get("scale_coordinate"))


@dataclass(frozen=True)
class PiecewiseLinearCost:
    """Convex piecewise-linear cost max_p (slopes_p · z + intercepts_p) in z = [x; u]"""

    kind: ClassVar[str] = "piecewise_linear_cost"

    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "slopes", np.asarray(self.slopes, dtype=float))
        object.__setattr__(self, "intercepts", np.asarray(self.intercepts, dtype=float))

    def __call__(self, t: int, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        slopes = _coefficient(self.slopes, t, 2)
        intercepts = _coefficient(self.intercepts, t, 1)
        z = np.concatenate([x, u], axis=1)
        out = np.full(z.shape[0], -np.inf)
        for piece in range(slopes.shape[0]):
            value = np.full(z.shape[0], intercepts[piece])
            for i in range(slopes.shape[1]):
                value = value + slopes[piece, i] * z[:, i]
            out = np.maximum(out, value)
        return out

    def quadratic_form(self, t: int):
        """Piecewise-linear costs have no quadratic form."""
        raise NotImplementedError("piecewise linear costs have no quadratic form")

    def check_shapes(self, size: int, q: int, horizon: Optional[int]) -> List[str]:
        """Lists the coefficient arrays whose shapes do not fit ``z`` of length size."""
        pieces = self.intercepts.shape[-1] if self.intercepts.ndim else 0
        errors = (_shape_error("slopes", self.slopes, (pieces, size), horizon)
                  + _shape_error("intercepts", self.intercepts, (pieces,), horizon))
        if pieces == 0:
            errors.append("piecewise linear cost needs at least one piece")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """Serializes the entry by kind and coefficients."""
        return _to_lists(self)

    @classmethod
    def from_dict(cls, entry: Dict[str, Any], size: int) -> "PiecewiseLinearCost":
        """Builds the entry from its serialized form."""
        intercepts = np.asarray(entry["intercepts"], dtype=float)
        return cls(slopes=_as_shape(entry["slopes"], (intercepts.shape[-1], size)),
                   intercepts=intercepts)


COSTS = {QuadraticCost.kind: QuadraticCost, PiecewiseLinearCost.kind: PiecewiseLinearCost}


def cost_from_dict(entry: Dict[str, Any], size: int):
    """Looks a cost entry up in the catalog by its kind."""
    kind = entry.get("kind")
    if kind not in COSTS:
        raise ValueError(f"Unknown cost kind '{kind}', expected one of {sorted(COSTS)}")
    return COSTS[kind].from_dict(entry, size)


def quadratic_final_cost(weight: float, target: np.ndarray, constant: float = 0.0) -> QuadraticCost:
    """weight · |x − target|² + constant as a catalog entry."""
    target = np.asarray(target, dtype=float)
    size = target.shape[0]
    return QuadraticCost(hessian=2.0 * weight * np.eye(size),
                         linear=-2.0 * weight * target,
                         constant=np.asarray(weight * float(target @ target) + constant))


def apply_matrix(matrix: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``values @ matrix.T`` on a batch, with the same row-wise arithmetic as the catalog."""
    return _accumulate(np.zeros((values.shape[0], matrix.shape[0])), matrix, values)
