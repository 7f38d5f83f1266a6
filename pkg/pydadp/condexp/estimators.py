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
"""Conditional-expectation estimators E[λ_t | y_t] fitted on per-scenario samples.

Three kinds are available: ``constant`` (the sample mean), ``binned`` (empirical means on
a tensor partition of the information space, an orthogonal projection onto bin-measurable
functions) and ``kernel`` (Nadaraya-Watson regression with a product Gaussian kernel).
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import softmax

from pydadp.exceptions import DevianceUndefined, NonFiniteValue

logger = logging.getLogger(__name__)  # pylint: disable=C0103

KERNEL_CHUNK = 4096
KINDS = ("constant", "binned", "kernel")


@dataclass(frozen=True)
class SampleTable:
    """Rows (y_s, λ_s) for one stage; optional probability weights per row."""

    info: np.ndarray
    targets: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        info = np.asarray(self.info, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "info", info.reshape(-1, 1) if info.ndim == 1 else info)
        object.__setattr__(self, "targets",
                           targets.reshape(-1, 1) if targets.ndim == 1 else targets)
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def rows(self) -> int:
        """Number of samples."""
        return self.targets.shape[0]

    def check(self):
        """Raises on an empty table, inconsistent shapes or non-finite entries."""
        if self.rows == 0:
            raise ValueError("The sample table is empty")
        if self.info.shape[0] != self.rows:
            raise ValueError(f"The sample table has {self.info.shape[0]} info rows "
                             f"for {self.rows} targets")
        for name, array in (("info", self.info), ("target", self.targets)):
            bad = np.flatnonzero(~np.all(np.isfinite(array), axis=1))
            if bad.size:
                raise NonFiniteValue(f"Non-finite {name} sample at row {bad[0]}")
        if self.weights is not None and (self.weights.shape != (self.rows,)
                                         or np.any(self.weights < 0)):
            raise ValueError("Sample weights must be one nonnegative number per row")


def weighted_mean(values: np.ndarray, weights: Optional[np.ndarray]) -> np.ndarray:
    """Column means; equal weights use the plain mean so repeated fits agree exactly."""
    if weights is None or np.all(weights == weights[0]):
        return values.mean(axis=0)
    return np.average(values, axis=0, weights=weights)


class Estimator(ABC):
    """A fitted conditional-mean model, immutable after fit."""

    kind = "base"
    info_dim: int
    target_dim: int

    @abstractmethod
    def _predict(self, info: np.ndarray) -> np.ndarray:
        """Predictions for a batch of info values (B, p)."""

    def predict_many(self, info: np.ndarray) -> np.ndarray:
        """Predictions (B, d) for a batch of info values (B, p)."""
        info = np.asarray(info, dtype=float)
        if info.ndim != 2 or info.shape[1] != self.info_dim:
            raise ValueError(f"Info values have shape {info.shape}, "
                             f"the estimator was fitted on dimension {self.info_dim}")
        return self._predict(info)

    @property
    def empty_bins(self) -> int:
        """Number of bins answered by the global-mean fallback."""
        return 0

    @abstractmethod
    def to_frame(self) -> pd.DataFrame:
        """Fitted parameters for audit."""


@dataclass(frozen=True)
class ConstantEstimator(Estimator):
    """Predicts the sample mean whatever the information."""

    mean: np.ndarray
    info_dim: int = 0
    kind = "constant"

    @property
    def target_dim(self) -> int:  # type: ignore[override]
        return self.mean.shape[0]

    def _predict(self, info: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.mean, (info.shape[0], self.mean.shape[0])).copy()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{"parameter": "mean",
                              **{f"target_{j}": value for j, value in enumerate(self.mean)}}])


@dataclass(frozen=True)
class BinnedEstimator(Estimator):
    """Per-bin empirical means on a tensor partition given by edges per info dimension.

    Points outside the outer edges belong to the first or last bin; empty bins predict the
    global mean.
    """

    edges: Tuple[np.ndarray, ...]
    bin_ids: np.ndarray
    means: np.ndarray
    counts: np.ndarray
    global_mean: np.ndarray
    kind = "binned"

    @property
    def info_dim(self) -> int:  # type: ignore[override]
        return len(self.edges)

    @property
    def target_dim(self) -> int:  # type: ignore[override]
        return self.global_mean.shape[0]

    @property
    def bins_per_dim(self) -> Tuple[int, ...]:
        """Number of bins along each info dimension."""
        return tuple(edge.shape[0] - 1 for edge in self.edges)

    @property
    def empty_bins(self) -> int:
        return int(np.prod(self.bins_per_dim, dtype=np.int64)) - self.bin_ids.shape[0]

    def bin_index(self, info: np.ndarray) -> np.ndarray:
        """Flat bin id of every row."""
        if not self.edges:
            return np.zeros(info.shape[0], dtype=np.int64)
        per_dim = tuple(np.searchsorted(edge[1:-1], info[:, k], side="right")
                        for k, edge in enumerate(self.edges))
        return np.ravel_multi_index(per_dim, self.bins_per_dim)

    def _predict(self, info: np.ndarray) -> np.ndarray:
        ids = self.bin_index(info)
        positions = np.clip(np.searchsorted(self.bin_ids, ids), 0, self.bin_ids.shape[0] - 1)
        found = self.bin_ids[positions] == ids
        return np.where(found[:, None], self.means[positions], self.global_mean)

    def to_frame(self) -> pd.DataFrame:
        rows = [{"bin_id": "global", "count": int(self.counts.sum()),
                 **{f"target_{j}": value for j, value in enumerate(self.global_mean)}}]
        for bin_id, count, mean in zip(self.bin_ids, self.counts, self.means):
            rows.append({"bin_id": int(bin_id), "count": int(count),
                         **{f"target_{j}": value for j, value in enumerate(mean)}})
        return pd.DataFrame(rows)


@dataclass(frozen=True)
class KernelEstimator(Estimator):
    """Nadaraya-Watson regression with a product Gaussian kernel."""

    info: np.ndarray
    targets: np.ndarray
    log_weights: np.ndarray
    bandwidth: np.ndarray
    kind = "kernel"

    @property
    def info_dim(self) -> int:  # type: ignore[override]
        return self.info.shape[1]

    @property
    def target_dim(self) -> int:  # type: ignore[override]
        return self.targets.shape[1]

    def kernel_weights(self, info: np.ndarray) -> np.ndarray:
        """Normalized kernel weights (B, S) of the samples at every query."""
        scaled = (info[:, None, :] - self.info[None, :, :]) / self.bandwidth
        return softmax(-0.5 * np.sum(scaled ** 2, axis=2) + self.log_weights, axis=1)

    def _predict(self, info: np.ndarray) -> np.ndarray:
        out = np.empty((info.shape[0], self.target_dim))
        for start in range(0, info.shape[0], KERNEL_CHUNK):
            rows = slice(start, start + KERNEL_CHUNK)
            out[rows] = self.kernel_weights(info[rows]) @ self.targets
        return out

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.info, columns=[f"y_{k}" for k in range(self.info_dim)])
        for j in range(self.target_dim):
            frame[f"target_{j}"] = self.targets[:, j]
        frame["log_weight"] = self.log_weights
        for k, width in enumerate(self.bandwidth):
            frame[f"bandwidth_{k}"] = width
        frame.insert(0, "sample_id", np.arange(frame.shape[0]))
        return frame


def equal_width_edges(values: np.ndarray, bins: int) -> np.ndarray:
    """``bins`` equal-width bins spanning the sample range."""
    if bins < 1:
        raise ValueError("A binned estimator needs at least one bin per dimension")
    lower, upper = float(np.min(values)), float(np.max(values))
    if lower == upper:
        lower, upper = lower - 0.5, upper + 0.5
    return np.linspace(lower, upper, bins + 1)


def singleton_edges(info: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Edges giving every distinct value of every info dimension a bin of its own."""
    edges = []
    for column in np.asarray(info, dtype=float).reshape(info.shape[0], -1).T:
        distinct = np.unique(column)
        middles = (distinct[:-1] + distinct[1:]) / 2.0
        edges.append(np.concatenate([[distinct[0] - 1.0], middles, [distinct[-1] + 1.0]]))
    return tuple(edges)


def _fit_binned(samples: SampleTable, bins: Union[int, Sequence[int]], edges) -> BinnedEstimator:
    info_dim = samples.info.shape[1]
    if isinstance(edges, str):
        if edges != "singleton":
            raise ValueError(f"Unknown edge rule '{edges}', expected 'singleton' or arrays")
        edges = singleton_edges(samples.info)
    elif edges is not None:
        edges = tuple(np.asarray(edge, dtype=float) for edge in edges)
        if len(edges) != info_dim:
            raise ValueError(f"{len(edges)} edge arrays for {info_dim} info dimensions")
        for k, edge in enumerate(edges):
            if edge.shape[0] < 2 or np.any(np.diff(edge) <= 0):
                raise ValueError(f"Bin edges of dimension {k} are not strictly increasing")
    else:
        counts = [bins] * info_dim if isinstance(bins, (int, np.integer)) else list(bins)
        edges = tuple(equal_width_edges(samples.info[:, k], int(counts[k]))
                      for k in range(info_dim))
    global_mean = weighted_mean(samples.targets, samples.weights)
    estimator = BinnedEstimator(edges, np.zeros(0, dtype=np.int64),
                                np.zeros((0, samples.targets.shape[1])),
                                np.zeros(0, dtype=np.int64), global_mean)
    ids = estimator.bin_index(samples.info)
    bin_ids = np.unique(ids)
    means = np.empty((bin_ids.shape[0], samples.targets.shape[1]))
    counts = np.empty(bin_ids.shape[0], dtype=np.int64)
    for position, bin_id in enumerate(bin_ids):
        members = ids == bin_id
        weights = None if samples.weights is None else samples.weights[members]
        means[position] = weighted_mean(samples.targets[members], weights)
        counts[position] = int(members.sum())
    return BinnedEstimator(edges, bin_ids, means, counts, global_mean)


def default_bandwidth(info: np.ndarray) -> np.ndarray:
    """Sample standard deviation times S^(-1/5) per dimension; 1 for a constant column."""
    spread = np.std(info, axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    return spread * info.shape[0] ** (-0.2)


def _fit_kernel(samples: SampleTable, bandwidth) -> KernelEstimator:
    if bandwidth is None:
        bandwidth = default_bandwidth(samples.info)
    bandwidth = np.broadcast_to(np.asarray(bandwidth, dtype=float),
                                (samples.info.shape[1],)).copy()
    if np.any(bandwidth <= 0):
        raise ValueError("Kernel bandwidths must be positive")
    if samples.weights is None:
        log_weights = np.zeros(samples.rows)
    else:
        with np.errstate(divide="ignore"):
            log_weights = np.log(samples.weights / samples.weights.sum())
    return KernelEstimator(samples.info.copy(), samples.targets.copy(), log_weights, bandwidth)


def fit_estimator(samples: SampleTable, kind: str = "constant", bins=10, edges=None,
                  bandwidth=None) -> Estimator:
    """Fits an estimator of the given kind.

    Args:
        samples: the (y, λ) rows of one stage.
        kind: ``constant``, ``binned`` or ``kernel``.
        bins: bin count (once or per dimension) for equal-width binning.
        edges: explicit edges per dimension, or ``"singleton"`` for one bin per distinct value.
        bandwidth: kernel bandwidth, scalar or per dimension; defaults to the rule of thumb.

    Returns:
        Estimator: the fitted estimator.
    """
    samples.check()
    if kind == "constant":
        return ConstantEstimator(weighted_mean(samples.targets, samples.weights),
                                 samples.info.shape[1])
    if kind == "binned":
        return _fit_binned(samples, bins, edges)
    if kind == "kernel":
        return _fit_kernel(samples, bandwidth)
    raise ValueError(f"Unknown estimator kind '{kind}', expected one of {KINDS}")


def predict(estimator: Estimator, y) -> np.ndarray:
    """E[λ | y] for a single info vector."""
    return estimator.predict_many(np.asarray(y, dtype=float).reshape(1, -1))[0]


def deviance(estimator: Estimator, samples: SampleTable) -> float:
    """1 − SSE(estimator) / SSE(mean): 0 for the mean predictor, 1 for an exact one."""
    samples.check()
    if samples.rows < 2:
        raise DevianceUndefined("Deviance undefined: at least two samples are needed")
    predictions = estimator.predict_many(samples.info)
    mean = weighted_mean(samples.targets, samples.weights)
    row_weights = np.ones(samples.rows) if samples.weights is None else samples.weights
    residual = np.sum(row_weights[:, None] * (samples.targets - predictions) ** 2)
    total = np.sum(row_weights[:, None] * (samples.targets - mean) ** 2)
    if total == 0.0:
        raise DevianceUndefined("Deviance undefined: the targets have zero variance")
    deviance_value = 1.0 - float(residual) / float(total)
    logger.debug("%s estimator deviance %.6f", estimator.kind, deviance_value)
    return deviance_value
