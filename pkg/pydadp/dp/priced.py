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
"""The price term λ̂_t(y) = E[λ_t | y_t = y] seen by a priced subproblem."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from pydadp.condexp.estimators import ConstantEstimator, Estimator


@dataclass(frozen=True)
class PricedTerm:
    """One fitted estimator per stage; every stage predicts the same number of prices."""

    estimators: Tuple[Estimator, ...]

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if not self.estimators:
            raise ValueError("A price term needs at least one stage")
        dims = {estimator.target_dim for estimator in self.estimators}
        if len(dims) != 1:
            raise ValueError(f"Price estimators predict differing dimensions {sorted(dims)}")

    @classmethod
    def constant(cls, values, info_dim: int = 0) -> "PricedTerm":
        """Deterministic prices, one row per stage."""
        values = np.asarray(values, dtype=float)
        values = values.reshape(values.shape[0], -1)
        return cls(tuple(ConstantEstimator(row.copy(), info_dim) for row in values))

    @classmethod
    def zero(cls, horizon: int, dimension: int, info_dim: int = 0) -> "PricedTerm":
        """The price term of the first iteration."""
        return cls.constant(np.zeros((horizon, dimension)), info_dim)

    @property
    def dimension(self) -> int:
        """Number of coupling coordinates priced."""
        return self.estimators[0].target_dim

    @property
    def horizon(self) -> int:
        """Number of stages T."""
        return len(self.estimators)

    def evaluate(self, t: int, info: np.ndarray) -> np.ndarray:
        """Prices (B, d) at a batch of information values (B, p)."""
        return self.estimators[t].predict_many(info)

    def to_frame(self) -> pd.DataFrame:
        """Fitted parameters of every stage, stacked with a stage column."""
        frames = []
        for t, estimator in enumerate(self.estimators):
            frame = estimator.to_frame()
            frame.insert(0, "kind", estimator.kind)
            frame.insert(0, "t", t)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)
