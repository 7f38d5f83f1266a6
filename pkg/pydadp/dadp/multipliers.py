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
"""Scenario-wise multiplier samples and their projection onto the information variable."""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from pydadp.condexp.estimators import SampleTable, deviance, fit_estimator
from pydadp.dadp.information import InformationSpec
from pydadp.dp.priced import PricedTerm
from pydadp.exceptions import DevianceUndefined, NonFiniteValue
from pydadp.scenario.sampling import ScenarioSet

logger = logging.getLogger(__name__)  # pylint: disable=C0103


@dataclass(frozen=True)
class MultiplierStore:
    """λ_t^{k,s} for every stage t and scenario s, as an array (T, S, d)."""

    values: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"Multipliers must be shaped (T, S, d), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue("Multipliers must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, horizon: int, count: int, dimension: int) -> "MultiplierStore":
        """The initial store."""
        return cls(np.zeros((horizon, count, dimension)), 0)

    @property
    def shape(self) -> Tuple[int, int, int]:
        """(T, S, d)"""
        return self.values.shape


def multiplier_update(store: MultiplierStore, residuals, rho) -> MultiplierStore:
    """λ_t^{k+1,s} = λ_t^{k,s} + ρ_t r_t^s, returned as a new store.

    Args:
        store: current multipliers (T, S, d).
        residuals: coupling residuals (T, S, d).
        rho: one step size, or one per stage.
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != store.shape:
        raise ValueError(f"Residuals have shape {residuals.shape}, "
                         f"the multipliers {store.shape}")
    bad = np.argwhere(~np.isfinite(residuals))
    if bad.size:
        t, s = int(bad[0][0]), int(bad[0][1])
        raise NonFiniteValue(f"Non-finite residual at stage {t}, scenario {s}")
    steps = np.broadcast_to(np.asarray(rho, dtype=float).reshape(-1), (store.shape[0],))
    return MultiplierStore(store.values + steps[:, None, None] * residuals,
                           store.iteration + 1)


def project_price(store: MultiplierStore, scenarios: ScenarioSet, info: InformationSpec,
                  kind: str = "constant", **options) -> Tuple[PricedTerm, np.ndarray]:
    """Fits λ̂_t(y) = E[λ_t | y_t = y] stage by stage from the pairs (y_t^s, λ_t^s).

    Information without coordinates always yields the stage mean. Exhaustive scenario
    sets weight each pair by its path probability.

    Returns:
        (PricedTerm, np.ndarray): the price term and the deviance per stage (NaN where
        undefined).
    """
    horizon = store.shape[0]
    info_values = info.values(scenarios.noise)
    if info.info_dim == 0:
        kind, options = "constant", {}
    estimators = []
    deviances = np.full(horizon, np.nan)
    for t in range(horizon):
        samples = SampleTable(info_values[:, t], store.values[t], scenarios.weights())
        try:
            estimator = fit_estimator(samples, kind, **options)
        except ValueError as exc:
            raise type(exc)(f"Stage {t}: {exc}") from exc
        estimators.append(estimator)
        try:
            deviances[t] = deviance(estimator, samples)
        except DevianceUndefined:
            logger.debug("deviance undefined at stage %d", t)
    return PricedTerm(tuple(estimators)), deviances
