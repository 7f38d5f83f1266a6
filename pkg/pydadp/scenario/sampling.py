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
"""Noise scenarios: Monte-Carlo samples or the exhaustive scenario tree."""
import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from pydadp.exceptions import TreeCapExceeded
from pydadp.model.helpers import PROBABILITY_TOLERANCE
from pydadp.model.problem import NoiseModel

logger = logging.getLogger(__name__)  # pylint: disable=C0103

DEFAULT_TREE_CAP = 10 ** 7
CONFIDENCE_FACTOR = 1.96
SOURCES = ("sampled", "exhaustive", "file")


def make_rng(seed: int) -> np.random.Generator:
    """A counter-based generator seeded explicitly."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class Scenario:
    """One noise path w_0 .. w_{T-1}."""

    noise: np.ndarray
    probability: float = 1.0

    @property
    def horizon(self) -> int:
        """Number of stages T."""
        return self.noise.shape[0]


@dataclass(frozen=True)
class ScenarioSet:
    """S noise paths stored as one array (S, T, q).

    Sampled sets carry equal probabilities; exhaustive sets carry the path probabilities
    of the scenario tree.
    """

    noise: np.ndarray
    probabilities: np.ndarray
    seed: Optional[int]
    source: str
    names: Tuple[str, ...]
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"Unknown scenario source '{self.source}', expected {SOURCES}")
        object.__setattr__(self, "noise", np.asarray(self.noise, dtype=float))
        object.__setattr__(self, "probabilities", np.asarray(self.probabilities, dtype=float))
        object.__setattr__(self, "names", tuple(self.names))
        if self.source == "exhaustive" \
                and abs(float(self.probabilities.sum()) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError("Path probabilities of an exhaustive set must sum to 1")

    def __len__(self) -> int:
        return self.noise.shape[0]

    def __getitem__(self, index: int) -> Scenario:
        return Scenario(self.noise[index], float(self.probabilities[index]))

    @property
    def count(self) -> int:
        """Number of scenarios S."""
        return self.noise.shape[0]

    @property
    def horizon(self) -> int:
        """Number of stages T."""
        return self.noise.shape[1]

    @property
    def exhaustive(self) -> bool:
        """True when the set is the whole scenario tree."""
        return self.source == "exhaustive"

    def weights(self) -> Optional[np.ndarray]:
        """Probability weights for estimates, None for equally likely samples."""
        return self.probabilities if self.exhaustive else None


def sample_scenarios(noise: NoiseModel, count: int, seed: int) -> ScenarioSet:
    """Draws ``count`` i.i.d. paths, stage by stage, from a Philox generator."""
    if count < 1:
        raise ValueError(f"At least one scenario is needed, got {count}")
    rng = make_rng(seed)
    indices = np.empty((count, noise.horizon), dtype=np.int64)
    paths = np.empty((count, noise.horizon, noise.dimension))
    for t in range(noise.horizon):
        indices[:, t] = rng.choice(noise.supports[t].shape[0], size=count,
                                   p=noise.probabilities[t])
        paths[:, t] = noise.supports[t][indices[:, t]]
    return ScenarioSet(paths, np.full(count, 1.0 / count), seed, "sampled", noise.names,
                       indices)


def enumerate_tree(noise: NoiseModel, cap: int = DEFAULT_TREE_CAP) -> ScenarioSet:
    """Every path of positive probability, first stage varying slowest."""
    kept = [np.flatnonzero(probabilities > 0.0) for probabilities in noise.probabilities]
    leaves = int(np.prod([len(points) for points in kept], dtype=np.int64))
    if leaves > cap:
        raise TreeCapExceeded(f"The scenario tree has {leaves} leaves, more than the cap "
                              f"of {cap}")
    indices = np.array(list(itertools.product(*kept)), dtype=np.int64).reshape(
        leaves, noise.horizon)
    paths = np.empty((leaves, noise.horizon, noise.dimension))
    probabilities = np.ones(leaves)
    for t in range(noise.horizon):
        paths[:, t] = noise.supports[t][indices[:, t]]
        probabilities = probabilities * noise.probabilities[t][indices[:, t]]
    logger.debug("enumerated %d scenario paths", leaves)
    return ScenarioSet(paths, probabilities, None, "exhaustive", noise.names, indices)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Mean with the half-width of its 95% confidence interval."""

    mean: float
    half_width: float
    count: int

    def __str__(self) -> str:
        return f"{self.mean:.6g} ± {self.half_width:.2g} ({self.count} scenarios)"


def monte_carlo_estimate(values: np.ndarray, scenarios: ScenarioSet) -> MonteCarloEstimate:
    """Exact expectation on an exhaustive set, sample mean with a 95% CI otherwise."""
    values = np.asarray(values, dtype=float)
    count = values.shape[0]
    if count == 0:
        raise ValueError("Cannot estimate from an empty set of scenarios")
    if scenarios.exhaustive:
        return MonteCarloEstimate(float(np.average(values, weights=scenarios.probabilities)),
                                  0.0, count)
    if count == 1:
        return MonteCarloEstimate(float(values[0]), 0.0, 1)
    half_width = CONFIDENCE_FACTOR * float(np.std(values, ddof=1)) / np.sqrt(count)
    return MonteCarloEstimate(float(np.mean(values)), half_width, count)
