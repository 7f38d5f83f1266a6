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
"""The writer class for the CSV artifacts and the manifest of a run."""
import datetime
import json
import logging
import os
import sys
from importlib import metadata
from typing import Any, Dict, List, Optional, Sequence

import git
import pandas as pd

from pydadp.dadp.coordinator import DadpResult
from pydadp.dp.value import ValueFunction
from pydadp.scenario.io import FLOAT_FORMAT, trajectory_frame
from pydadp.scenario.simulation import TrajectoryBundle

logger = logging.getLogger(__name__)  # pylint: disable=C0103
logger.setLevel(logging.INFO)
logger.addHandler(logging.StreamHandler(sys.stdout))

PACKAGES = ("pydadp", "numpy", "scipy", "pandas", "xarray", "click", "joblib", "PyYAML",
            "GitPython")


def get_versions() -> Dict[str, str]:
    """Installed versions of the packages a run depends on."""
    versions = {}
    for package in PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "not installed"
    return versions


def get_repo_last_commit() -> Optional[str]:
    """Identify the last commit of the source tree, None outside a repository."""
    try:
        repo = git.Repo(search_parent_directories=True)
        return str(repo.head.object.hexsha)
    except (git.InvalidGitRepositoryError, git.NoSuchPathError, ValueError):
        return None


class Writer:
    """Writes the artifacts of one command into an output directory.

    Args:
        output_path (str): The directory to write into; it is created when missing.
    """

    def __init__(self, output_path: str):
        self.output_path = output_path
        self.artifacts: List[str] = []
        os.makedirs(output_path, exist_ok=True)

    def path(self, name: str) -> str:
        """Full path of an artifact"""
        return os.path.join(self.output_path, name)

    def write_frame(self, name: str, frame: pd.DataFrame):
        """Writes one CSV with full float precision."""
        frame.to_csv(self.path(name), index=False, float_format=FLOAT_FORMAT)
        self.artifacts.append(name)
        logger.debug("wrote %s (%d rows)", name, frame.shape[0])

    def write_trace(self, result: DadpResult):
        """iterations.csv and the residual histograms of every (k, t)."""
        self.write_frame("iterations.csv", result.trace_frame())
        for (iteration, t), frame in sorted(result.histogram_frames().items()):
            self.write_frame(f"residuals_k{iteration:03d}_t{t:03d}.csv", frame)

    def write_trajectories(self, bundle: TrajectoryBundle):
        """trajectories.csv"""
        self.write_frame("trajectories.csv", trajectory_frame(bundle))

    def write_value_functions(self, value_functions: Sequence[ValueFunction],
                              names: Sequence[str]):
        """value_function.csv, one block per solved (sub)problem."""
        frames = []
        for name, value_function in zip(names, value_functions):
            frame = value_function.to_frame()
            frame.insert(0, "problem", name)
            frames.append(frame)
        self.write_frame("value_function.csv", pd.concat(frames, ignore_index=True))

    def write_manifest(self, command: str, config: Dict[str, Any], seed: Optional[int],
                       extra: Optional[Dict[str, Any]] = None):
        """manifest.json: resolved configuration, versions, revision, seed and timestamp."""
        manifest = {
            "command": command,
            "config": config,
            "seed": seed,
            "versions": get_versions(),
            "git_revision": get_repo_last_commit(),
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "artifacts": sorted(self.artifacts),
        }
        manifest.update(extra or {})
        with open(self.path("manifest.json"), "w", encoding="utf-8") as file:
            json.dump(manifest, file, indent=2, sort_keys=True, default=str)
        logger.info("The output generated in: %s", self.output_path)
