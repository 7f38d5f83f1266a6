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
"""Benchmark defaults and the generator registry."""
import glob
import importlib
import os
from typing import Any, Dict, List

import yaml

DEFAULTS_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "defaults.yaml")


def load_defaults(section: str = None) -> Dict[str, Any]:
    """Reads the benchmark defaults, optionally a single section of them."""
    with open(DEFAULTS_FILE, "r", encoding="utf-8") as file:
        defaults = yaml.safe_load(file)
    if section is None:
        return defaults
    if section not in defaults:
        raise ValueError(f"No defaults for {section}, available: {', '.join(sorted(defaults))}")
    return dict(defaults[section])


def get_generator(generator_name: str):
    """Helper function to get the generator class from its given name"""
    path_prefix = f"{os.path.dirname(__file__)}{os.sep}" if os.path.dirname(__file__) else ""
    path = os.path.join(path_prefix, "generators", generator_name, "generator.py")
    if not os.path.exists(path):
        raise ValueError(f"Unknown generator '{generator_name}', available: "
                         f"{', '.join(get_names_of_all_generators())}")
    module = importlib.import_module(f"{__package__}.generators.{generator_name}.generator")
    return module.GENERATOR


def get_names_of_all_generators() -> List[str]:
    """Helper function to populate a list of all available generators"""
    path_prefix = f"{os.path.dirname(__file__)}{os.sep}" if os.path.dirname(__file__) else ""
    files = sorted(glob.glob(os.path.join(path_prefix, "generators", "*", "generator.py")))
    all_generators = []
    for file in files:
        if f"{os.sep}base{os.sep}" not in file:
            index_of_generators_folder_name = (file.rindex(f"generators{os.sep}")
                                               + len(f"generators{os.sep}"))
            index_of_last_path_sep = file.rindex(os.sep)
            all_generators.append(file[index_of_generators_folder_name:index_of_last_path_sep])
    return all_generators
