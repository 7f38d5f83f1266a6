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
"""The dadp command: validate problems, run the solvers and the oracles, export CSVs."""
import logging
import os
import sys
import traceback
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence

import click
import numpy as np
import pandas as pd
import yaml
from click.core import ParameterSource

from pydadp.bench.generators.strugarek.generator import StrugarekParams, strugarek_noise
from pydadp.bench.helpers import get_generator, get_names_of_all_generators, load_defaults
from pydadp.bench.oracles import (TreeProblem, oracle_frame, strugarek_information,
                                  tree_exact_solve)
from pydadp.cli.config import RunConfig, parse_params_file
from pydadp.cli.writer import Writer
from pydadp.dadp.coordinator import final_prices, run_dadp
from pydadp.dadp.information import (InformationSpec, constant_information,
                                     noise_information, perfect_memory_information)
from pydadp.dp.grid import Discretization
from pydadp.dp.solver import solve_global_dp
from pydadp.exceptions import InvalidProblemProvided, IterationFailed
from pydadp.model.problem import ProblemSpec
from pydadp.model.schema import load_problem, read_document, write_problem
from pydadp.scenario.io import read_scenarios, scenario_frame
from pydadp.scenario.sampling import enumerate_tree, sample_scenarios
from pydadp.scenario.simulation import estimate_cost, recover_feasibility, simulate_policy

logger = logging.getLogger(__name__)  # pylint: disable=C0103
logger.setLevel(logging.INFO)
logger.addHandler(logging.StreamHandler(sys.stdout))
# iteration progress of solve-dadp
loop_logger = logging.getLogger("pydadp.dadp.coordinator")  # pylint: disable=C0103
loop_logger.setLevel(logging.INFO)
loop_logger.addHandler(logging.StreamHandler(sys.stdout))

COMMANDS = ("validate", "solve-dp", "solve-dadp", "simulate", "oracle", "generate")


@dataclass
class RunProblem:
    """The problem of a command with its grids, slack unit and benchmark parameters."""

    spec: ProblemSpec
    discretization: Discretization
    slack_unit: Optional[int]
    params: Any = None
    generator: Optional[str] = None

    def manifest_entry(self) -> Dict[str, Any]:
        """What the manifest records about the problem."""
        entry: Dict[str, Any] = {"name": self.spec.name, "slack_unit": self.slack_unit}
        if self.generator is not None:
            entry["generator"] = self.generator
            entry["defaults"] = load_defaults(self.generator)
            entry["params"] = asdict(self.params)
        return entry


def parse_overrides(overrides: Sequence[str]) -> Dict[str, Any]:
    """Turns ``key=value`` pairs into generator parameters, values read as YAML."""
    params = {}
    for override in overrides:
        if "=" not in override:
            raise click.BadParameter(f"'{override}' is not of the form key=value",
                                     param_hint="--set")
        key, value = override.split("=", 1)
        params[key.strip().replace("-", "_")] = yaml.safe_load(value)
    return params


def build_config(command: str, params_file, flags: Dict[str, Any],
                 overrides: Sequence[str] = ()) -> RunConfig:
    """Layers defaults, the parameter file and the flags given on the command line."""
    ctx = click.get_current_context()
    config = RunConfig()
    try:
        if params_file:
            config.update_layer("file", parse_params_file(params_file))
        config.update_layer("cli", {
            key: value for key, value in flags.items()
            if ctx.get_parameter_source(key) == ParameterSource.COMMANDLINE})
        if overrides:
            config.update_layer("cli", {"generator_params": {
                **config["generator_params"], **parse_overrides(overrides)}})
        config.check(command)
    except (KeyError, ValueError, FileNotFoundError) as exc:
        raise click.UsageError(str(exc).strip("'\"")) from exc
    return config


def load_run_problem(config: RunConfig) -> RunProblem:
    """Reads the problem file or builds the benchmark, then settles the grids."""
    params = generator_name = None
    slack_unit = None
    if config["problem"] is not None:
        problem_file = load_problem(config["problem"])
        if not problem_file.report.is_valid:
            raise InvalidProblemProvided(problem_file.report)
        spec = problem_file.spec
        discretization = None
        if problem_file.slack_unit is not None:
            slack_unit = spec.unit_index(problem_file.slack_unit)
        if problem_file.discretization:
            discretization = Discretization.from_dict(spec, problem_file.discretization)
    else:
        generator_name = config["generator"]
        generator = get_generator(generator_name)()
        params = generator.params(config["generator_params"])
        spec = generator.make(params)
        discretization = generator.discretization(spec, params)
        slack_unit = generator.slack_index(spec)
        logger.info("Using the %s benchmark: %d subsystems, %d stages", generator_name,
                    spec.size, spec.horizon)
    if config["state_nodes"] is not None or config["control_nodes"] is not None \
            or discretization is None:
        discretization = Discretization.uniform(spec, config["state_nodes"] or 21,
                                                config["control_nodes"] or 13)
    if config["slack_unit"] is not None:
        slack_unit = spec.unit_index(config["slack_unit"])
    return RunProblem(spec, discretization, slack_unit, params, generator_name)


def build_information(problem: RunProblem, selection: str) -> InformationSpec:
    """The information variable named on the command line.

    ``constant``, ``noise`` (every coordinate), ``perfect`` (the path of the single random
    coordinate), ``strugarek`` (the exact price recursion of that benchmark) or a comma
    separated list of noise coordinate names.
    """
    noise = problem.spec.noise
    if selection == "constant":
        return constant_information(noise.horizon, noise.dimension)
    if selection in ("noise", "all"):
        return noise_information(noise)
    if selection == "perfect":
        return perfect_memory_information(noise)
    if selection == "strugarek":
        if not isinstance(problem.params, StrugarekParams):
            raise click.UsageError("--info strugarek needs --generator strugarek")
        return strugarek_information(problem.params)
    return noise_information(noise, [name.strip() for name in selection.split(",")])


def evaluation_scenarios(config: RunConfig, problem: RunProblem):
    """Scenarios from --scenario-file or freshly sampled with the evaluation seed."""
    if config["scenario_file"] is not None:
        return read_scenarios(config["scenario_file"], problem.spec.noise)
    seed = config["eval_seed"]
    if seed is None:
        seed = int(config["seed"]) + 1
    return sample_scenarios(problem.spec.noise, int(config["eval_scenarios"]), int(seed))


def _option(name: str, *aliases: str, **kwargs):
    return click.option(f"--{name.replace('_', '-')}", *aliases, name, show_default=True,
                        **kwargs)


CONFIG_OPTIONS = [
    _option("problem", default=None, help="Problem file (JSON or YAML)."),
    _option("generator", default=None,
            type=click.Choice(get_names_of_all_generators(), case_sensitive=False),
            help="Benchmark to build instead of reading a problem file."),
    _option("output", default="dadp_output", help="Output directory."),
    _option("info", default="constant",
            help="Information variable: constant, noise, perfect, strugarek or noise "
                 "coordinate names separated by commas."),
    _option("estimator", default="constant", help="constant, binned or kernel."),
    _option("bins", default=10, type=int, help="Bins per information coordinate."),
    _option("bandwidth", default=None, type=float, help="Kernel bandwidth."),
    _option("iters", default=20, type=int, help="Maximal number of iterations."),
    _option("rho", default=0.5, type=float, help="Step size of the multiplier update."),
    _option("scenarios", default=500, type=int, help="Number of coordination scenarios."),
    _option("seed", default=0, type=int, help="Seed of the coordination scenarios."),
    _option("exhaustive", is_flag=True, default=False,
            help="Coordinate on the whole scenario tree."),
    _option("slack_unit", default=None, help="Subsystem (name or index) absorbing the "
                                             "coupling residual."),
    _option("gap_tolerance", default=1e-8, type=float, help="Stop once |gap| is below."),
    _option("residual_tolerance", default=1e-8, type=float,
            help="Stop once every |mean residual| is below."),
    _option("strong_convexity", default=None, type=float,
            help="Strong convexity modulus α for the step-size check."),
    _option("lipschitz", default=None, type=float,
            help="Lipschitz constant c of the coupling for the step-size check."),
    _option("state_nodes", default=None, type=int, help="Uniform state grid nodes."),
    _option("control_nodes", default=None, type=int, help="Uniform control grid nodes."),
    _option("threads", default=1, type=int, help="Worker threads for subproblem solves."),
    _option("histogram_bins", default=20, type=int, help="Bins of residual histograms."),
    _option("node_cap", default=10 ** 6, type=int, help="Largest admissible grid."),
    _option("tree_cap", default=10 ** 7, type=int, help="Largest admissible tree search."),
    _option("policy", default="dadp", help="Policy simulated by simulate: dadp or dp."),
    _option("eval_scenarios", default=1000, type=int, help="Evaluation scenarios."),
    _option("eval_seed", default=None, type=int,
            help="Seed of the evaluation scenarios, seed + 1 when omitted."),
    _option("scenario_file", "--scenario", default=None, help="Scenario CSV to evaluate on."),
    _option("strugarek", default=None, help="Parameter file of the reservoir oracle."),
    _option("oracle", default="strugarek", help="strugarek or tree."),
    _option("multipliers", is_flag=True, default=False,
            help="Add the tree KKT multipliers to the tree oracle."),
    click.option("--set", "overrides", multiple=True,
                 help="Benchmark parameter as key=value. (Repeat for more than one.)"),
    click.option("--params-file", type=click.File("r"), default=None,
                 help="A .yaml file with a 'dadp:' section of the settings above."),
]


def config_options(function):
    """Adds every configuration flag to a command."""
    for option in reversed(CONFIG_OPTIONS):
        function = option(function)
    return function


@click.group()
def dadp_cli():
    """Dual approximate dynamic programming for multi-unit stochastic control problems."""


@dadp_cli.command()
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
def validate(problem: str):
    """Checks a problem file and prints OK or the list of violations."""
    problem_file = load_problem(problem)
    if not problem_file.report.is_valid:
        raise InvalidProblemProvided(problem_file.report)
    click.echo("OK")


@dadp_cli.command("solve-dp")
@config_options
def solve_dp(params_file, overrides, **flags):
    """Solves the undecomposed problem by dynamic programming on the joint grid."""
    config = build_config("solve-dp", params_file, flags, overrides)
    problem = load_run_problem(config)
    spec = problem.spec
    value_function, policy = solve_global_dp(spec, problem.discretization,
                                             problem.slack_unit, int(config["node_cap"]))
    x0 = np.concatenate([sub.x0 for sub in spec.subsystems]).reshape(1, -1)
    value = float(value_function.lookup(0, x0)[0])
    scenarios = evaluation_scenarios(config, problem)
    bundle = simulate_policy(spec, [policy], scenarios)
    estimate = estimate_cost(bundle)
    logger.info("V_0(x_0) = %.10g; simulated cost %s", value, estimate)
    writer = Writer(config["output"])
    writer.write_value_functions([value_function], [spec.name])
    writer.write_trajectories(bundle)
    writer.write_manifest("solve-dp", config.get_accumulated_dict(), int(config["seed"]), {
        "problem": problem.manifest_entry(), "value": value,
        "simulated_cost": {"mean": estimate.mean, "half_width": estimate.half_width}})


def _run_coordination(config: RunConfig, problem: RunProblem):
    info = build_information(problem, config["info"])
    result = run_dadp(problem.spec, info, config.uzawa_config(problem.slack_unit),
                      problem.discretization)
    return info, result


@dadp_cli.command("solve-dadp")
@config_options
def solve_dadp(params_file, overrides, **flags):
    """Runs the coordination loop and exports its trace, prices and policies."""
    config = build_config("solve-dadp", params_file, flags, overrides)
    problem = load_run_problem(config)
    info, result = _run_coordination(config, problem)
    bundle = result.bundle
    if problem.slack_unit is not None:
        bundle = recover_feasibility(bundle, problem.slack_unit)
    writer = Writer(config["output"])
    writer.write_trace(result)
    writer.write_trajectories(bundle)
    writer.write_value_functions(result.value_functions,
                                 [sub.name for sub in problem.spec.subsystems])
    writer.write_frame("estimators.csv", result.price.to_frame())
    writer.write_frame("prices.csv", final_prices(result, info))
    last = result.reports[-1]
    writer.write_manifest("solve-dadp", config.get_accumulated_dict(), int(config["seed"]), {
        "problem": problem.manifest_entry(), "stop_reason": result.stop_reason,
        "iterations": len(result.reports), "dual": last.dual.mean,
        "primal": last.primal.mean})


@dadp_cli.command()
@config_options
def simulate(params_file, overrides, **flags):
    """Simulates the DADP (or global DP) feedback on evaluation scenarios."""
    config = build_config("simulate", params_file, flags, overrides)
    problem = load_run_problem(config)
    spec = problem.spec
    scenarios = evaluation_scenarios(config, problem)
    if config["policy"] == "dp":
        _, policy = solve_global_dp(spec, problem.discretization, problem.slack_unit,
                                    int(config["node_cap"]))
        bundle = simulate_policy(spec, [policy], scenarios)
    else:
        info, result = _run_coordination(config, problem)
        bundle = simulate_policy(spec, result.policies, scenarios,
                                 info.memory_trajectory(scenarios.noise))
        if problem.slack_unit is not None:
            bundle = recover_feasibility(bundle, problem.slack_unit)
    estimate = estimate_cost(bundle)
    violations = 0 if bundle.slack_violations is None else int(bundle.slack_violations.sum())
    logger.info("Simulated cost %s, %d slack bound violations", estimate, violations)
    writer = Writer(config["output"])
    writer.write_frame("scenarios.csv", scenario_frame(scenarios))
    writer.write_trajectories(bundle)
    writer.write_frame("evaluation.csv", pd.DataFrame([{
        "policy": config["policy"], "mean": estimate.mean,
        "half_width": estimate.half_width, "count": estimate.count,
        "slack_violations": violations}]))
    writer.write_manifest("simulate", config.get_accumulated_dict(), int(config["seed"]),
                          {"problem": problem.manifest_entry()})


def _strugarek_params(config: RunConfig) -> StrugarekParams:
    generator = get_generator("strugarek")()
    overrides = dict(config["generator_params"])
    if config["strugarek"] is not None:
        overrides.update(read_document(config["strugarek"]))
    return generator.params(overrides)


def _tree_frame(solution) -> pd.DataFrame:
    records = []
    for path, control in sorted(solution.controls.items()):
        record: Dict[str, Any] = {"node": "-".join(str(i) for i in path), "t": len(path) - 1}
        record.update({f"control_{k}": value for k, value in enumerate(control)})
        if solution.multipliers is not None:
            record.update({f"multiplier_{j}": value
                           for j, value in enumerate(solution.multipliers[path])})
        records.append(record)
    return pd.DataFrame.from_records(records)


@dadp_cli.command()
@config_options
def oracle(params_file, overrides, **flags):
    """Exact references: the reservoir price oracle or the scenario-tree optimum."""
    config = build_config("oracle", params_file, flags, overrides)
    writer = Writer(config["output"])
    if config["oracle"] == "strugarek":
        params = _strugarek_params(config)
        noise = strugarek_noise(params)
        if config["scenario_file"] is not None:
            scenarios = read_scenarios(config["scenario_file"], noise)
        else:
            scenarios = enumerate_tree(noise, int(config["tree_cap"]))
        writer.write_frame("prices.csv", oracle_frame(scenarios, params))
        extra = {"strugarek": asdict(params)}
    elif config["oracle"] == "tree":
        if config["problem"] is None and config["generator"] is None:
            raise click.UsageError("The tree oracle needs --problem or --generator")
        problem = load_run_problem(config)
        solution = tree_exact_solve(TreeProblem(problem.spec, problem.discretization,
                                                problem.slack_unit, int(config["tree_cap"])),
                                    multipliers=bool(config["multipliers"]))
        logger.info("Tree optimum %.10g after %d evaluations", solution.value,
                    solution.evaluations)
        writer.write_frame("tree.csv", _tree_frame(solution))
        extra = {"problem": problem.manifest_entry(), "value": solution.value}
    else:
        raise click.UsageError(f"Unknown oracle '{config['oracle']}', expected strugarek "
                               f"or tree")
    writer.write_manifest("oracle", config.get_accumulated_dict(), None, extra)


@dadp_cli.command()
@click.argument("name", type=click.Choice(get_names_of_all_generators(), case_sensitive=False))
@click.option("--output", default="problem.json", show_default=True,
              help="The problem file to write.")
@click.option("--set", "overrides", multiple=True,
              help="Benchmark parameter as key=value. (Repeat for more than one.)")
def generate(name: str, output: str, overrides):
    """Writes a benchmark problem, with its grids, as a problem file."""
    generator = get_generator(name)()
    try:
        params = generator.params(parse_overrides(overrides))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(str(exc)) from exc
    spec = generator.make(params)
    discretization = generator.discretization(spec, params)
    write_problem(output, spec, None if discretization is None else discretization.to_dict(),
                  generator.slack_unit)
    logger.info("The problem file generated: %s", output)


def _failing_module(exc: BaseException) -> str:
    module = "pydadp"
    for frame in traceback.extract_tb(exc.__traceback__):
        parts = os.path.normpath(frame.filename).split(os.sep)
        if "pydadp" in parts:
            dotted = parts[len(parts) - 1 - parts[::-1].index("pydadp"):]
            module = ".".join(dotted)
            if module.endswith(".py"):
                module = module[:-len(".py")]
    return module


def describe_failure(command: str, exc: BaseException) -> str:
    """One line naming the command, the failing module and stage, and the cause."""
    stage = command
    cause: BaseException = exc
    if isinstance(exc, IterationFailed):
        stage = f"iteration {exc.iteration}"
        cause = exc.__cause__ or exc
    return (f"dadp {command} failed in {_failing_module(cause)} ({stage}): "
            f"{type(cause).__name__}: {cause}")


def run_command(argv: Sequence[str]) -> int:
    """Runs the command line without exiting.

    Returns:
        int: 0 on success, 2 on usage or validation errors, 1 on runtime errors.
    """
    argv = list(argv)
    command = next((arg for arg in argv if arg in COMMANDS), "dadp")
    try:
        status = dadp_cli.main(args=argv, prog_name="dadp", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except InvalidProblemProvided as exc:
        click.echo(f"Invalid problem:\n{exc.report}", err=True)
        return 2
    except Exception as exc:  # pylint: disable=broad-except
        click.echo(describe_failure(command, exc), err=True)
        return 1
    return status if isinstance(status, int) else 0


def main():
    """Console entry point"""
    sys.exit(run_command(sys.argv[1:]))


if __name__ == '__main__':
    main()
