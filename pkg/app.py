import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional, Sequence

from dremkit.core import ConfigError, GainValidationError
from dremkit.core.estimators import validate_dt_gains
from dremkit.core.runner import RunSummary, certify, process_scenario
from dremkit.plants import NPRE_REGISTRY
from dremkit.sim.scenarios import SCENARIOS, Scenario, get_scenario
from dremkit.utils.config import ConfigValue, load_config, parse_assignment
from dremkit.utils.filesystem import output_dir, trace_filename

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Dedicated flags and the config keys they set
FLAG_KEYS = {
    "gamma": "gamma",
    "kappa": "kappa",
    "alpha": "alpha",
    "lam": "lambda",
    "horizon": "horizon",
    "h": "h",
    "seed": "seed",
    "adapt": "adapt",
    "estimator": "estimator",
    "controller": "controller",
}


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override any scenario key; repeatable")
    parser.add_argument("--config", dest="configs", action="append", default=[], metavar="FILE",
                        help="Config file of key = value lines; repeatable, one run per file")
    parser.add_argument("--gamma", type=float, help="Adaptation gain")
    parser.add_argument("--kappa", type=float, help="Normalization constant")
    parser.add_argument("--alpha", type=float, help="Discrete-time filter pole")
    parser.add_argument("--lambda", dest="lam", type=float, help="Continuous-time extension pole")
    parser.add_argument("--horizon", type=float, help="Seconds (continuous time) or samples")
    parser.add_argument("--h", type=float, help="RK4 step size in seconds")
    parser.add_argument("--seed", type=int, help="Seed for sampled quantities")
    parser.add_argument("--adapt", type=int, choices=(0, 1), help="0 runs with the true parameters")
    parser.add_argument("--estimator", choices=("drem", "gradient"))
    parser.add_argument("--controller", choices=("slotine-li", "computed-torque"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drem",
        description="DREM estimation for nonlinearly parameterized regressions: scenarios, "
        "certificates and gain checks",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="List registered scenarios")

    cert = sub.add_parser("certify", help="Sample the monotonicity and Lipschitz conditions")
    cert.add_argument("name", help="Scenario or factorization name")
    cert.add_argument("--samples", type=int, default=None, help="Number of samples (default 1000)")
    _add_override_flags(cert)

    run = sub.add_parser("run", help="Run scenarios and write CSV traces")
    run.add_argument("names", nargs="*", help="Scenario names")
    run.add_argument("-o", "--out-dir", default=None, help="Output directory (default $DREM_OUT_DIR or ./output)")
    run.add_argument("-j", "--jobs", type=int, default=1, help="Scenarios to run in parallel")
    _add_override_flags(run)

    gains = sub.add_parser("validate-gains", help="Check discrete-time gains against rho and nu")
    gains.add_argument("name", help="Scenario or factorization name")
    _add_override_flags(gains)
    return parser


def _flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for item in args.overrides:
        key, value = parse_assignment(item)
        values[key] = value
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[key] = value
    return values


def _resolve(name: str) -> Scenario:
    """A scenario by name, or the first scenario built on a registered factorization."""
    if name in SCENARIOS:
        return SCENARIOS[name]
    for scenario in SCENARIOS.values():
        if scenario.npre == name:
            return scenario
    raise ConfigError(name, sorted(set(SCENARIOS) | set(NPRE_REGISTRY)), f"unknown scenario '{name}'")


def _plan_runs(args: argparse.Namespace) -> list[tuple[Scenario, Optional[str]]]:
    """(scenario, config path) pairs; precedence is flag > config file > scenario default."""
    flags = _flag_overrides(args)
    plans: list[tuple[Scenario, Optional[str]]] = []
    for config in args.configs:
        values: dict[str, ConfigValue] = dict(load_config(config))
        name = values.pop("scenario", None)
        if name is None:
            if len(args.names) != 1:
                raise ConfigError("scenario", detail=f"{config} names no scenario")
            name = args.names[0]
        scenario = get_scenario(str(name)).with_overrides({**values, **flags})
        plans.append((scenario, config))
    if not args.configs:
        if not args.names:
            raise ConfigError("scenario", sorted(SCENARIOS), "no scenario given")
        for name in args.names:
            plans.append((get_scenario(name).with_overrides(flags), None))
    return plans


def cmd_list() -> int:
    for name, scenario in SCENARIOS.items():
        print(f"{name} — {scenario.anchor}  [{scenario.kind}] {scenario.description}")
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    scenario = _resolve(args.name).with_overrides(_flag_overrides(args))
    samples = args.samples if args.samples is not None else scenario.samples
    result = certify(scenario.build_npre(), samples, scenario.seed)
    for line in result.lines():
        print(line)
    return EXIT_OK if result.passed else EXIT_FAILURE


def cmd_validate_gains(args: argparse.Namespace) -> int:
    scenario = _resolve(args.name).with_overrides(_flag_overrides(args))
    change = scenario.build_npre().change
    print(f"{scenario.name}: rho = {change.rho:g}, nu = {change.nu:g}, "
          f"lambda_max(P) = {change.lambda_max_P:g}, gamma = {scenario.gamma:g}, kappa = {scenario.kappa:g}")
    try:
        report = validate_dt_gains(change.rho, change.nu, change.P, scenario.gamma, float("inf"))
    except GainValidationError as e:
        print(f"invalid: {e}")
        return EXIT_FAILURE
    print(f"sigma = {report.sigma:.6g}, required kappa >= {report.kappa_min:.6g}")
    if report.gamma_interval is None:
        print("convergence interval: undefined (nu > rho / lambda_max(P))")
    else:
        low, high = report.gamma_interval
        verdict = "inside" if report.gamma_in_interval else "outside"
        print(f"convergence interval: [{low:.6g}, {high:.6g}] (gamma {verdict})")
    if scenario.kappa < report.kappa_min:
        print(f"invalid: kappa = {scenario.kappa:g} is below {report.kappa_min:.6g}")
        return EXIT_FAILURE
    print("valid")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    plans = _plan_runs(args)
    if args.jobs < 1:
        raise ConfigError("jobs", detail="--jobs must be at least 1")
    logger.info(f"Running {len(plans)} scenario(s) on {args.jobs} worker(s)")

    def execute(plan: tuple[Scenario, Optional[str]]) -> tuple[Optional[RunSummary], Optional[str]]:
        scenario, config = plan
        directory = output_dir(args.out_dir or scenario.output or None)
        return process_scenario(scenario, directory, trace_filename(scenario.name, config))

    with ThreadPoolExecutor(max_workers=args.jobs) as executor:
        results = list(executor.map(execute, plans))

    status = EXIT_OK
    for (scenario, _), (summary, error) in zip(plans, results):
        if error or summary is None:
            print(error, file=sys.stderr)
            status = EXIT_FAILURE
            continue
        for line in summary.lines():
            print(line)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "list":
            return cmd_list()
        if args.command == "certify":
            return cmd_certify(args)
        if args.command == "validate-gains":
            return cmd_validate_gains(args)
        return cmd_run(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
