"""Command-line interface for lagrange-converters."""

import argparse
import json
import sys
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lagrange_converters.circuits import (
    VALID_CIRCUITS,
    Params,
    build_circuit,
    default_params,
    load_params,
)
from lagrange_converters.derive import ReductionError, build_switched_model, dump_model
from lagrange_converters.elcore import ModeVector
from lagrange_converters.scenarios import (
    Scenario,
    build_scenario,
    parameter_notes,
    resolve_params,
)
from lagrange_converters.sim import (
    ConfigError,
    SimulationError,
    Trajectory,
    energy_residual,
    export_csv,
    simulate,
    steady_state_metrics,
)
from lagrange_converters.validation import CHECKS, ValidationContext, run_checks

EXIT_SUCCESS = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_DERIVATION_ERROR = 3
EXIT_SIMULATION_ERROR = 4

RUN_CONFIG_KEYS = frozenset({
    "circuit", "params", "t_end", "step", "integrator", "x0", "event_tolerance",
    "decimation", "hysteresis", "mode", "window_periods", "output",
})

DEFAULT_WINDOW_PERIODS = 10


@dataclass(frozen=True)
class RunConfig:
    """Contents of a ``simulate --config`` file; paths are already resolved."""

    circuit: str | None = None
    params: Path | None = None
    t_end: float | None = None
    step: float | None = None
    integrator: str | None = None
    x0: Mapping[str, float] = field(default_factory=dict)
    event_tolerance: float | None = None
    decimation: int | None = None
    hysteresis: float = 1e-3
    mode: str | None = None
    window_periods: int = DEFAULT_WINDOW_PERIODS
    output: Path | None = None


def _number(data: Mapping[str, object], key: str) -> float | None:
    value = data.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Run config key {key} must be a number, got {value!r}")
    return float(value)


def _integer(data: Mapping[str, object], key: str) -> int | None:
    value = data.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"Run config key {key} must be an integer, got {value!r}")
    return value


def _text(data: Mapping[str, object], key: str) -> str | None:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"Run config key {key} must be a string, got {value!r}")
    return value


def load_run_config(path: str | Path) -> RunConfig:
    """Read a strict JSON run configuration.

    Relative ``params`` and ``output`` paths resolve against the directory
    containing the config file.

    Raises:
        ConfigError: If the file is unreadable, not a JSON object, has
            unknown keys or values of the wrong type.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read run config {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Run config {path} is not valid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Run config {path} must contain a JSON object")
    unknown = sorted(set(data) - RUN_CONFIG_KEYS)
    if unknown:
        raise ConfigError(
            f"Unknown run config key(s): {', '.join(unknown)}. "
            f"Valid options: {', '.join(sorted(RUN_CONFIG_KEYS))}"
        )

    x0 = data.get("x0", {})
    if not isinstance(x0, dict):
        raise ConfigError("Run config key x0 must map state labels to numbers")
    initial = {label: _number(x0, label) for label in x0}
    if any(value is None for value in initial.values()):
        raise ConfigError("Run config key x0 must map state labels to numbers")

    def resolve(key: str) -> Path | None:
        value = _text(data, key)
        if value is None:
            return None
        return path.parent / value

    hysteresis = _number(data, "hysteresis")
    window = _integer(data, "window_periods")
    if window is not None and window < 1:
        raise ConfigError(f"window_periods must be >= 1, got {window}")
    return RunConfig(
        circuit=_text(data, "circuit"),
        params=resolve("params"),
        t_end=_number(data, "t_end"),
        step=_number(data, "step"),
        integrator=_text(data, "integrator"),
        x0=initial,
        event_tolerance=_number(data, "event_tolerance"),
        decimation=_integer(data, "decimation"),
        hysteresis=1e-3 if hysteresis is None else hysteresis,
        mode=_text(data, "mode"),
        window_periods=DEFAULT_WINDOW_PERIODS if window is None else window,
        output=resolve("output"),
    )


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="lagrange-converters",
        description="Derive and simulate Euler-Lagrange models of switched converters.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Print progress on stderr.",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    circuits = (
        f"One of: {', '.join(sorted(VALID_CIRCUITS))}. boost is the switch-level "
        "boost that calibrates the hf-boost load R_o."
    )

    derive = commands.add_parser("derive", help="Print the reduced model of a circuit.")
    derive.add_argument("circuit", metavar="CIRCUIT", help=circuits)
    derive.add_argument("--params", metavar="PATH", help="JSON parameter file.")
    derive.add_argument(
        "--mode", metavar="BITS", help="Print one mode only, e.g. u_m=1,u_d=0."
    )

    simulate_cmd = commands.add_parser("simulate", help="Simulate a circuit and write a CSV trajectory.")
    simulate_cmd.add_argument(
        "circuit", nargs="?", metavar="CIRCUIT", help=circuits
    )
    simulate_cmd.add_argument("--config", metavar="PATH", help="JSON run configuration.")
    simulate_cmd.add_argument("--params", metavar="PATH", help="JSON parameter file.")
    simulate_cmd.add_argument(
        "--out",
        metavar="PATH",
        help="CSV output path (default: CIRCUIT.csv). State columns follow the model order, "
        "except hf-rectifier which writes i,v_d,i_Lc,v_c.",
    )
    simulate_cmd.add_argument(
        "--mode", metavar="BITS", help="Hold one mode for the whole run, e.g. u_d=1."
    )

    validate = commands.add_parser("validate", help="Run the validation checks.")
    validate.add_argument("checks", nargs="*", metavar="CHECK", help="Checks to run (default: all).")
    validate.add_argument("--list", action="store_true", help="List check names without running.")
    validate.add_argument("--params", metavar="PATH", help="JSON parameter file for --circuit.")
    validate.add_argument(
        "--circuit",
        default="hf-boost",
        metavar="CIRCUIT",
        help="Circuit the --params file belongs to (default: hf-boost).",
    )
    return parser


def _progress(args: argparse.Namespace, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def _load(name: str, path: str | Path | None) -> tuple[Params, frozenset[str]]:
    if path is None:
        return default_params(name), frozenset()
    return load_params(name, path)


def cmd_derive(args: argparse.Namespace) -> int:
    """Print the reduced model of every mode, or of ``--mode`` only."""
    try:
        params, overridden = _load(args.circuit, args.params)
        params, sources = resolve_params(args.circuit, params)
        circuit = build_circuit(args.circuit, params)
        mode = None
        if args.mode is not None:
            mode = ModeVector.parse(args.mode, circuit.bit_names)
            circuit.components(mode)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    for key, note in parameter_notes(args.circuit, params, overridden, sources).items():
        print(f"Note: {key} = {note}", file=sys.stderr)
    for u in circuit.modes if mode is None else (mode,):
        _progress(args, f"Deriving: {u}")
    try:
        model = build_switched_model(circuit)
    except ReductionError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DERIVATION_ERROR
    print(dump_model(model, mode), end="")
    return EXIT_SUCCESS


def _summary(scenario: Scenario, tr: Trajectory, window_periods: int, output: Path) -> list[str]:
    span = float(tr.time[-1] - tr.time[0])
    window = min(scenario.metric_window(window_periods, span), span)
    metrics = steady_state_metrics(tr, window)
    lines = [
        f"Circuit: {scenario.name}",
        f"Samples: {len(tr)} over {float(tr.time[-1]):.9g} s",
        f"Window: last {window:.9g} s",
    ]
    for label in tr.state_labels:
        lines.append(
            f"  {label}: mean {metrics.mean[label]:.6g}, ripple {metrics.ripple[label]:.6g}"
        )
    for mode, share in sorted(metrics.dwell.items(), key=lambda item: item[0].bits):
        lines.append(f"  dwell {mode}: {share:.2%}")
    peak = max(float(np.max(tr.stored)), 1e-300)
    residual = float(np.max(np.abs(energy_residual(tr))))
    lines.append(f"Energy residual: {residual:.3g} J ({residual / peak:.3g} x peak stored)")
    lines.append(f"Events: {len(tr.events)}")
    for key, value in scenario.notes.items():
        lines.append(f"Parameter: {key} = {value}")
    lines.append(f"Output: {output}")
    return lines


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulate one circuit, write its trajectory as CSV and print a summary."""
    try:
        run = load_run_config(args.config) if args.config else RunConfig()
        name = args.circuit or run.circuit
        if name is None:
            raise ConfigError("No circuit given on the command line or in the run config")
        params_path = args.params or run.params
        params, overridden = _load(name, params_path)
        mode_text = args.mode or run.mode
        output = Path(args.out) if args.out else run.output or Path(f"{name}.csv")
        scenario = build_scenario(name, params, overridden, run.hysteresis, mode_text)
        cfg = scenario.config(
            t_end=run.t_end,
            step=run.step,
            integrator=run.integrator,
            x0=run.x0 or None,
            event_tolerance=run.event_tolerance,
            decimation=run.decimation,
        )
    except ReductionError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DERIVATION_ERROR
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    _progress(args, f"Simulating: {name} t_end={cfg.t_end:.9g} h={cfg.step:.9g}")
    metadata = {"circuit": name, "integrator": cfg.integrator.value, **scenario.notes}
    try:
        tr = simulate(scenario.model, scenario.scheduler, scenario.inputs, cfg, metadata)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SimulationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_SIMULATION_ERROR

    try:
        with open(output, "w", encoding="utf-8", newline="") as f:
            export_csv(tr, f, scenario.csv_states)
    except OSError as e:
        print(f"Error writing {output}: {e.strerror}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        lines = _summary(scenario, tr, run.window_periods, output)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    for line in lines:
        print(line)
    return EXIT_SUCCESS


def cmd_validate(args: argparse.Namespace) -> int:
    """Run the validation checks and print a pass/fail table."""
    if args.list:
        width = max(len(check.name) for check in CHECKS)
        for check in CHECKS:
            print(f"{check.name:<{width}}  {check.description}")
        return EXIT_SUCCESS

    overrides: dict[str, Params] = {}
    try:
        if args.params is not None:
            params, _ = load_params(args.circuit, args.params)
            overrides[args.circuit] = params
        results = run_checks(
            args.checks or None,
            ValidationContext(overrides),
            progress=lambda name: _progress(args, f"Running check: {name}"),
        )
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status}  {result.name}: {result.detail}")
        for note in result.notes:
            print(f"      {note}")
    passed = sum(result.passed for result in results)
    print(f"{passed}/{len(results)} checks passed")
    return EXIT_SUCCESS if passed == len(results) else EXIT_VALIDATION_FAILED


def main() -> None:
    """Main entry point for the CLI."""
    parser = create_parser()
    args = parser.parse_args()
    commands = {"derive": cmd_derive, "simulate": cmd_simulate, "validate": cmd_validate}
    sys.exit(commands[args.command](args))
