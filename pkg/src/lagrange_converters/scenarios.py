"""Run wiring for each circuit: inputs, schedulers, default run settings and R_o calibration."""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from lagrange_converters.circuits import (
    AMBIGUOUS_KEYS,
    BoostParams,
    IdealDiodeParams,
    LCParams,
    ParameterError,
    Params,
    RectifierParams,
    TwoSourceParams,
    build_circuit,
    default_params,
    parameter_values,
    switch_level_boost,
)
from lagrange_converters.derive import SwitchedModel, build_switched_model
from lagrange_converters.elcore import CircuitDescription, ModeVector
from lagrange_converters.reference import RECTIFIER_PRINTED_LABELS
from lagrange_converters.sim import (
    ConstantInput,
    DiodeComparator,
    InputSignal,
    Integrator,
    ModeScheduler,
    PwmComplementary,
    SimConfig,
    SquareWaveInput,
    averaged_dc_solve,
)

# Published steady-state operating point of the boost converter
TARGET_OUTPUT_VOLTAGE = 18.22
TARGET_INDUCTOR_CURRENT = 2.13

# Steps per switching or source period
STEPS_PER_PERIOD = 20000


@dataclass(frozen=True)
class Calibration:
    r_o: float
    v_out: float
    i_l: float


def _averaged_point(params: BoostParams, r_o: float) -> tuple[float, float]:
    model = build_switched_model(switch_level_boost(params.with_load(r_o)))
    x = averaged_dc_solve(model, params.duty, (params.v_i, params.diode.v_on))
    labels = model.state_labels
    return float(x[labels.index("v_c")]), float(x[labels.index("i")])


def calibrate_load(
    params: BoostParams,
    v_target: float = TARGET_OUTPUT_VOLTAGE,
    i_target: float = TARGET_INDUCTOR_CURRENT,
    bounds: tuple[float, float] = (1.0, 1000.0),
    samples: int = 61,
) -> Calibration:
    """Find R_o at which the averaged boost meets both targets as closely as possible.

    The averaged model is the switch-level boost built from the same
    parameters. The relative voltage and current errors move in opposite
    directions with R_o, so their sum has a single sign change; it is
    bracketed on a geometric grid and refined with Brent's method.

    Raises:
        ParameterError: If no sign change exists within ``bounds``.
    """

    def mismatch(r_o: float) -> float:
        v, i = _averaged_point(params, r_o)
        return (v - v_target) / v_target + (i - i_target) / i_target

    grid = np.geomspace(bounds[0], bounds[1], samples)
    values = [mismatch(r) for r in grid]
    for j in range(samples - 1):
        if values[j] == 0.0:
            root = float(grid[j])
            break
        if values[j] * values[j + 1] < 0.0:
            root = scipy.optimize.brentq(mismatch, grid[j], grid[j + 1], xtol=1e-12, rtol=1e-12)
            break
    else:
        raise ParameterError(
            f"Cannot calibrate R_o in [{bounds[0]}, {bounds[1]}] ohm against "
            f"{v_target} V / {i_target} A"
        )
    v, i = _averaged_point(params, root)
    return Calibration(float(root), v, i)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one circuit with its default run settings."""

    name: str
    params: Params
    circuit: CircuitDescription
    model: SwitchedModel
    inputs: InputSignal
    scheduler: ModeScheduler
    step: float
    t_end: float
    integrator: Integrator
    decimation: int
    period: float | None
    notes: Mapping[str, str] = field(default_factory=dict)
    # CSV state column order, when it differs from the model's
    csv_states: tuple[str, ...] | None = None

    def config(self, **overrides: object) -> SimConfig:
        """SimConfig from the defaults, with ``overrides`` applied."""
        values: dict[str, object] = {
            "t_end": self.t_end,
            "step": self.step,
            "integrator": self.integrator,
            "decimation": self.decimation,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SimConfig(**values)

    def metric_window(self, periods: int = 10, t_end: float | None = None) -> float:
        """The last ``periods`` periods, or the second half of a run without a period."""
        if self.period is None:
            return 0.5 * (self.t_end if t_end is None else t_end)
        return periods * self.period


def resolve_params(name: str, params: Params | None = None) -> tuple[Params, dict[str, str]]:
    """Fill in an unresolved boost load by calibration; describe the source of R_o."""
    params = params if params is not None else default_params(name)
    notes: dict[str, str] = {}
    if isinstance(params, BoostParams):
        if params.r_o is None:
            calibration = calibrate_load(params)
            params = params.with_load(calibration.r_o)
            notes["R_o"] = "calibrated"
        else:
            notes["R_o"] = "file"
    return params, notes


def parameter_notes(
    name: str,
    params: Params,
    overridden: frozenset[str] = frozenset(),
    sources: Mapping[str, str] | None = None,
) -> dict[str, str]:
    """``value (origin)`` for each ambiguous parameter; origin is default, file or calibrated."""
    sources = sources or {}
    values = parameter_values(params)
    notes = {}
    for key in AMBIGUOUS_KEYS.get(name, ()):
        source = sources.get(key, "file" if key in overridden else "default")
        notes[key] = f"{values[key]:.9g} ({source})"
    return notes


def build_scenario(
    name: str,
    params: Params | None = None,
    overridden: frozenset[str] = frozenset(),
    hysteresis: float = 1e-3,
    mode: ModeVector | str | None = None,
) -> Scenario:
    """Wire circuit ``name`` for simulation.

    Args:
        name: Circuit name.
        params: Parameter record; defaults to the published values.
        overridden: Parameter keys that came from a file, for the notes.
        hysteresis: Comparator hysteresis in volts.
        mode: Hold this mode (a ModeVector or ``bit=val,...`` text) for
            the whole run instead of the circuit's own switching rule.

    Returns:
        The scenario, with ``notes`` describing ambiguous parameters.

    Raises:
        ParameterError: If parameters are invalid or R_o cannot be calibrated.
        ReductionError: If a mode fails to reduce.
        UnknownModeError: If ``mode`` is not reachable.
    """
    params, sources = resolve_params(name, params)
    circuit = build_circuit(name, params)
    if isinstance(mode, str):
        mode = ModeVector.parse(mode, circuit.bit_names)
    model = build_switched_model(circuit)
    notes = parameter_notes(name, params, overridden, sources)

    period: float | None = None
    integrator = Integrator.TRAPEZOIDAL
    decimation = 100
    csv_states: tuple[str, ...] | None = None
    if isinstance(params, IdealDiodeParams):
        inputs: InputSignal = ConstantInput((params.v_i,))
        scheduler = ModeScheduler.fixed(ModeVector(("u",), (1,)))
        step, t_end = 1e-6, 0.05
    elif isinstance(params, TwoSourceParams):
        inputs = ConstantInput((params.e1, params.e2))
        scheduler = ModeScheduler.fixed(ModeVector((), ()))
        step, t_end = 1e-6, 0.01
    elif isinstance(params, LCParams):
        inputs = ConstantInput((params.e,))
        scheduler = ModeScheduler.fixed(ModeVector((), ()))
        step, t_end = 1e-6, 0.1
    elif isinstance(params, RectifierParams):
        inputs = SquareWaveInput(
            (0.0, params.diode.v_on), 0, params.source.amplitude, params.source.frequency
        )
        scheduler = ModeScheduler(
            ("u_d",), (DiodeComparator("u_d", "v_d", params.diode.v_on, hysteresis),)
        )
        period = params.source.period
        step, t_end = period / STEPS_PER_PERIOD, 20 * period
        decimation = 20
        csv_states = RECTIFIER_PRINTED_LABELS
    else:
        inputs = ConstantInput((params.v_i, params.diode.v_on))
        scheduler = ModeScheduler(
            ("u_m", "u_d"), (PwmComplementary(params.f_sw, params.duty, "u_m", "u_d"),)
        )
        period = params.period
        step, t_end = period / STEPS_PER_PERIOD, 500 * period

    if mode is not None:
        circuit.components(mode)
        scheduler = ModeScheduler.fixed(mode)
    return Scenario(
        name=name,
        params=params,
        circuit=circuit,
        model=model,
        inputs=inputs,
        scheduler=scheduler,
        step=step,
        t_end=t_end,
        integrator=integrator,
        decimation=decimation,
        period=period,
        notes=notes,
        csv_states=csv_states,
    )

