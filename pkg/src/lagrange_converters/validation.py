"""Validation suite comparing derived models and simulations against published results.

Each check is a named function over a ``ValidationContext`` returning a
``CheckResult``. The context holds the parameter records (published values
unless overridden) and caches the long simulation runs shared by several
checks.
"""

import dataclasses
import functools
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from lagrange_converters.circuits import (
    BOOST_MODES,
    BoostParams,
    LCParams,
    Params,
    build_circuit,
    default_params,
    hf_boost,
    hf_rectifier,
    ideal_diode_circuit,
    lc_circuit,
)
from lagrange_converters.derive import (
    ReducedModel,
    SwitchedModel,
    align,
    build_switched_model,
    erroneous_reference_model,
)
from lagrange_converters.elcore import (
    CircuitDescription,
    ModeVector,
    dissipation,
    energy_gradients,
    kinetic_energy,
    potential_energy,
)
from lagrange_converters.reference import (
    BOOST_PRINTED_LABELS,
    DIODE_DESCRIPTOR_LABELS,
    RECTIFIER_PRINTED_LABELS,
    RECTIFIER_TYPOS,
    boost_printed,
    diode_descriptor,
    rectifier_printed,
)
from lagrange_converters.scenarios import (
    TARGET_INDUCTOR_CURRENT,
    TARGET_OUTPUT_VOLTAGE,
    Scenario,
    build_scenario,
    resolve_params,
)
from lagrange_converters.sim import (
    ConfigError,
    ConstantInput,
    Integrator,
    ModeScheduler,
    SimConfig,
    SimulationError,
    SteadyStateMetrics,
    Trajectory,
    energy_residual,
    simulate,
    steady_state_metrics,
)

# Entries agree when |derived - printed| <= MATRIX_RTOL * (largest term entering the row)
MATRIX_RTOL = 1e-12

CONSERVATION_TOLERANCE = 1e-6
RK4_DRIFT_RANGE = (4e-6, 7e-6)
STEADY_STATE_TOLERANCE = 0.05
# Conducting boost diode: mean v_d over the MOSFET-off intervals
DIODE_FORWARD_VOLTAGE = 0.7
DIODE_FORWARD_BAND = 0.1
ENERGY_BALANCE_TOLERANCE = 1e-4
GRADIENT_TOLERANCE = 1e-6
GRADIENT_SAMPLES = 100
ORDER_RATIO = 12.0
INTEGRATOR_AGREEMENT = 1e-6

# Ideal boost output at d = 0.5 from 10 V
IDEAL_BOOST_OUTPUT = 20.0

RECTIFIER_SHORT_RUN = 3e-3
RECTIFIER_LONG_PERIODS = 60


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    notes: tuple[str, ...] = ()


class ValidationContext:
    """Parameters and cached runs shared by the checks.

    Args:
        overrides: Parameter records replacing the published values, by
            circuit name. Derivations and simulations use them; printed
            reference matrices always use the published values.
    """

    def __init__(self, overrides: Mapping[str, Params] | None = None) -> None:
        self.overrides = dict(overrides or {})

    def params(self, name: str) -> Params:
        return self.overrides.get(name, default_params(name))

    @functools.cached_property
    def published_boost(self) -> BoostParams:
        params, _ = resolve_params("hf-boost")
        return params

    def boost_params(self) -> BoostParams:
        """Boost parameters for derivation; an unresolved R_o takes the published one."""
        params = self.params("hf-boost")
        if params.r_o is None:
            params = params.with_load(self.published_boost.r_o)
        return params

    @functools.cached_property
    def boost_scenario(self) -> Scenario:
        return build_scenario("hf-boost", self.overrides.get("hf-boost"))

    @functools.cached_property
    def boost_run(self) -> Trajectory:
        scenario = self.boost_scenario
        return simulate(
            scenario.model, scenario.scheduler, scenario.inputs, scenario.config()
        )

    @functools.cached_property
    def rectifier_scenario(self) -> Scenario:
        return build_scenario("hf-rectifier", self.overrides.get("hf-rectifier"))

    @functools.cached_property
    def rectifier_short_run(self) -> Trajectory:
        scenario = self.rectifier_scenario
        cfg = scenario.config(
            t_end=RECTIFIER_SHORT_RUN, integrator=Integrator.EXACT, decimation=1
        )
        return simulate(scenario.model, scenario.scheduler, scenario.inputs, cfg)

    @functools.cached_property
    def rectifier_long_run(self) -> Trajectory:
        scenario = self.rectifier_scenario
        cfg = scenario.config(
            t_end=RECTIFIER_LONG_PERIODS * scenario.period,
            integrator=Integrator.EXACT,
            decimation=100,
        )
        return simulate(scenario.model, scenario.scheduler, scenario.inputs, cfg)


@dataclass(frozen=True)
class Check:
    name: str
    description: str
    run: Callable[[ValidationContext], CheckResult] = field(repr=False)


def _row_scales(circuit: CircuitDescription, mode: ModeVector, model: ReducedModel) -> dict[str, float]:
    """Largest term that enters each reduced row, for cancellation-aware comparison.

    A current row collects dissipation terms divided by the coordinate's
    inductance; a voltage row is a current scaled by the elastance.
    """
    comp = circuit.components(mode)
    scales: dict[str, float] = {}
    for k, label in enumerate(circuit.coords.current_labels):
        if label not in model.state_labels:
            continue
        inductance = max(c.mass[k, k] for c in circuit.modes.values())
        scales[label] = (float(np.max(np.abs(comp.dissipation[k]))) + 1.0) / inductance
    for label, elastance in zip(circuit.capacitor_labels, comp.elastance):
        scales[label] = float(elastance)
    return scales


def _mismatches(
    what: str,
    derived: np.ndarray,
    printed: np.ndarray,
    rows: Sequence[str],
    columns: Sequence[str],
    scales: Mapping[str, float],
    skip: frozenset[tuple[str, str]] = frozenset(),
) -> list[str]:
    found = []
    for i, row in enumerate(rows):
        for j, column in enumerate(columns):
            if (row, column) in skip:
                continue
            a, b = float(derived[i, j]), float(printed[i, j])
            scale = max(abs(a), abs(b), scales[row])
            if abs(a - b) > MATRIX_RTOL * scale:
                found.append(f"{what}[{row}, {column}]: derived {a:.9g}, printed {b:.9g}")
    return found


def check_boost_matrices(ctx: ValidationContext) -> CheckResult:
    """Derived H-F boost model against the printed A(u_d, u_m) and B(u_d)."""
    params = ctx.boost_params()
    published = ctx.published_boost
    if params.r_o != published.r_o:
        published = published.with_load(params.r_o)
    circuit = hf_boost(params)
    model = build_switched_model(circuit)
    problems: list[str] = []
    for mode in BOOST_MODES:
        a_ref, b_ref, labels = boost_printed(published, mode)
        _, a, b = align(model[mode], labels)
        scales = _row_scales(circuit, mode, model[mode])
        for text in _mismatches("A", a, a_ref, labels, labels, scales) + _mismatches(
            "B", b, b_ref, labels, model.input_labels, scales
        ):
            problems.append(f"mode {mode} {text}")
    if problems:
        return CheckResult("boost-matrices", False, f"{len(problems)} entries differ", tuple(problems))
    return CheckResult(
        "boost-matrices",
        True,
        f"2 modes x {len(BOOST_PRINTED_LABELS)} states match (R_o = {params.r_o:.6g} ohm)",
    )


def check_rectifier_matrices(ctx: ValidationContext) -> CheckResult:
    """Derived H-F rectifier model against the printed A(u), B(u), misprints flagged."""
    params = ctx.params("hf-rectifier")
    published = default_params("hf-rectifier")
    circuit = hf_rectifier(params)
    model = build_switched_model(circuit)
    typo_entries = frozenset((t.row, t.column) for t in RECTIFIER_TYPOS)
    labels = RECTIFIER_PRINTED_LABELS
    problems: list[str] = []
    for u in (0, 1):
        mode = ModeVector(("u_d",), (u,))
        a_ref, b_ref, _ = rectifier_printed(published, u)
        _, a, b = align(model[mode], labels)
        scales = _row_scales(circuit, mode, model[mode])
        for text in _mismatches("A", a, a_ref, labels, labels, scales, typo_entries) + _mismatches(
            "B", b, b_ref, labels, model.input_labels, scales
        ):
            problems.append(f"mode {mode} {text}")
        for typo in RECTIFIER_TYPOS:
            i, j = labels.index(typo.row), labels.index(typo.column)
            expected = typo.derived(params)
            if abs(a[i, j] - expected) > MATRIX_RTOL * max(abs(expected), scales[typo.row]):
                problems.append(
                    f"mode {mode} A[{typo.row}, {typo.column}]: derived {a[i, j]:.9g}, "
                    f"expected {typo.derived_text} = {expected:.9g}"
                )
    notes = tuple(f"misprint: {typo.describe(published)}" for typo in RECTIFIER_TYPOS)
    if problems:
        return CheckResult("rectifier-matrices", False, f"{len(problems)} entries differ", tuple(problems) + notes)
    return CheckResult(
        "rectifier-matrices",
        True,
        f"2 modes match except {len(RECTIFIER_TYPOS)} documented misprints",
        notes,
    )


def check_diode_descriptor(ctx: ValidationContext) -> CheckResult:
    """Ideal-diode descriptor model, and where the u-substituted model goes wrong."""
    params = ctx.params("ideal-diode")
    circuit = ideal_diode_circuit(params)
    model = build_switched_model(circuit)
    erroneous = erroneous_reference_model(params.l_s, params.r_s, params.r, params.c)
    labels = DIODE_DESCRIPTOR_LABELS
    problems: list[str] = []
    notes: list[str] = []
    for u in (0, 1):
        mode = ModeVector(("u",), (u,))
        reduced = model[mode]
        e_ref, a_ref, b_ref = diode_descriptor(params, u)
        e, a, b = align(reduced, labels)
        scales = _row_scales(circuit, mode, reduced)
        if not np.array_equal(e, e_ref):
            problems.append(f"mode {mode}: E = {e.tolist()}, expected {e_ref.tolist()}")
        if reduced.is_regular != (u == 1):
            problems.append(f"mode {mode}: model kind is {reduced.kind.value}")
        problems.extend(f"mode {mode} {t}" for t in _mismatches("A", a, a_ref, labels, labels, scales))
        problems.extend(f"mode {mode} {t}" for t in _mismatches("B", b, b_ref, labels, ("V_i",), scales))

        _, a_err, b_err = align(erroneous[mode], labels)
        differences = _mismatches("A", a_err, a_ref, labels, labels, scales) + _mismatches(
            "B", b_err, b_ref, labels, ("V_i",), scales
        )
        if u == 1 and differences:
            problems.extend(f"u-substituted model at {mode} {t}" for t in differences)
        if u == 0:
            if not differences:
                problems.append("u-substituted model unexpectedly agrees at u=0")
            notes.extend(f"u-substituted model at {mode} {t}" for t in differences)
    if problems:
        return CheckResult("diode-descriptor", False, f"{len(problems)} problems", tuple(problems + notes))
    return CheckResult(
        "diode-descriptor",
        True,
        "E = diag(0, 1) at u=0; the u-substituted model differs only at u=0",
        tuple(notes),
    )


def _lc_run(params: LCParams, integrator: Integrator) -> Trajectory:
    model = build_switched_model(lc_circuit(params))
    cfg = SimConfig(
        t_end=0.1, step=1e-6, integrator=integrator, x0={"i_L1": 1.0}, decimation=100
    )
    mode = ModeVector((), ())
    return simulate(model, ModeScheduler.fixed(mode), ConstantInput((0.0,)), cfg)


def check_lc_conservation(ctx: ValidationContext) -> CheckResult:
    """Stored energy of the lossless LC circuit over 1e5 steps.

    The conservation limit binds trapezoidal and exact only; RK4 is
    dissipative on this oscillator and must drift by its analytic amount.
    """
    params = dataclasses.replace(ctx.params("lc"), e=0.0)
    lines = []
    passed = True
    for integrator in Integrator:
        tr = _lc_run(params, integrator)
        e0 = float(tr.stored[0])
        drift = float(np.max(np.abs(tr.stored - e0))) / e0
        if integrator is Integrator.RK4:
            low, high = RK4_DRIFT_RANGE
            ok = low <= drift <= high
            lines.append(f"{integrator.value}: drift {drift:.3g} (expected in [{low:g}, {high:g}])")
        else:
            ok = drift <= CONSERVATION_TOLERANCE
            lines.append(f"{integrator.value}: drift {drift:.3g} (limit {CONSERVATION_TOLERANCE:g})")
        passed = passed and ok
    note = (
        f"the {CONSERVATION_TOLERANCE:g} conservation limit is not applied to rk4; "
        "its drift is checked against the analytic range instead"
    )
    return CheckResult("lc-conservation", passed, "; ".join(lines), (note,))


def _boost_metrics(ctx: ValidationContext) -> SteadyStateMetrics:
    scenario = ctx.boost_scenario
    return steady_state_metrics(ctx.boost_run, scenario.metric_window())


def check_boost_steady_state(ctx: ValidationContext) -> CheckResult:
    """Mean output voltage and inductor current against the published steady state."""
    metrics = _boost_metrics(ctx)
    v_out, i_l = metrics.mean["v_c"], metrics.mean["i"]
    v_err = abs(v_out - TARGET_OUTPUT_VOLTAGE) / TARGET_OUTPUT_VOLTAGE
    i_err = abs(i_l - TARGET_INDUCTOR_CURRENT) / TARGET_INDUCTOR_CURRENT
    passed = (
        v_err <= STEADY_STATE_TOLERANCE
        and i_err <= STEADY_STATE_TOLERANCE
        and v_out < IDEAL_BOOST_OUTPUT
    )
    params = ctx.boost_scenario.params
    return CheckResult(
        "boost-steady-state",
        passed,
        f"v_c = {v_out:.4f} V ({v_err:.2%} off), i = {i_l:.4f} A ({i_err:.2%} off), "
        f"R_o = {params.r_o:.6g} ohm",
    )


def check_boost_diode_voltage(ctx: ValidationContext) -> CheckResult:
    """Diode voltage near -v_c with the MOSFET on, within 0.7 V ± 0.1 V otherwise.

    The conducting diode sits at V_d_on + R_d_on i, so a mean outside the
    forward band passes only when removing that ohmic drop brings it back
    inside; the result then carries a deviation note with both values.
    """
    metrics = _boost_metrics(ctx)
    params = ctx.boost_scenario.params
    on, off = BOOST_MODES
    if on not in metrics.mode_mean or off not in metrics.mode_mean:
        return CheckResult("boost-diode-voltage", False, "window does not contain both modes")
    v_c = metrics.mean["v_c"]
    v_on = metrics.mode_mean[on]["v_d"]
    v_off = metrics.mode_mean[off]["v_d"]
    drop = params.diode.r_on * metrics.mode_mean[off]["i"]
    low, high = DIODE_FORWARD_VOLTAGE - DIODE_FORWARD_BAND, DIODE_FORWARD_VOLTAGE + DIODE_FORWARD_BAND
    detail = (
        f"mean v_d: {v_on:.4f} V with u_m=1 (v_c = {v_c:.4f} V), {v_off:.4f} V with u_m=0"
    )
    blocking = -1.1 * v_c <= v_on <= -0.9 * v_c
    if not blocking:
        return CheckResult(
            "boost-diode-voltage", False, f"{detail}; u_m=1 mean outside [-1.1 v_c, -0.9 v_c]"
        )
    if low <= v_off <= high:
        return CheckResult("boost-diode-voltage", True, detail)
    band = f"u_m=0 mean outside {DIODE_FORWARD_VOLTAGE:g} V ± {DIODE_FORWARD_BAND:g} V"
    if not low <= v_off - drop <= high:
        return CheckResult("boost-diode-voltage", False, f"{detail}; {band}")
    note = (
        f"deviation: u_m=0 mean v_d {v_off:.4f} V is outside {low:g}-{high:g} V; "
        f"it includes the ohmic drop R_d_on*i = {drop:.4f} V, without which it is "
        f"{v_off - drop:.4f} V"
    )
    return CheckResult("boost-diode-voltage", True, f"{detail}; {band} by its R_d_on drop", (note,))


def _local_minima(values: np.ndarray) -> np.ndarray:
    inner = (values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])
    return np.flatnonzero(inner) + 1


def _turn_off_ringing(tr: Trajectory) -> list[str]:
    """Problems with the v_d transient after each diode turn-off, if any."""
    problems = []
    v_d = tr.column("v_d")
    events = [(t, value) for t, bit, value in tr.events if bit == "u_d"]
    offs = [(i, t) for i, (t, value) in enumerate(events) if value == 0]
    if not offs:
        return ["no diode turn-off in the run"]
    for i, t_off in offs:
        t_next = next((t for t, value in events[i + 1:] if value == 1), float(tr.time[-1]))
        window = np.flatnonzero((tr.time > t_off) & (tr.time <= t_next))
        if window.size < 3:
            continue
        segment = v_d[window]
        minima = _local_minima(segment)
        if minima.size < 2:
            problems.append(f"turn-off at {t_off:.6g} s: no oscillation")
            continue
        if int(np.argmin(segment)) != int(minima[0]):
            problems.append(f"turn-off at {t_off:.6g} s: extremum is not the first swing")
        if segment[minima[1]] <= segment[minima[0]]:
            problems.append(f"turn-off at {t_off:.6g} s: oscillation does not decay")
    return problems


def _period_means(tr: Trajectory, label: str, period: float) -> list[float]:
    values = tr.column(label)
    count = int(round(float(tr.time[-1]) / period))
    means = []
    for k in range(count):
        mask = (tr.time >= k * period) & (tr.time < (k + 1) * period)
        if np.any(mask):
            means.append(float(np.mean(values[mask])))
    return means


def check_rectifier_behaviour(ctx: ValidationContext) -> CheckResult:
    """Decaying ringing after turn-off and monotonic capacitor voltage buildup."""
    problems = _turn_off_ringing(ctx.rectifier_short_run)
    means = _period_means(ctx.rectifier_long_run, "v_c", ctx.rectifier_scenario.period)
    final = means[-1]
    for k in range(len(means) - 1):
        if means[k] >= 0.98 * final:
            break
        if means[k + 1] < means[k]:
            problems.append(f"v_c period mean falls in period {k + 1}: {means[k]:.6g} -> {means[k + 1]:.6g} V")
    detail = f"v_c period means rise to {final:.4f} V over {len(means)} periods"
    if problems:
        return CheckResult("rectifier-behaviour", False, detail, tuple(problems))
    return CheckResult("rectifier-behaviour", True, detail)


def check_energy_balance(ctx: ValidationContext) -> CheckResult:
    """Stored, delivered and dissipated energy balance for the H-F runs."""
    lines = []
    passed = True
    for name, tr in (("hf-boost", ctx.boost_run), ("hf-rectifier", ctx.rectifier_long_run)):
        peak = float(np.max(tr.stored))
        worst = float(np.max(np.abs(energy_residual(tr))))
        ratio = worst / peak
        passed = passed and ratio <= ENERGY_BALANCE_TOLERANCE
        lines.append(f"{name}: max residual {worst:.3g} J = {ratio:.3g} x peak stored")
    return CheckResult("energy-balance", passed, "; ".join(lines))


def _central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    grad = np.empty_like(x)
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = step
        grad[i] = (f(x + dx) - f(x - dx)) / (2.0 * step)
    return grad


def _relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    scale = float(np.max(np.abs(exact)))
    if scale == 0.0:
        return float(np.max(np.abs(approx)))
    return float(np.max(np.abs(approx - exact))) / scale


def check_gradients(ctx: ValidationContext) -> CheckResult:
    """Energy gradients against central finite differences at random points."""
    rng = np.random.default_rng(20240601)
    worst = 0.0
    where = ""
    for name in ("ideal-diode", "two-source", "lc", "hf-rectifier", "hf-boost", "boost"):
        params = ctx.boost_params() if name in ("hf-boost", "boost") else ctx.params(name)
        circuit = build_circuit(name, params)
        for mode, comp in circuit.modes.items():
            n, p = comp.size, len(comp.input_names)
            for _ in range(GRADIENT_SAMPLES):
                q, qdot, w = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(p)
                d_t, d_v, d_d = energy_gradients(comp, q, qdot, w)
                numeric = (
                    _central_difference(lambda v: kinetic_energy(comp, v), qdot, 1e-4),
                    _central_difference(lambda v: potential_energy(comp, v, w), q, 1e-4),
                    _central_difference(lambda v: dissipation(comp, v), qdot, 1e-4),
                )
                for label, approx, exact in zip(("dT/dq'", "dV/dq", "dD/dq'"), numeric, (d_t, d_v, d_d)):
                    error = _relative_error(approx, exact)
                    if error > worst:
                        worst, where = error, f"{name} mode {mode} {label}"
    detail = f"max relative error {worst:.3g}" + (f" ({where})" if where else "")
    return CheckResult("gradients", worst <= GRADIENT_TOLERANCE, detail)


def _segment_end(model: SwitchedModel, mode: ModeVector, integrator: Integrator, h: float) -> np.ndarray:
    cfg = SimConfig(
        t_end=2e-6,
        step=h,
        integrator=integrator,
        x0={"i": 1.0, "v_d": -5.0, "i_Lc": 0.5, "v_c": 5.0},
        decimation=10**9,
    )
    tr = simulate(model, ModeScheduler.fixed(mode), ConstantInput((12.0, 0.7)), cfg)
    return tr.states[-1]


def check_integrator_order(ctx: ValidationContext) -> CheckResult:
    """RK4 convergence order and trapezoidal/exact agreement on one rectifier mode.

    Uses L_c = 10 uH so RK4 is stable at steps where its truncation error
    dominates round-off.
    """
    params = ctx.params("hf-rectifier")
    params = dataclasses.replace(
        params, capacitor=dataclasses.replace(params.capacitor, l_c=10e-6)
    )
    model = build_switched_model(hf_rectifier(params))
    mode = ModeVector(("u_d",), (0,))
    exact = _segment_end(model, mode, Integrator.EXACT, 1e-8)
    coarse = _relative_error(_segment_end(model, mode, Integrator.RK4, 1e-8), exact)
    fine = _relative_error(_segment_end(model, mode, Integrator.RK4, 5e-9), exact)
    trapezoidal = _relative_error(_segment_end(model, mode, Integrator.TRAPEZOIDAL, 1e-10), exact)
    ratio = coarse / fine if fine > 0.0 else float("inf")
    passed = ratio >= ORDER_RATIO and trapezoidal <= INTEGRATOR_AGREEMENT
    return CheckResult(
        "integrator-order",
        passed,
        f"RK4 error {coarse:.3g} -> {fine:.3g} when h halves (ratio {ratio:.1f}); "
        f"trapezoidal vs exact {trapezoidal:.3g}",
    )


CHECKS: tuple[Check, ...] = (
    Check("boost-matrices", "H-F boost A, B match the printed matrices", check_boost_matrices),
    Check("rectifier-matrices", "H-F rectifier A, B match the printed matrices", check_rectifier_matrices),
    Check("diode-descriptor", "Ideal-diode descriptor model at u=0", check_diode_descriptor),
    Check("lc-conservation", "LC circuit energy conservation", check_lc_conservation),
    Check("boost-steady-state", "Boost steady state at 18.22 V / 2.13 A", check_boost_steady_state),
    Check("boost-diode-voltage", "Boost diode voltage per switch state", check_boost_diode_voltage),
    Check("rectifier-behaviour", "Rectifier ringing and voltage buildup", check_rectifier_behaviour),
    Check("energy-balance", "Energy balance of the H-F runs", check_energy_balance),
    Check("gradients", "Energy gradients vs finite differences", check_gradients),
    Check("integrator-order", "Integrator order and agreement", check_integrator_order),
)

CHECK_NAMES = tuple(check.name for check in CHECKS)


def run_checks(
    names: Sequence[str] | None = None,
    context: ValidationContext | None = None,
    progress: Callable[[str], None] | None = None,
) -> list[CheckResult]:
    """Run the named checks (all by default) in registry order.

    A check that raises a derivation, configuration or simulation error is
    reported as failed with the error message.

    Raises:
        ConfigError: If a name is not a registered check.
    """
    if names:
        unknown = sorted(set(names) - set(CHECK_NAMES))
        if unknown:
            raise ConfigError(
                f"Unknown check(s): {', '.join(unknown)}. Valid options: {', '.join(CHECK_NAMES)}"
            )
    context = context or ValidationContext()
    results = []
    for check in CHECKS:
        if names and check.name not in names:
            continue
        if progress is not None:
            progress(check.name)
        try:
            results.append(check.run(context))
        except (ValueError, SimulationError) as e:
            results.append(CheckResult(check.name, False, f"{type(e).__name__}: {e}"))
    return results
