"""Unit tests for the simulation engine."""

import csv
import io
import math

import numpy as np
import pytest

from lagrange_converters.circuits import (
    BoostParams,
    IdealDiodeParams,
    LCParams,
    ideal_diode_circuit,
    lc_circuit,
    switch_level_boost,
)
from lagrange_converters.derive import ReducedModel, build_switched_model
from lagrange_converters.elcore import ModeVector
from lagrange_converters.sim import (
    ConfigError,
    ConstantInput,
    DiodeComparator,
    EventLocationError,
    Integrator,
    ModeScheduler,
    PwmComplementary,
    SimConfig,
    SimulationError,
    SquareWaveInput,
    Trajectory,
    averaged_dc_solve,
    energy_residual,
    export_csv,
    locate_event,
    mode_at,
    simulate,
    steady_state_metrics,
    step,
)

U1 = ModeVector(("u",), (1,))
NO_SWITCH = ModeVector((), ())


def decay_model() -> ReducedModel:
    """x' = -x + w."""
    return ReducedModel.regular([[-1.0]], [[1.0]])


def lc_run(integrator: Integrator = Integrator.TRAPEZOIDAL, **cfg: object) -> Trajectory:
    settings: dict[str, object] = {
        "t_end": 2e-3, "step": 1e-6, "integrator": integrator, "x0": {"i_L1": 1.0},
    }
    settings.update(cfg)
    model = build_switched_model(lc_circuit())
    return simulate(model, ModeScheduler.fixed(NO_SWITCH), ConstantInput((0.0,)), SimConfig(**settings))


def boost_pwm(step_size: float) -> tuple[object, ModeScheduler, ConstantInput, SimConfig]:
    p = BoostParams(r_o=20.0)
    model = build_switched_model(switch_level_boost(p))
    sched = ModeScheduler(("u_m", "u_d"), (PwmComplementary(p.f_sw, p.duty, "u_m", "u_d"),))
    return model, sched, ConstantInput((p.v_i, p.diode.v_on)), SimConfig(t_end=3 * p.period, step=step_size)


@pytest.mark.unit
class TestStep:
    """Tests for single-step integration."""

    def test_exact_decay(self) -> None:
        """The exact integrator reproduces e^-h."""
        assert step(decay_model(), [1.0], [0.0], 0.1, Integrator.EXACT)[0] == pytest.approx(math.exp(-0.1))

    def test_trapezoidal_decay(self) -> None:
        """Trapezoidal gives the Cayley factor."""
        result = step(decay_model(), [1.0], [0.0], 0.1, "trapezoidal")
        assert result[0] == pytest.approx(0.95 / 1.05)

    def test_rk4_decay(self) -> None:
        """RK4 matches the fourth-order Taylor polynomial."""
        h = 0.1
        expected = 1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24
        assert step(decay_model(), [1.0], [0.0], h, Integrator.RK4)[0] == pytest.approx(expected)

    def test_exact_with_constant_input(self) -> None:
        """A held input charges towards its value."""
        result = step(decay_model(), [0.0], [2.0], 0.5, Integrator.EXACT)
        assert result[0] == pytest.approx(2.0 * (1 - math.exp(-0.5)))

    def test_descriptor_rejected(self) -> None:
        """Descriptor models cannot be stepped."""
        model = build_switched_model(ideal_diode_circuit())[ModeVector(("u",), (0,))]
        with pytest.raises(SimulationError, match="Descriptor"):
            step(model, [0.0, 0.0], [12.0], 1e-6)


@pytest.mark.unit
class TestConfiguration:
    """Tests for SimConfig and scheduler rules."""

    def test_rejects_nonpositive_t_end(self) -> None:
        """t_end must be positive."""
        with pytest.raises(ConfigError, match="t_end must be positive"):
            SimConfig(t_end=0.0, step=1e-6)

    def test_integrator_from_text(self) -> None:
        """Integrator names are accepted as strings."""
        assert SimConfig(t_end=1.0, step=0.1, integrator="rk4").integrator is Integrator.RK4

    def test_invalid_integrator(self) -> None:
        """Unknown integrators list the valid options."""
        with pytest.raises(ConfigError, match="Valid options: rk4, trapezoidal, exact"):
            SimConfig(t_end=1.0, step=0.1, integrator="euler")

    def test_invalid_decimation(self) -> None:
        """Decimation is a positive integer."""
        with pytest.raises(ConfigError, match="decimation"):
            SimConfig(t_end=1.0, step=0.1, decimation=0)

    def test_default_event_tolerance(self) -> None:
        """Event tolerance defaults to a thousandth of the step."""
        assert SimConfig(t_end=1.0, step=0.1).event_tolerance == pytest.approx(1e-4)

    def test_step_count_rounds_up(self) -> None:
        """The step count covers t_end."""
        assert SimConfig(t_end=0.1, step=1e-6).n_steps == 100000
        assert SimConfig(t_end=0.25, step=0.1).n_steps == 3

    def test_pwm_validation(self) -> None:
        """Duty lies in (0, 1)."""
        with pytest.raises(ConfigError, match="duty"):
            PwmComplementary(50e3, 0.0, "u_m", "u_d")

    def test_pwm_master_on(self) -> None:
        """The master conducts for the first part of the period."""
        pwm = PwmComplementary(1e3, 0.25, "a", "b")
        assert pwm.master_on(0.0) == 1
        assert pwm.master_on(0.3e-3) == 0
        assert pwm.master_on(1.1e-3) == 1

    def test_comparator_hysteresis(self) -> None:
        """Inside the band the previous bit is held."""
        rule = DiodeComparator("u_d", "v_d", 0.7, 0.1)
        assert rule.decide(0.8, 0) == 1
        assert rule.decide(0.6, 1) == 0
        assert rule.decide(0.7, 0) == 0
        assert rule.decide(0.7, 1) == 1
        assert rule.decide(0.7, None) == 1

    def test_scheduler_duplicate_bits(self) -> None:
        """A bit cannot be governed twice."""
        with pytest.raises(ConfigError, match="more than one rule"):
            ModeScheduler(
                ("a", "b"),
                (PwmComplementary(1e3, 0.5, "a", "b"), DiodeComparator("a", "v", 0.0)),
            )

    def test_scheduler_missing_bits(self) -> None:
        """Every bit must be governed."""
        with pytest.raises(ConfigError, match="missing"):
            ModeScheduler(("a", "b"), (DiodeComparator("a", "v", 0.0),))

    def test_reachable_pwm_modes(self) -> None:
        """A complementary pair reaches two modes."""
        sched = ModeScheduler(("a", "b"), (PwmComplementary(1e3, 0.5, "a", "b"),))
        assert sched.reachable() == [
            ModeVector(("a", "b"), (1, 0)), ModeVector(("a", "b"), (0, 1)),
        ]

    def test_mode_at(self) -> None:
        """Scheduler evaluation combines PWM and comparator bits."""
        sched = ModeScheduler(
            ("a", "b", "d"),
            (PwmComplementary(1e3, 0.5, "a", "b"), DiodeComparator("d", "v", 0.7)),
        )
        mode = mode_at(sched, 0.6e-3, {"v": 1.0})
        assert mode == ModeVector(("a", "b", "d"), (0, 1, 1))

    def test_mode_at_missing_state(self) -> None:
        """Comparators need their monitored state."""
        sched = ModeScheduler(("d",), (DiodeComparator("d", "v", 0.7),))
        with pytest.raises(ConfigError, match="Monitored state v"):
            mode_at(sched, 0.0, {})

    def test_square_wave_input(self) -> None:
        """The wave starts positive and changes every half period."""
        wave = SquareWaveInput((0.0, 0.7), 0, 12.0, 1e3)
        np.testing.assert_array_equal(wave(0.0), [12.0, 0.7])
        np.testing.assert_array_equal(wave(0.7e-3), [-12.0, 0.7])
        assert wave.next_change(0.0) == pytest.approx(0.5e-3)
        assert wave.next_change(0.5e-3) == pytest.approx(1e-3)


@pytest.mark.unit
class TestEventLocation:
    """Tests for locate_event."""

    def test_bisects_to_tolerance(self) -> None:
        """The located time lies just after the true crossing."""
        rule = DiodeComparator("u", "v", 0.7, 0.0)
        t = locate_event(rule, 1, lambda tau: 1.0 - tau * 1e6, 1e-3, 1e-6, 1e-12)
        assert 1e-3 + 0.3e-6 <= t <= 1e-3 + 0.3e-6 + 2e-12

    def test_no_crossing(self) -> None:
        """An interval without a crossing is an error."""
        rule = DiodeComparator("u", "v", 0.7, 0.0)
        with pytest.raises(EventLocationError, match="No crossing"):
            locate_event(rule, 1, lambda tau: 1.0, 0.0, 1e-6, 1e-9)


@pytest.mark.unit
class TestSimulate:
    """Tests for simulate."""

    def test_lc_trapezoidal_conserves_energy(self) -> None:
        """The lossless LC keeps its stored energy under trapezoidal steps."""
        tr = lc_run()
        assert tr.stored[0] == pytest.approx(0.5e-3)
        assert np.max(np.abs(tr.stored - tr.stored[0])) < 1e-9 * tr.stored[0]
        assert np.max(np.abs(tr.dissipated)) == 0.0

    def test_samples_follow_decimation(self) -> None:
        """Samples every decimation steps plus the final step."""
        tr = lc_run(t_end=1e-4, step=1e-6, decimation=30)
        np.testing.assert_allclose(tr.time, [0.0, 30e-6, 60e-6, 90e-6, 100e-6])

    def test_rc_settles_to_divider(self) -> None:
        """A conducting ideal diode settles at the resistive divider."""
        p = IdealDiodeParams()
        model = build_switched_model(ideal_diode_circuit(p))
        cfg = SimConfig(t_end=0.1, step=1e-5, integrator=Integrator.EXACT, decimation=100)
        tr = simulate(model, ModeScheduler.fixed(U1), ConstantInput((p.v_i,)), cfg)
        total = p.r_s + p.r
        assert tr.column("v_C")[-1] == pytest.approx(p.v_i * p.r / total, rel=1e-6)
        assert tr.column("i_L")[-1] == pytest.approx(p.v_i / total, rel=1e-6)
        residual = energy_residual(tr)
        assert np.max(np.abs(residual)) < 1e-8 * tr.source[-1]

    def test_pwm_modes_follow_duty(self) -> None:
        """Sampled modes follow the PWM step grid."""
        model, sched, inputs, cfg = boost_pwm(2e-7)
        tr = simulate(model, sched, inputs, cfg)
        np.testing.assert_array_equal(tr.column("u_m")[:100], [1] * 50 + [0] * 50)
        np.testing.assert_array_equal(tr.column("u_d")[:100], [0] * 50 + [1] * 50)
        assert tr.bit_names == ("u_m", "u_d")
        assert len(tr) == 301

    def test_pwm_off_grid(self) -> None:
        """The switching period must be a whole number of steps."""
        model, sched, inputs, cfg = boost_pwm(3e-7)
        with pytest.raises(SimulationError, match="whole number of steps"):
            simulate(model, sched, inputs, cfg)

    def test_unknown_initial_state(self) -> None:
        """Initial-state labels must be model states."""
        with pytest.raises(ConfigError, match="i_X"):
            lc_run(x0={"i_X": 1.0})

    def test_scheduler_bits_must_match(self) -> None:
        """The scheduler governs exactly the model's bits."""
        model = build_switched_model(lc_circuit())
        with pytest.raises(ConfigError, match="do not match"):
            simulate(model, ModeScheduler.fixed(U1), ConstantInput((0.0,)), SimConfig(1e-3, 1e-6))

    def test_descriptor_mode_rejected(self) -> None:
        """Holding a descriptor mode is a simulation error at t=0."""
        model = build_switched_model(ideal_diode_circuit())
        sched = ModeScheduler.fixed(ModeVector(("u",), (0,)))
        with pytest.raises(SimulationError, match="descriptor model") as info:
            simulate(model, sched, ConstantInput((12.0,)), SimConfig(1e-3, 1e-6))
        assert info.value.time == 0.0

    def test_metadata_is_copied(self) -> None:
        """Metadata travels with the trajectory."""
        model = build_switched_model(lc_circuit(LCParams(e=1.0)))
        tr = simulate(
            model,
            ModeScheduler.fixed(NO_SWITCH),
            ConstantInput((1.0,)),
            SimConfig(1e-5, 1e-6),
            {"circuit": "lc"},
        )
        assert tr.metadata["circuit"] == "lc"


@pytest.mark.unit
class TestOutputs:
    """Tests for CSV export, metrics and averaging."""

    def test_export_csv(self) -> None:
        """Columns are time, states, bits and energies."""
        tr = lc_run(t_end=1e-5, step=1e-6)
        stream = io.StringIO()
        export_csv(tr, stream)
        rows = list(csv.reader(io.StringIO(stream.getvalue())))
        assert rows[0] == ["t", "i_L1", "i_L2", "v_C1", "E_stored", "E_source", "E_diss"]
        assert len(rows) == len(tr) + 1
        assert float(rows[-1][1]) == tr.states[-1, 0]
        assert "\r" not in stream.getvalue()

    def test_export_csv_state_order(self) -> None:
        """A given state order permutes the state columns only."""
        tr = lc_run(t_end=1e-5, step=1e-6)
        stream = io.StringIO()
        export_csv(tr, stream, ("v_C1", "i_L1", "i_L2"))
        rows = list(csv.reader(io.StringIO(stream.getvalue())))
        assert rows[0] == ["t", "v_C1", "i_L1", "i_L2", "E_stored", "E_source", "E_diss"]
        assert float(rows[-1][1]) == tr.states[-1, 2]
        assert float(rows[-1][2]) == tr.states[-1, 0]
        assert float(rows[-1][4]) == tr.stored[-1]

    def test_export_csv_rejects_unknown_order(self) -> None:
        """The state order must be a permutation of the labels."""
        tr = lc_run(t_end=1e-5, step=1e-6)
        with pytest.raises(ConfigError, match="does not match states"):
            export_csv(tr, io.StringIO(), ("i_L1", "v_C1"))

    def test_export_csv_with_bits(self) -> None:
        """Mode bits sit between the states and the energies."""
        model, sched, inputs, cfg = boost_pwm(2e-7)
        tr = simulate(model, sched, inputs, cfg)
        stream = io.StringIO()
        export_csv(tr, stream)
        lines = stream.getvalue().splitlines()
        assert lines[0] == "t,i,v_c,u_m,u_d,E_stored,E_source,E_diss"
        assert lines[1].split(",")[3:5] == ["1", "0"]

    def test_steady_state_metrics(self) -> None:
        """Samples are attributed to the mode of the previous sample."""
        tr = Trajectory(
            state_labels=("x",),
            bit_names=("u",),
            time=np.arange(5.0),
            states=np.arange(5.0).reshape(-1, 1),
            modes=np.array([[1], [0], [1], [0], [1]], dtype=np.int8),
            stored=np.zeros(5),
            source=np.zeros(5),
            dissipated=np.zeros(5),
        )
        metrics = steady_state_metrics(tr, 2.0)
        assert metrics.mean["x"] == pytest.approx(3.5)
        assert metrics.ripple["x"] == pytest.approx(1.0)
        on, off = ModeVector(("u",), (1,)), ModeVector(("u",), (0,))
        assert metrics.dwell == {on: 0.5, off: 0.5}
        assert metrics.mode_mean[on]["x"] == 3.0
        assert metrics.mode_mean[off]["x"] == 4.0

    def test_metrics_window_shorter_than_spacing(self) -> None:
        """A window narrower than one sample still covers the final sample."""
        tr = Trajectory(
            state_labels=("x",),
            bit_names=("u",),
            time=np.arange(5.0),
            states=np.arange(5.0).reshape(-1, 1),
            modes=np.array([[1], [0], [1], [0], [1]], dtype=np.int8),
            stored=np.zeros(5),
            source=np.zeros(5),
            dissipated=np.zeros(5),
        )
        metrics = steady_state_metrics(tr, 0.5)
        assert metrics.mean["x"] == 4.0
        assert metrics.ripple["x"] == 0.0
        assert metrics.dwell == {ModeVector(("u",), (0,)): 1.0}

    def test_metrics_on_two_sample_run(self) -> None:
        """Half of a run decimated to its end points yields the last sample."""
        tr = lc_run(t_end=1e-4, step=1e-6, decimation=100)
        assert len(tr) == 2
        metrics = steady_state_metrics(tr, 5e-5)
        assert metrics.mean["i_L1"] == tr.states[-1, 0]

    def test_metrics_window_too_long(self) -> None:
        """The window cannot exceed the run."""
        tr = lc_run(t_end=1e-5, step=1e-6)
        with pytest.raises(ConfigError, match="exceeds"):
            steady_state_metrics(tr, 1.0)

    def test_metrics_window_positive(self) -> None:
        """The window must be positive."""
        tr = lc_run(t_end=1e-5, step=1e-6)
        with pytest.raises(ConfigError, match="positive"):
            steady_state_metrics(tr, 0.0)

    def test_energy_residual_starts_at_zero(self) -> None:
        """The residual is measured from the initial stored energy."""
        tr = lc_run(t_end=1e-5, step=1e-6)
        assert energy_residual(tr)[0] == 0.0

    @pytest.mark.parametrize("integrator", list(Integrator))
    def test_dissipated_energy_never_decreases(self, integrator: Integrator) -> None:
        """Accumulated dissipation is monotone across PWM switching."""
        model, sched, inputs, cfg = boost_pwm(2e-7)
        cfg = SimConfig(t_end=cfg.t_end, step=cfg.step, integrator=integrator)
        tr = simulate(model, sched, inputs, cfg)
        assert tr.dissipated[0] == 0.0
        assert np.all(np.diff(tr.dissipated) >= 0.0)
        assert tr.dissipated[-1] > 0.0

    def test_averaged_dc_solve(self) -> None:
        """The averaged operating point is an equilibrium of the averaged model."""
        p = BoostParams(r_o=20.0)
        model = build_switched_model(switch_level_boost(p))
        w = np.array([p.v_i, p.diode.v_on])
        x = averaged_dc_solve(model, p.duty, w)
        on, off = (model[m] for m in model.modes)
        a = 0.5 * (on.a + off.a)
        b = 0.5 * (on.b + off.b)
        np.testing.assert_allclose(a @ x + b @ w, 0.0, atol=1e-6)
        assert 0.0 < x[model.state_labels.index("v_c")] < p.v_i / (1 - p.duty)

    def test_averaged_dc_solve_needs_two_modes(self) -> None:
        """Single-mode models cannot be averaged."""
        with pytest.raises(ConfigError, match="exactly two modes"):
            averaged_dc_solve(build_switched_model(lc_circuit()), 0.5, [0.0])
