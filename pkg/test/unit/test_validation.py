"""Unit tests for the fast validation checks and the check registry."""

from unittest.mock import patch

import pytest

from lagrange_converters.circuits import BOOST_MODES, BoostParams, RectifierParams
from lagrange_converters.sim import ConfigError, SteadyStateMetrics
from lagrange_converters.validation import (
    CHECK_NAMES,
    CHECKS,
    Check,
    CheckResult,
    ValidationContext,
    check_boost_diode_voltage,
    check_boost_matrices,
    check_diode_descriptor,
    check_gradients,
    check_integrator_order,
    check_lc_conservation,
    check_rectifier_matrices,
    run_checks,
)


@pytest.mark.unit
class TestMatrixChecks:
    """Tests for the derived-versus-printed matrix checks."""

    def test_boost_matrices(self) -> None:
        """The derived boost model matches the printed matrices."""
        result = check_boost_matrices(ValidationContext())
        assert result.passed, result.notes
        assert result.detail.startswith("2 modes x 6 states match")

    def test_boost_matrices_with_file_load(self) -> None:
        """A load from the parameters is used on both sides."""
        context = ValidationContext({"hf-boost": BoostParams(r_o=25.0)})
        result = check_boost_matrices(context)
        assert result.passed, result.notes
        assert "R_o = 25 ohm" in result.detail

    def test_rectifier_matrices_flag_misprints(self) -> None:
        """The rectifier matches apart from the documented misprints."""
        result = check_rectifier_matrices(ValidationContext())
        assert result.passed, result.notes
        assert len(result.notes) == 2
        assert all(note.startswith("misprint: ") for note in result.notes)
        assert "R_c/L_s" in result.notes[0]

    def test_rectifier_matrices_detect_changed_parameters(self) -> None:
        """Derivations from other parameters no longer match the printed values."""
        context = ValidationContext({"hf-rectifier": RectifierParams(r_load=20.0)})
        result = check_rectifier_matrices(context)
        assert not result.passed
        assert any("A[i, i]" in note for note in result.notes)

    def test_diode_descriptor(self) -> None:
        """The u-substituted model is wrong only in the blocking mode."""
        result = check_diode_descriptor(ValidationContext())
        assert result.passed, result.notes
        assert result.notes
        assert all("u=0" in note for note in result.notes)
        assert any("A[i_L, i_L]" in note for note in result.notes)


@pytest.mark.unit
class TestNumericChecks:
    """Tests for the conservation, gradient and integrator checks."""

    def test_lc_conservation(self) -> None:
        """Trapezoidal and exact conserve energy; RK4 drifts by the expected amount."""
        result = check_lc_conservation(ValidationContext())
        assert result.passed, result.detail
        assert "rk4: drift" in result.detail
        (note,) = result.notes
        assert "1e-06 conservation limit is not applied to rk4" in note

    def test_gradients(self) -> None:
        """Analytic gradients agree with finite differences."""
        result = check_gradients(ValidationContext())
        assert result.passed, result.detail

    def test_integrator_order(self) -> None:
        """RK4 converges at fourth order and trapezoidal agrees with exact."""
        result = check_integrator_order(ValidationContext())
        assert result.passed, result.detail


def boost_metrics(v_off: float, i_off: float = 2.13, v_on: float = -18.2) -> SteadyStateMetrics:
    """Synthetic boost steady state with the given per-mode means."""
    on, off = BOOST_MODES
    return SteadyStateMetrics(
        window=2e-4,
        mean={"v_c": 18.2, "i": 2.13},
        ripple={},
        dwell={on: 0.5, off: 0.5},
        mode_mean={on: {"v_d": v_on, "i": 2.13}, off: {"v_d": v_off, "i": i_off}},
    )


@pytest.mark.unit
class TestBoostDiodeVoltage:
    """Tests for the forward-band judgement of the boost diode."""

    def check(self, metrics: SteadyStateMetrics) -> CheckResult:
        context = ValidationContext({"hf-boost": BoostParams(r_o=20.0)})
        with patch("lagrange_converters.validation._boost_metrics", return_value=metrics):
            return check_boost_diode_voltage(context)

    def test_inside_band(self) -> None:
        """A mean within 0.7 V ± 0.1 V passes without notes."""
        result = self.check(boost_metrics(0.75))
        assert result.passed
        assert result.notes == ()

    def test_ohmic_drop_is_reported_as_deviation(self) -> None:
        """0.7 V plus R_d_on times 2.13 A passes only with a deviation note."""
        result = self.check(boost_metrics(0.7 + 0.05 * 2.13))
        assert result.passed
        assert "outside 0.7 V ± 0.1 V" in result.detail
        (note,) = result.notes
        assert note.startswith("deviation: ")
        assert "R_d_on*i = 0.1065 V" in note

    def test_outside_band_fails(self) -> None:
        """A forward mean not explained by the ohmic drop fails."""
        result = self.check(boost_metrics(0.95))
        assert not result.passed
        assert "outside 0.7 V ± 0.1 V" in result.detail

    def test_blocking_voltage_must_follow_output(self) -> None:
        """With the MOSFET on the diode must block about -v_c."""
        result = self.check(boost_metrics(0.75, v_on=-12.0))
        assert not result.passed
        assert "[-1.1 v_c, -0.9 v_c]" in result.detail

    def test_missing_mode(self) -> None:
        """Both modes must appear in the window."""
        on, _ = BOOST_MODES
        metrics = boost_metrics(0.75)
        metrics = SteadyStateMetrics(
            metrics.window, metrics.mean, metrics.ripple, {on: 1.0}, {on: metrics.mode_mean[on]}
        )
        result = self.check(metrics)
        assert not result.passed
        assert result.detail == "window does not contain both modes"


@pytest.mark.unit
class TestRegistry:
    """Tests for CHECKS and run_checks."""

    def test_names_are_unique(self) -> None:
        """Every check has its own name."""
        assert len(set(CHECK_NAMES)) == len(CHECKS) == 10
        assert CHECK_NAMES[0] == "boost-matrices"

    def test_unknown_check(self) -> None:
        """Unknown names list the valid ones."""
        with pytest.raises(ConfigError, match="Unknown check\\(s\\): nope. Valid options: boost-matrices"):
            run_checks(["nope"])

    def test_runs_selected_in_registry_order(self) -> None:
        """Selected checks run in registry order and report progress."""
        seen: list[str] = []
        results = run_checks(
            ["diode-descriptor", "rectifier-matrices"], ValidationContext(), seen.append
        )
        assert [r.name for r in results] == ["rectifier-matrices", "diode-descriptor"]
        assert seen == ["rectifier-matrices", "diode-descriptor"]

    def test_errors_become_failures(self) -> None:
        """A check that raises is reported as failed."""

        def broken(context: ValidationContext) -> CheckResult:
            raise ValueError("bad parameters")

        with patch("lagrange_converters.validation.CHECKS", (Check("broken", "Broken", broken),)):
            results = run_checks()
        assert results == [CheckResult("broken", False, "ValueError: bad parameters")]

    def test_context_prefers_overrides(self) -> None:
        """Overrides replace published parameters; a missing load is filled in."""
        context = ValidationContext({"hf-boost": BoostParams()})
        assert context.boost_params().r_o == context.published_boost.r_o
        assert context.params("hf-boost") == BoostParams()
        assert context.params("hf-rectifier") == RectifierParams()
