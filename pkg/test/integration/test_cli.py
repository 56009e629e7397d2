"""Integration tests for the CLI module."""

import csv
import json
from pathlib import Path
from typing import Any

import pytest

from ..conftest import run_main_with_args


def read_csv(path: Path) -> list[list[str]]:
    """Rows of a written trajectory, header included."""
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


def matrix_block(text: str, name: str, mode_line: str | None = None) -> list[list[float]]:
    """Parse the rows following ``name`` in derive output."""
    lines = text.splitlines()
    start = lines.index(mode_line) if mode_line else 0
    begin = lines.index(name, start) + 1
    rows = []
    for line in lines[begin:]:
        if not line or line[0].isalpha() or line.startswith("#"):
            break
        rows.append([float(v) for v in line.split()])
    return rows


@pytest.mark.integration
class TestDeriveOutput:
    """Tests for printed models."""

    def test_lc_state_matrix(self, capsys: Any) -> None:
        """The LC model prints its analytic A and B."""
        exit_code = run_main_with_args(["derive", "lc"])
        captured = capsys.readouterr()
        assert exit_code == 0
        assert "# kind regular" in captured.out
        assert "# states i_L1,i_L2,v_C1" in captured.out
        a = matrix_block(captured.out, "A")
        b = matrix_block(captured.out, "B")
        assert a[0][2] == pytest.approx(-1e3)
        assert a[1][2] == pytest.approx(1e3)
        assert a[2][0] == pytest.approx(1e6)
        assert a[2][1] == pytest.approx(-1e6)
        assert b == [pytest.approx([1e3]), pytest.approx([0.0]), pytest.approx([0.0])]

    def test_boost_modes_and_notes(self, capsys: Any) -> None:
        """The H-F boost prints both switch states and notes its parameters."""
        exit_code = run_main_with_args(["derive", "hf-boost"])
        captured = capsys.readouterr()
        assert exit_code == 0
        assert "# mode u_m=1,u_d=0" in captured.out
        assert "# mode u_m=0,u_d=1" in captured.out
        assert "# mode u_m=1,u_d=1" not in captured.out
        assert "# states i,i_Ls,i_Lc,v_c,v_cs,v_d" in captured.out
        assert "Note: C_d = 1.5e-08 (default)" in captured.err
        assert "(calibrated)" in captured.err

    def test_boost_load_from_file(self, tmp_path: Path, capsys: Any) -> None:
        """A load in the parameter file skips calibration."""
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"R_o": 20.0}))
        exit_code = run_main_with_args(["derive", "hf-boost", "--params", str(params)])
        captured = capsys.readouterr()
        assert exit_code == 0
        assert "Note: R_o = 20 (file)" in captured.err

    def test_single_mode(self, capsys: Any) -> None:
        """--mode limits the output to one block."""
        run_main_with_args(["derive", "hf-rectifier", "--mode", "u_d=0"])
        captured = capsys.readouterr()
        assert captured.out.count("# mode ") == 1
        assert len(matrix_block(captured.out, "A")) == 4


@pytest.mark.integration
class TestSimulateRuns:
    """Tests for short simulate runs writing CSV."""

    def test_lc_from_config(self, tmp_path: Path, capsys: Any) -> None:
        """A run config selects the circuit, horizon, initial state and output."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "circuit": "lc", "t_end": 1e-3, "x0": {"i_L1": 1.0}, "output": "lc.csv",
        }))
        exit_code = run_main_with_args(["simulate", "--config", str(config)])
        captured = capsys.readouterr()
        assert exit_code == 0
        rows = read_csv(tmp_path / "lc.csv")
        assert rows[0] == ["t", "i_L1", "i_L2", "v_C1", "E_stored", "E_source", "E_diss"]
        assert len(rows) == 12
        assert float(rows[1][0]) == 0.0
        assert float(rows[1][1]) == 1.0
        assert float(rows[1][4]) == pytest.approx(5e-4)
        assert float(rows[-1][4]) == pytest.approx(5e-4, rel=1e-9)
        assert "Circuit: lc" in captured.out
        assert "Samples: 11 over 0.001 s" in captured.out
        assert f"Output: {tmp_path / 'lc.csv'}" in captured.out

    def test_rectifier_held_mode(self, tmp_path: Path, capsys: Any) -> None:
        """A held mode runs without comparator events."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"t_end": 1e-4}))
        out = tmp_path / "rect.csv"
        exit_code = run_main_with_args([
            "simulate", "hf-rectifier", "--config", str(config),
            "--mode", "u_d=1", "--out", str(out),
        ])
        captured = capsys.readouterr()
        assert exit_code == 0
        rows = read_csv(out)
        assert rows[0] == [
            "t", "i", "v_d", "i_Lc", "v_c", "u_d", "E_stored", "E_source", "E_diss",
        ]
        assert {row[5] for row in rows[1:]} == {"1"}
        assert "Events: 0" in captured.out
        assert "  dwell u_d=1: 100.00%" in captured.out
        assert "Parameter: L_c = 1e-08 (default)" in captured.out

    def test_two_source_energy_balance(self, tmp_path: Path) -> None:
        """Delivered energy equals stored plus dissipated energy."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"circuit": "two-source", "t_end": 2e-3, "output": "ts.csv"}))
        assert run_main_with_args(["simulate", "--config", str(config)]) == 0
        rows = read_csv(tmp_path / "ts.csv")
        header = rows[0]
        stored = [float(row[header.index("E_stored")]) for row in rows[1:]]
        source = [float(row[header.index("E_source")]) for row in rows[1:]]
        dissipated = [float(row[header.index("E_diss")]) for row in rows[1:]]
        assert source[-1] > 0.0
        residual = stored[-1] - stored[0] - source[-1] + dissipated[-1]
        assert abs(residual) <= 1e-8 * source[-1]

    def test_unknown_initial_state_exits_2(self, tmp_path: Path, capsys: Any) -> None:
        """x0 labels must be states of the model."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"circuit": "lc", "x0": {"i_L9": 1.0}}))
        exit_code = run_main_with_args(["simulate", "--config", str(config)])
        captured = capsys.readouterr()
        assert exit_code == 2
        assert "Unknown initial-state label(s): i_L9" in captured.err

    def test_command_line_overrides_config(self, tmp_path: Path) -> None:
        """Positional circuit and --out take precedence over the config."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"circuit": "two-source", "t_end": 1e-4, "output": "a.csv"}))
        out = tmp_path / "b.csv"
        assert run_main_with_args(["simulate", "lc", "--config", str(config), "--out", str(out)]) == 0
        assert read_csv(out)[0][1] == "i_L1"
        assert not (tmp_path / "a.csv").exists()
