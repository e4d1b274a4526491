import json
from pathlib import Path
from typing import Any

from typer.testing import CliRunner

from qlogic_gfactor.cli import app

runner = CliRunner()

EXAMPLE = Path(__file__).parents[1] / "configs" / "example.toml"


def _index(out: Path) -> dict[str, Any]:
    return json.loads((out / "sweep_index.json").read_text(encoding="utf-8"))


def test_sweep_separation_scales_exchange_rate(tmp_path: Path) -> None:
    result = runner.invoke(
        app,
        [
            "--config",
            str(EXAMPLE),
            "--out",
            str(tmp_path),
            "sweep",
            "exchange",
            "--param",
            "exchange.separation",
            "--values",
            "100e-6,300e-6,900e-6",
        ],
    )
    assert result.exit_code == 0, result.stdout
    runs = _index(tmp_path)["runs"]
    assert isinstance(runs, list)
    rates = [run["summary"]["exchange_rate_rad_s"] for run in runs]
    assert abs(rates[0] / rates[1] / 27 - 1) < 1e-9
    assert abs(rates[1] / rates[2] / 27 - 1) < 1e-9
    assert (tmp_path / "exchange_000_1e-04.csv").exists()
    assert len({run["seed"] for run in runs}) == 3


def test_sweep_bottle_strength_on_classical_baseline(tmp_path: Path) -> None:
    result = runner.invoke(
        app,
        [
            "--config",
            str(EXAMPLE),
            "--out",
            str(tmp_path),
            "sweep",
            "classical-baseline",
            "--param",
            "zones.analysis.B2",
            "--values",
            "1.5e5,3e5,6e5",
        ],
    )
    assert result.exit_code == 0, result.stdout
    summaries = [run["summary"] for run in _index(tmp_path)["runs"]]
    shifts = [s["spin_shift_rad_s"] for s in summaries]
    repetitions = [s["repetitions"] for s in summaries]
    assert shifts == sorted(shifts)
    assert repetitions == sorted(repetitions, reverse=True)
    assert repetitions[0] > repetitions[-1]


def test_sweep_without_values_is_a_usage_error(tmp_path: Path) -> None:
    result = runner.invoke(
        app,
        [
            "--config",
            str(EXAMPLE),
            "--out",
            str(tmp_path),
            "sweep",
            "exchange",
            "--param",
            "exchange.separation",
            "--values",
            "",
        ],
    )
    assert result.exit_code == 1


def test_sweep_unknown_parameter_is_a_usage_error(tmp_path: Path) -> None:
    result = runner.invoke(
        app,
        [
            "--config",
            str(EXAMPLE),
            "--out",
            str(tmp_path),
            "sweep",
            "exchange",
            "--param",
            "exchange.nowhere",
            "--values",
            "1",
        ],
    )
    assert result.exit_code == 1
