import json

import pandas as pd
import pytest

from fse_forecast import main as cli
from fse_forecast.models.series import EventCombination
from fse_forecast.services.dus_engine import assign_new_combination
from fse_forecast.stores.report_writer import read_state_map


@pytest.fixture(autouse=True)
def quiet_observability(mocker):
    """Keep the CLI from rebinding structlog to the captured stderr."""
    mocker.patch.object(cli, "initialize_observability")


def _bundle_args(directory) -> list[str]:
    return [
        "--demand",
        str(directory / "demand.csv"),
        "--calendar",
        str(directory / "calendar.csv"),
        "--factors",
        str(directory / "factors.csv"),
        "--forecasts",
        str(directory / "forecasts.csv"),
    ]


def test_simulate_then_evaluate(tmp_path, capsys):
    """Test the synthetic bundle round trip through the evaluate command."""
    # Arrange
    data_dir = tmp_path / "data"
    out_dir = tmp_path / "report"

    # Act
    simulated = cli.main(["simulate", "--shape", "A", "--seed", "0", "--out-dir", str(data_dir)])
    evaluated = cli.main(["evaluate", *_bundle_args(data_dir), "--out-dir", str(out_dir)])

    # Assert
    assert simulated == 0
    assert evaluated == 0
    assert {p.name for p in data_dir.iterdir()} == {
        "demand.csv",
        "calendar.csv",
        "factors.csv",
        "forecasts.csv",
    }
    assert (out_dir / "report.txt").is_file()
    assert (out_dir / "states.csv").is_file()
    accuracy = pd.read_csv(out_dir / "accuracy.csv").set_index("forecaster")
    assert accuracy.loc["fse", "mae"] < accuracy.loc["ses", "mae"]
    assert "Improvement" in capsys.readouterr().out


def test_dus_writes_state_map(bundle_dir, tmp_path, capsys):
    code = cli.main(["dus", *_bundle_args(bundle_dir), "--out-dir", str(tmp_path / "dus")])

    assert code == 0
    state_map = read_state_map(tmp_path / "dus" / "states.json")
    assert 1 <= state_map.m <= 5
    assert capsys.readouterr().out.startswith("step 0: 16 uplift samples")


def test_fit_then_forecast_horizon(bundle_dir, tmp_path):
    """Test that a saved model forecasts the weeks after the series."""
    # Arrange
    model_dir = tmp_path / "model"
    forecast_dir = tmp_path / "forecast"
    assert cli.main(["fit", *_bundle_args(bundle_dir), "--out-dir", str(model_dir)]) == 0

    # Act
    code = cli.main(
        [
            "forecast",
            "--model",
            str(model_dir / "model.json"),
            "--horizon",
            "7",
            "--out-dir",
            str(forecast_dir),
        ]
    )

    # Assert
    assert code == 0
    forecast = pd.read_csv(forecast_dir / "forecast.csv")
    assert forecast["week"].tolist() == list(range(101, 108))
    assert forecast["forecast"].notna().all()


def test_forecast_from_future_calendar(bundle_dir, tmp_path):
    model_dir = tmp_path / "model"
    assert cli.main(["fit", *_bundle_args(bundle_dir), "--out-dir", str(model_dir)]) == 0
    future = tmp_path / "future.csv"
    future.write_text(
        "week,display,promotion\n101,,\n102,entrance,major\n103,,\n", encoding="utf-8"
    )

    code = cli.main(
        [
            "forecast",
            "--model",
            str(model_dir / "model.json"),
            "--calendar",
            str(future),
            "--factors",
            str(bundle_dir / "factors.csv"),
            "--out-dir",
            str(tmp_path / "forecast"),
        ]
    )

    assert code == 0
    forecast = pd.read_csv(tmp_path / "forecast" / "forecast.csv")
    assert forecast.loc[1, "forecast"] > forecast.loc[0, "forecast"] + 5000


def test_state_without_events_exits_statistical(bundle_dir, tmp_path, truth_state_map):
    """Test that a state never active in the data stops the fit with exit 1."""
    # Arrange
    state_map = assign_new_combination(
        truth_state_map,
        EventCombination.of({"promotion": "major", "display": "gondola"}),
        9000.0,
        mode="new_state",
    )
    states = tmp_path / "states.json"
    states.write_text(state_map.model_dump_json(), encoding="utf-8")

    # Act
    code = cli.main(
        [
            "fit",
            *_bundle_args(bundle_dir),
            "--states",
            str(states),
            "--out-dir",
            str(tmp_path / "model"),
        ]
    )

    # Assert
    assert code == 1
    assert not (tmp_path / "model" / "model.json").exists()


def test_malformed_input_exits_input_error(bundle_dir, tmp_path):
    (bundle_dir / "demand.csv").write_text("week,demand\n1,10\n2,oops\n", encoding="utf-8")

    code = cli.main(["evaluate", *_bundle_args(bundle_dir), "--out-dir", str(tmp_path / "out")])

    assert code == 2


def test_bad_config_exits_input_error(bundle_dir, tmp_path):
    config = tmp_path / "case.env"
    config.write_text("p_max = -1\n", encoding="utf-8")

    code = cli.main(
        [
            "--config",
            str(config),
            "evaluate",
            *_bundle_args(bundle_dir),
            "--out-dir",
            str(tmp_path / "out"),
        ]
    )

    assert code == 2


@pytest.mark.parametrize("argv", [[], ["bogus"], ["fit", "--out-dir", "x"]])
def test_usage_errors_exit_2(argv, capsys):
    assert cli.main(argv) == 2


def test_help_exits_0(capsys):
    assert cli.main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_replicate(tmp_path):
    out_dir = tmp_path / "replicate"

    code = cli.main(["replicate", "--shape", "A", "--n-seeds", "2", "--out-dir", str(out_dir)])

    assert code == 0
    summary = json.loads((out_dir / "replicate.json").read_text(encoding="utf-8"))
    assert summary["seeds"] == [0, 1]
    assert (out_dir / "replicate.csv").is_file()
