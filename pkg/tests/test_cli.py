import json
import os
import signal
import socket
import subprocess
import sys
import time
import urllib.request

import pytest

from smartjourney.cli import main
from smartjourney.pipeline import read_prepared_csv

TRAFFIC_HEADER = "_id,DATE_TIME,LONGITUDE,LATITUDE,GEOHASH,MINIMUM_SPEED,MAXIMUM_SPEED,AVERAGE_SPEED,NUMBER_OF_VEHICLES"
WEATHER_HEADER = "YEAR,MO,DY,HR,T2M,QV2M,WS2M,WD2M,PRECTOTCORR,LATITUDE,LONGITUDE,LOC_NAME"


@pytest.fixture()
def fixture_inputs(tmp_path):
    traffic_rows = [TRAFFIC_HEADER]
    weather_rows = [WEATHER_HEADER]
    for hour in range(26):
        day, h = divmod(hour, 24)
        traffic_rows.append(
            f"{hour},2021-05-0{day + 1} {h:02d}:00:00,29.3584,40.8457,geo,10,120,60,{50 + hour}"
        )
        traffic_rows.append(
            f"{hour + 100},2021-05-0{day + 1} {h:02d}:00:00,28.9551,41.0151,geo,5,100,50,{30 + hour}"
        )
        for loc in ("TUZLA", "FATIH"):
            weather_rows.append(f"2021,5,{day + 1},{h},14.2,8.9,1.6,240.7,0,40.8,29.3,{loc}")
    traffic = tmp_path / "traffic.csv"
    weather = tmp_path / "weather.csv"
    traffic.write_text("\n".join(traffic_rows) + "\n")
    weather.write_text("\n".join(weather_rows) + "\n")
    return tmp_path, traffic, weather


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def trained_env(tmp_path_factory):
    """Prepared CSV + one quick gbdt artifact produced through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    prepared = root / "prepared.csv"
    artifact = root / "models" / "tuzla_gbdt.json"
    artifact.parent.mkdir()
    assert main(["synth", "--days", "20", "--out", str(prepared)]) == 0
    code = main([
        "train", "--model", "gbdt", "--district", "TUZLA",
        "--prepared", str(prepared), "--out", str(artifact), "--rounds", "25",
    ])
    assert code == 0
    return root, prepared, artifact


class TestIngest:
    def test_valid_inputs_produce_prepared_file(self, fixture_inputs, capsys):
        tmp_path, traffic, weather = fixture_inputs
        out = tmp_path / "prepared.csv"
        code, stdout, _ = run_cli(
            capsys, "ingest", "--traffic", str(traffic), "--weather", str(weather),
            "--out", str(out),
        )
        assert code == 0
        summary = json.loads(stdout)  # stdout is one JSON document
        assert out.exists()
        assert summary["prepared_rows"] == len(read_prepared_csv(out))
        assert summary["traffic_rows"] == 52

    def test_summary_counts_match_district_counts(self, fixture_inputs, capsys):
        tmp_path, traffic, weather = fixture_inputs
        code, stdout, _ = run_cli(
            capsys, "ingest", "--traffic", str(traffic), "--weather", str(weather),
            "--out", str(tmp_path / "p.csv"),
        )
        summary = json.loads(stdout)
        assert summary["district_counts"] == {"TUZLA": 26, "FATIH": 26} | summary["district_counts"]
        assert sum(summary["district_counts"].values()) == summary["traffic_rows"]

    def test_missing_weather_exits_1_without_partial_output(self, fixture_inputs, capsys):
        tmp_path, traffic, _ = fixture_inputs
        out = tmp_path / "never.csv"
        code, stdout, _ = run_cli(
            capsys, "ingest", "--traffic", str(traffic), "--weather",
            str(tmp_path / "absent.csv"), "--out", str(out),
        )
        assert code == 1
        assert not out.exists()
        assert json.loads(stdout)["error"] == "missing_input"

    def test_figures_rendered_when_requested(self, fixture_inputs, capsys):
        tmp_path, traffic, weather = fixture_inputs
        figures = tmp_path / "figs"
        code, stdout, _ = run_cli(
            capsys, "ingest", "--traffic", str(traffic), "--weather", str(weather),
            "--out", str(tmp_path / "p.csv"), "--figures", str(figures),
        )
        assert code == 0
        summary = json.loads(stdout)
        assert summary["figures"]
        for path in summary["figures"]:
            assert os.path.exists(path)


class TestTrain:
    def test_quick_gbdt_run(self, trained_env):
        _root, _prepared, artifact = trained_env
        doc = json.loads(artifact.read_text())
        assert doc["model_type"] == "gbdt"
        assert doc["test_metrics"]["rmse"] > 0

    def test_unknown_model_is_usage_error(self, trained_env, capsys):
        _root, prepared, _ = trained_env
        with pytest.raises(SystemExit) as exc:
            main(["train", "--model", "prophet", "--district", "TUZLA",
                  "--prepared", str(prepared), "--out", "x.json"])
        assert exc.value.code == 2

    def test_unknown_flag_is_usage_error(self, trained_env):
        _root, prepared, _ = trained_env
        with pytest.raises(SystemExit) as exc:
            main(["train", "--model", "gbdt", "--district", "TUZLA",
                  "--prepared", str(prepared), "--out", "x.json", "--bogus", "1"])
        assert exc.value.code == 2

    def test_unknown_district_is_runtime_error(self, trained_env, capsys):
        _root, prepared, _ = trained_env
        code, stdout, _ = run_cli(
            capsys, "train", "--model", "gbdt", "--district", "NOWHERE",
            "--prepared", str(prepared), "--out", "x.json",
        )
        assert code == 1
        assert json.loads(stdout)["error"] == "unknown_district"

    def test_seeded_repeat_run_identical_artifact_bytes(self, trained_env, tmp_path, capsys, monkeypatch):
        _root, prepared, _ = trained_env
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            code, _, _ = run_cli(
                capsys, "train", "--model", "gbdt", "--district", "TUZLA",
                "--prepared", str(prepared), "--out", str(out),
                "--rounds", "10", "--seed", "42",
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()


class TestEvaluateAndForecast:
    def test_evaluate_replays_embedded_metrics(self, trained_env, capsys):
        _root, prepared, artifact = trained_env
        code, stdout, _ = run_cli(
            capsys, "evaluate", "--artifact", str(artifact), "--prepared", str(prepared)
        )
        assert code == 0
        report = json.loads(stdout)["test_metrics"]
        embedded = json.loads(artifact.read_text())["test_metrics"]
        assert report == embedded

    def test_prediction_dump_supports_independent_recomputation(self, trained_env, tmp_path, capsys):
        import csv
        import math

        _root, prepared, artifact = trained_env
        dump = tmp_path / "preds.csv"
        code, stdout, _ = run_cli(
            capsys, "evaluate", "--artifact", str(artifact), "--prepared", str(prepared),
            "--dump-predictions", str(dump),
        )
        assert code == 0
        report = json.loads(stdout)["test_metrics"]
        with open(dump) as fh:
            rows = list(csv.DictReader(fh))
        # independent MAPE recomputation from the dumped raw predictions
        terms = [
            abs(float(r["actual"]) - float(r["predicted"])) / float(r["actual"])
            for r in rows
            if float(r["actual"]) >= 1.0
        ]
        assert 100.0 * sum(terms) / len(terms) == pytest.approx(report["mape_percent"], abs=1e-9)

    def test_forecast_horizon_12(self, trained_env, capsys):
        _root, prepared, artifact = trained_env
        code, stdout, _ = run_cli(
            capsys, "forecast", "--artifact", str(artifact), "--prepared", str(prepared),
            "--horizon", "12",
        )
        assert code == 0
        body = json.loads(stdout)
        assert len(body["points"]) == 12

    def test_report_figures_rendered_alongside_outputs(self, trained_env, tmp_path, capsys):
        _root, prepared, artifact = trained_env
        code, stdout, _ = run_cli(
            capsys, "evaluate", "--artifact", str(artifact), "--prepared", str(prepared),
            "--figures", str(tmp_path / "eval_figs"),
        )
        assert code == 0
        eval_figs = json.loads(stdout)["figures"]
        code, stdout, _ = run_cli(
            capsys, "forecast", "--artifact", str(artifact), "--prepared", str(prepared),
            "--figures", str(tmp_path / "fc_figs"),
        )
        assert code == 0
        fc_figs = json.loads(stdout)["figures"]
        for path in eval_figs + fc_figs:
            assert os.path.exists(path)

    def test_insufficient_history_exit_1_with_code(self, trained_env, capsys):
        _root, prepared, artifact = trained_env
        rows = read_prepared_csv(prepared)
        early = rows[3].timestamp.isoformat()
        code, stdout, _ = run_cli(
            capsys, "forecast", "--artifact", str(artifact), "--prepared", str(prepared),
            "--start", early,
        )
        assert code == 1
        assert json.loads(stdout)["error"] == "insufficient_history"


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_health(port, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        try:
            with urllib.request.urlopen(f"http://127.0.0.1:{port}/health", timeout=1) as resp:
                return json.loads(resp.read())
        except OSError:
            time.sleep(0.2)
    raise TimeoutError("service did not come up")


class TestServe:
    def test_serve_health_and_sigterm_clean_exit(self, trained_env):
        root, prepared, artifact = trained_env
        port = _free_port()
        proc = subprocess.Popen(
            [sys.executable, "-m", "smartjourney.cli", "serve",
             "--models-dir", str(artifact.parent), "--prepared", str(prepared),
             "--port", str(port)],
        )
        try:
            assert _wait_health(port) == {"status": "ok"}
            proc.send_signal(signal.SIGTERM)
            assert proc.wait(timeout=15) == 0
        finally:
            if proc.poll() is None:
                proc.kill()

    def test_occupied_port_exits_1(self, trained_env):
        _root, prepared, artifact = trained_env
        blocker = socket.socket()
        blocker.bind(("0.0.0.0", 0))
        port = blocker.getsockname()[1]
        try:
            proc = subprocess.run(
                [sys.executable, "-m", "smartjourney.cli", "serve",
                 "--models-dir", str(artifact.parent), "--prepared", str(prepared),
                 "--port", str(port)],
                capture_output=True, timeout=60,
            )
            assert proc.returncode == 1
        finally:
            blocker.close()

    def test_env_port_honored_when_flag_absent(self, trained_env):
        root, prepared, artifact = trained_env
        port = _free_port()
        env = dict(os.environ, SMARTJOURNEY_PORT=str(port))
        proc = subprocess.Popen(
            [sys.executable, "-m", "smartjourney.cli", "serve",
             "--models-dir", str(artifact.parent), "--prepared", str(prepared)],
            env=env,
        )
        try:
            assert _wait_health(port) == {"status": "ok"}
        finally:
            proc.send_signal(signal.SIGTERM)
            proc.wait(timeout=15)

    def test_corrupt_artifact_dir_exits_nonzero(self, trained_env, tmp_path):
        _root, prepared, _ = trained_env
        bad_dir = tmp_path / "models"
        bad_dir.mkdir()
        (bad_dir / "bad.json").write_text("{broken")
        proc = subprocess.run(
            [sys.executable, "-m", "smartjourney.cli", "serve",
             "--models-dir", str(bad_dir), "--prepared", str(prepared),
             "--port", str(_free_port())],
            capture_output=True, timeout=60,
        )
        assert proc.returncode == 1
