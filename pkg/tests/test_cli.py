import json
import subprocess
import sys

import pytest

from solomonic import data
from solomonic.cli import main
from solomonic.game import game_from_json, game_to_json


def run(*args):
    return subprocess.run([sys.executable, "-m", "solomonic", *args], capture_output=True, text=True)


def test_solve_solomon_alpha(capsys):
    assert main(["solve-solomon", "--state", "alpha", "--fine", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] and {v["outcome"][0][0]["outcome"]["allocate"] for v in doc["verdicts"]} == {"a"}


def test_solve_solomon_beta_text(capsys):
    assert main(["solve-solomon", "--state", "beta", "--format", "text"]) == 0
    out = capsys.readouterr().out
    assert "allocate b" in out and "BAD" not in out


def test_solve_solomon_malice_fails(capsys):
    assert main(["solve-solomon", "--malice"]) == 1
    assert not json.loads(capsys.readouterr().out)["ok"]


def test_usage_error_exit_code():
    r = run("solve-solomon", "--fine", "-1")
    assert r.returncode == 2


@pytest.mark.parametrize("game,code,unique", [
    ("solomon_alpha", 0, True),
    ("frontrun_claim_game", 0, True),
    ("counterexample", 1, False),
])
def test_verify_bundled_games(capsys, game, code, unique):
    assert main(["verify-spe", game]) == code
    doc = json.loads(capsys.readouterr().out)
    assert doc["unique"] is unique and doc["oracle"]["agrees"]


@pytest.mark.parametrize("name", data.names("games"))
def test_bundled_games_round_trip(name):
    raw = json.loads(data.path("games", name).read_text())
    game, prefs = game_from_json(raw)
    assert game_to_json(game, prefs, raw["name"]) == raw


def test_verify_incomparable_exit_code(tmp_path, capsys):
    lot = {"kind": "chance", "branches": [
        {"label": "up", "prob": {"num": 1, "den": 2}, "child": {"kind": "terminal", "outcome": {"allocate": "X"}}},
        {"label": "down", "prob": {"num": 1, "den": 2}, "child": {"kind": "terminal", "outcome": {"allocate": "Z"}}},
    ]}
    game = {"schema_version": 1, "root": {"kind": "decision", "player": "p", "actions": {
        "safe": {"kind": "terminal", "outcome": {"allocate": "Y"}}, "gamble": lot}},
        "preferences": {"p": [[{"allocate": "X"}], [{"allocate": "Y"}], [{"allocate": "Z"}]]}}
    p = tmp_path / "g.json"
    p.write_text(json.dumps(game))
    assert main(["verify-spe", str(p)]) == 4
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "IncomparableLottery" and err["path"] == ""


def test_missing_file_exit_code(capsys):
    assert main(["verify-spe", "no_such_game"]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFound"


def test_simulate_writes_report_and_trace(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "deterrence", "--reps", "5", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["aggregate"]["counts"]["paid_legitimate"] == 5
    lines = (out / "trace.jsonl").read_text().splitlines()
    assert lines and all(json.loads(l)["rep"] in range(5) for l in lines)
    first = (out / "report.json").read_bytes()
    main(["simulate", "deterrence", "--reps", "5", "--out", str(out)])
    assert (out / "report.json").read_bytes() == first


def test_simulate_schema_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema_version": 1, "seed": 1, "payment": 0, "horizon": 4, "agents": []}))
    assert main(["simulate", str(p)]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ScenarioError" and err["path"] == "payment"


def test_simulate_horizon_exit_code(tmp_path, capsys):
    d = json.loads(data.path("scenarios", "coalition").read_text())
    d["horizon"] = 8
    d["repetitions"] = 1
    p = tmp_path / "short.json"
    p.write_text(json.dumps(d))
    assert main(["simulate", str(p)]) == 5
    assert json.loads(capsys.readouterr().err)["error"] == "HorizonExceeded"


def test_signal_flag(capsys):
    assert main(["simulate", "deterrence", "--reps", "2", "--signal"]) == 0


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "n.csv"
    assert main(["sweep", "n_bots", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0].startswith("parameter,value") and len(rows) == 5


def test_console_entry_point_help():
    r = run("--help")
    assert r.returncode == 0 and "verify-spe" in r.stdout
