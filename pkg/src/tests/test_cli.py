import json
from unittest.mock import patch

import pytest

from src.free_actions.api import app
from src.free_actions.core.errors import SearchBudgetExhausted
from src.free_actions.service.schemas import Report


def failing_orbits(config, data_manager=None, progress=False):
    """Orbit counts (stub)."""
    report = Report(command="orbits")
    report.add("orbit_count_n2", False, value=3, expected=2)
    return report


def exhausted_orbits(config, data_manager=None, progress=False):
    """Orbit counts (stub)."""
    raise SearchBudgetExhausted("no separating image")


def test_orbits_writes_report(tmp_path):
    out = tmp_path / "orbits.json"
    code = app.main(["orbits", "--oracle", "PureSet", "--level", "3", "--out", str(out), "--log-level", "warning"])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["command"] == "orbits"
    assert data["config"]["oracle"] == "PureSet"
    assert all(check["passed"] for check in data["checks"])


def test_report_goes_to_stdout_without_out(capsys):
    code = app.main(["orbits", "--oracle", "PureSet", "--level", "2", "--log-level", "ERROR"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["schema"] == "free-actions-report/1"


def test_bad_oracle_is_a_usage_error():
    assert app.main(["build", "--oracle", "hypergraph"]) == 2


def test_missing_pair_file_is_a_usage_error(tmp_path):
    assert app.main(["verify", "--pair", str(tmp_path / "missing.freepair")]) == 2


def test_unknown_subcommand_exits_with_usage_error():
    with pytest.raises(SystemExit) as exc:
        app.main(["plot"])
    assert exc.value.code == 2


def test_failed_check_exit_code(capsys):
    with patch.dict(app.COMMANDS, {"orbits": failing_orbits}):
        assert app.main(["orbits"]) == 1


def test_budget_exit_code():
    with patch.dict(app.COMMANDS, {"orbits": exhausted_orbits}):
        assert app.main(["orbits"]) == 3


def test_build_then_verify(tmp_path):
    pair = tmp_path / "set.freepair"
    common = ["--oracle", "PureSet", "--level", "3", "--cert-depth", "6", "--pair", str(pair), "--log-level", "WARNING"]
    build = ["build", "--rounds", "1", "--schreier-radius", "2", "--out", str(tmp_path / "build.json")]
    assert app.main(build + common) == 0
    assert app.main(["verify", "--out", str(tmp_path / "verify.json")] + common) == 0
    built = json.loads((tmp_path / "build.json").read_text())
    verified = json.loads((tmp_path / "verify.json").read_text())
    assert built["checks"] == verified["checks"]


def test_log_file_sink(tmp_path):
    log = tmp_path / "logs" / "run.log"
    code = app.main(["orbits", "--oracle", "PureSet", "--level", "2", "--out", str(tmp_path / "o.json"), "--log-file", str(log)])
    assert code == 0
    assert "orbits" in log.read_text()


def test_level_cap_exit_code(tmp_path):
    args = ["orbits", "--oracle", "PureSet", "--level", "4", "--max-level", "3", "--out", str(tmp_path / "o.json")]
    assert app.main(args) == 3


def test_export_window(tmp_path):
    path = tmp_path / "set.txt"
    out = tmp_path / "o.json"
    code = app.main(["orbits", "--oracle", "PureSet", "--level", "2", "--export-window", str(path), "--out", str(out)])
    assert code == 0
    assert path.read_text().splitlines() == [
        "window PureSet seed=0 level=2",
        "element 0 -",
        "element 1 -",
        "element 2 -",
    ]
    assert json.loads(out.read_text())["data"]["window_file"] == str(path)
