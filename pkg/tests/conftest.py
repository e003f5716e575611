import io
import json
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from tokenweave import cli

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def run_cli(*argv):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path
    return _write


@pytest.fixture
def episode(tmp_path, write_json):
    """setup -> plan -> simulate for a config; returns the file paths."""
    def _run(config, name="run"):
        cfg = write_json(f"{name}.config.json", config)
        state, plan, tr = (tmp_path / f"{name}.{s}.json" for s in ("state", "plan", "transcript"))
        for argv in (("setup", "--config", cfg, "--state", state),
                     ("plan", "--state", state, "--plan", plan),
                     ("simulate", "--state", state, "--plan", plan, "--transcript", tr)):
            code, _, err = run_cli(*argv)
            assert code == 0, err
        return {"config": cfg, "state": state, "plan": plan, "transcript": tr}
    return _run


ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
