from pathlib import Path

import pytest

from hitforge.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
# fixture reads are local, so the synthetic runs lift the default 10 req/s pacing
SYNTH_INGEST = ["--years", "2014-2017", "--chart-start", "2012-01-07",
                "--chart-end", "2018-12-29", "--rate-limit", "5000"]


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def build_synthetic(root: Path, seed: int = 0) -> dict:
    """fixtures -> ingest -> corpus -> split through the CLI; returns the paths."""
    p = {name: root / name for name in ("fx", "ingest", "corpus", "split")}
    assert run_cli("synth-fixtures", "--out", p["fx"], "--seed", seed) == 0
    assert run_cli("ingest", "--fixtures", p["fx"], *SYNTH_INGEST, "--out", p["ingest"],
                   "--workers", 1) == 0
    assert run_cli("build-corpus", "--spotify", p["ingest"] / "spotify.jsonl",
                   "--charts", p["ingest"] / "charts.jsonl", "--seed", seed,
                   "--min-year", 2014, "--max-year", 2017, "--out", p["corpus"]) == 0
    assert run_cli("split", "--corpus", p["corpus"] / "corpus.csv", "--seed", seed,
                   "--out", p["split"]) == 0
    return p


@pytest.fixture(scope="session")
def synthetic(tmp_path_factory):
    return build_synthetic(tmp_path_factory.mktemp("synthetic"))


@pytest.fixture
def fixture_transport():
    from hitforge.ingest import Transport

    return Transport(mode="fixture", fixture_root=FIXTURES, rate_limit=1000)


# one summary line per acceptance criterion, whatever the verbosity
_CRITERIA: dict = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    _, verdict, seconds = _CRITERIA.get(number, (title, "PASS", 0.0))
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        verdict = "FAIL"
    if call.when == "call":
        seconds = call.duration
    _CRITERIA[number] = (title, verdict, seconds)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict, seconds = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {title} ({seconds:.2f} s)")
