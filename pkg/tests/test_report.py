import json

import pytest

from icsaead import bench, report
from icsaead.bench import PhaseSample, RunConfig
from icsaead.cli import CampaignGrid, run_grid

KEY = bytes(32)
ENV = {"clock": "test", "frequency_policy": "unavailable", "warning": "w", "advice": "a"}


@pytest.fixture(scope="module")
def small_report():
    grid = CampaignGrid(sizes=(28, 224), runs=50, warmup_runs=2, label="unit")
    return run_grid(grid, KEY, environment=ENV)


def test_json_structure(small_report):
    doc = json.loads(report.to_json(small_report))
    assert doc["schema"] == report.SCHEMA
    assert doc["partial"] is False
    assert doc["environment"] == ENV
    assert [c["config"]["payload_bytes"] for c in doc["campaigns"]] == [28, 224]
    for c in doc["campaigns"]:
        assert set(c["phases"]) == set(bench.PHASES)
        assert set(c["budgets"]) == {"GOOSE", "IEC 60834-1", "SCADA"}
        assert c["n_total"] == 50
        assert c["n_valid"] + c["n_dropped"] == 50
        assert c["peak_memory_bytes"] > 0
        for b in c["budgets"].values():
            assert set(b) == {"limit_ns", "phase", "mean", "p95"}
            assert b["mean"]["pass"] is (b["mean"]["value_ns"] < b["limit_ns"])


def test_csv_rows(small_report):
    text = report.to_csv(small_report)
    header = [line for line in text.splitlines() if not line.startswith("#")][0]
    assert header == ",".join(report.CSV_HEADER)
    rows = report.read_csv_rows(text)
    assert len(rows) == 2 * 4
    for row in rows:
        assert row["phase"] in bench.PHASES
        int(row["mean_ns"]), int(row["p5_ns"]), int(row["p95_ns"])
        assert int(row["n_valid"]) + int(row["n_dropped"]) == 50
        assert row["label"] == "unit"
    assert "# environment.clock: test" in text
    assert "# partial: false" in text
    assert text.count("# verdict ") == 2 * 3 * 2


def test_dropped_counts_reported():
    samples = [PhaseSample(1, 2, 3, 6)] * 8 + [PhaseSample(1, 2, -3, 0)] * 2
    result = bench.judge(RunConfig(28, runs=10), samples)
    doc = report.build_report([result], ENV)
    assert doc["campaigns"][0]["n_dropped"] == 2
    rows = report.read_csv_rows(report.to_csv(doc))
    assert all(row["n_dropped"] == "2" for row in rows)


def test_partial_report_on_entropy_failure():
    calls = [0]

    def flaky(n):
        calls[0] += 1
        if calls[0] > 30:
            raise OSError("gone")
        return bytes(range(calls[0] % 200, calls[0] % 200 + n))

    grid = CampaignGrid(sizes=(28, 56), runs=20, warmup_runs=0, entropy=flaky)
    doc = run_grid(grid, KEY, environment=ENV)
    assert doc["partial"] is True
    assert "entropy" in doc["abort_reason"]
    assert [c["partial"] for c in doc["campaigns"]] == [False, True]
    assert doc["campaigns"][1]["n_total"] == 10
    assert "# partial: true" in report.to_csv(doc)


def test_unknown_format(small_report):
    with pytest.raises(ValueError):
        report.render(small_report, "xml")
