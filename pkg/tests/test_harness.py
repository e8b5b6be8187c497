import copy
import csv
import json
import os
import statistics
from pathlib import Path

import pytest

from kit import chain, config, scenario, transfer
from xchain.config import ConfigError, load_config, parse_config
from xchain.harness import CSV_COLUMNS, IoError, emit_report, run_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def small_stochastic(seed=3):
    return config(chains=[chain(1, timing="exponential"), chain(2, timing="exponential")],
                  transfers=[transfer(at=7.5 + 10 * i) for i in range(8)], seed=seed)


@pytest.mark.parametrize("edit, path", [
    (lambda r: r["chains"][0].pop("id"), "$.chains[0].id"),
    (lambda r: r["chains"][1].update(id=1), "$.chains"),
    (lambda r: r["transfers"][0].update(dest=9), "$.transfers[0].dest"),
    (lambda r: r["transfers"][0].update(x=0), "$.transfers[0]"),
    (lambda r: r["agents"].append({"user": "bob", "behavior": "Saintly"}), "$.agents[0].behavior"),
    (lambda r: r.update(protocol=3), "$.protocol"),
    (lambda r: r.update(seed=-1), "$.seed"),
    (lambda r: r["genesisOwnership"][0].update(chain=7), "$.genesisOwnership[0].chain"),
    (lambda r: r["relays"][0].update(remote=r["relays"][0]["host"]), "$.relays[0]"),
])
def test_config_errors_name_the_field(edit, path):
    raw = copy.deepcopy(scenario(transfers=[transfer()]))
    edit(raw)
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert exc.value.path == path


def test_unreadable_and_invalid_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)


def test_seed_precedence(tmp_path, monkeypatch):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(scenario(seed=11)))
    monkeypatch.delenv("XCHAIN_SEED", raising=False)
    assert load_config(p).seed == 11
    monkeypatch.setenv("XCHAIN_SEED", "22")
    assert load_config(p).seed == 22
    assert load_config(p, seed=33).seed == 33
    monkeypatch.setenv("XCHAIN_SEED", "abc")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.path == "$XCHAIN_SEED"


def test_same_seed_same_bytes(tmp_path):
    a = emit_report(run_scenario(small_stochastic()), tmp_path / "a")
    b = emit_report(run_scenario(small_stochastic()), tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    c = emit_report(run_scenario(small_stochastic(seed=4)), tmp_path / "c")
    assert a["trace"].read_bytes() != c["trace"].read_bytes()


def test_empty_scenario_writes_valid_files(tmp_path):
    report = run_scenario(config(horizon=60))
    paths = emit_report(report, tmp_path)
    doc = json.loads(paths["report"].read_text())
    assert doc["transfers"] == [] and doc["invariantViolations"] == []
    assert doc["durationStats"]["total"] == {"n": 0, "mean": None, "stddev": None}
    with paths["transfers"].open() as fh:
        assert list(csv.reader(fh)) == [CSV_COLUMNS]
    kinds = {json.loads(line)["kind"] for line in paths["trace"].read_text().splitlines()}
    assert "genesis" in kinds and "block" in kinds


def test_unwritable_output_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoError):
        emit_report(run_scenario(config(horizon=30)), blocker / "out")
    if os.geteuid() != 0:
        ro = tmp_path / "ro"
        ro.mkdir(mode=0o500)
        with pytest.raises(IoError):
            emit_report(run_scenario(config(horizon=30)), ro)


def test_csv_matches_report_stats(tmp_path):
    report = run_scenario(small_stochastic())
    paths = emit_report(report, tmp_path)
    with paths["transfers"].open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8
    stats = json.loads(paths["report"].read_text())["durationStats"]
    for col, (leg, step) in [("burn_inclusion", ("burn", "inclusion")), ("claim_relay", ("claim", "relay"))]:
        vals = [float(r[col]) for r in rows]
        assert stats[leg][step]["mean"] == pytest.approx(statistics.fmean(vals), abs=1e-6)
        assert stats[leg][step]["stddev"] == pytest.approx(statistics.pstdev(vals), abs=1e-6)
    totals = [float(r["total"]) for r in rows]
    assert stats["total"]["mean"] == pytest.approx(statistics.fmean(totals), abs=1e-6)


def test_protocol_one_has_no_confirm_leg(tmp_path):
    report = run_scenario(config(transfers=[transfer(), transfer(at=22.5)], protocol=1))
    assert {r.phase for r in report.transfers} == {"Claimed"}
    assert "confirm" not in report.op_counts
    paths = emit_report(report, tmp_path)
    with paths["transfers"].open() as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["confirm_tx_id"] == "" and r["confirm_inclusion"] == "" for r in rows)
    assert all(float(r["total"]) == 187.5 for r in rows)


def test_op_counts_per_kind():
    report = run_scenario(config(transfers=[transfer()]))
    assert {k: v["mean"] for k, v in report.op_counts.items()} == {"burn": 8, "claim": 11, "confirm": 13}


def test_trace_records_have_common_shape(tmp_path):
    paths = emit_report(run_scenario(config(transfers=[transfer()])), tmp_path)
    for line in paths["trace"].read_text().splitlines():
        rec = json.loads(line)
        assert {"time", "chain", "kind", "details"} <= set(rec)


def test_bundled_scenarios_parse():
    for p in sorted(SCENARIOS.glob("*.json")):
        assert load_config(p).name == p.stem
