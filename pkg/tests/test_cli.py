import json
import subprocess
import sys
from pathlib import Path

import pytest

from kit import relayed_block, scenario, transfer
from xchain.cli import main
from xchain.codec import encode, to_jsonable

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def example(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(scenario(transfers=[transfer(), transfer(at=22.5)])))
    return p


@pytest.fixture(scope="module")
def proof_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("proof")
    net, _relay, txs, blk = relayed_block(n_txs=5)
    bundle = net.chain(1).proof_bundle(txs[2].id)
    (d / "bundle.json").write_text(json.dumps({"bundle": to_jsonable(bundle), "tx": encode(txs[2]).hex()}))
    (d / "header.json").write_text(json.dumps(to_jsonable(blk.header)))
    return d


def test_run_writes_outputs(example, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(example), "--out", str(out), "--seed", "5"]) == 0
    assert {p.name for p in out.iterdir()} == {"report.json", "transfers.csv", "trace.jsonl"}
    assert json.loads((out / "report.json").read_text())["seed"] == 5
    assert "violations=0" in capsys.readouterr().out


def test_bad_config_exit_one(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"chains": []}))
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "$.chains" in capsys.readouterr().err


def test_unwritable_out_exit_one(example, tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["run", "--config", str(example), "--out", str(blocker / "o")]) == 1


@pytest.mark.parametrize("argv", [[], ["fly"], ["run"], ["verify-proof", "--bundle", "x"]])
def test_usage_errors_exit_two(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_attack_command(tmp_path, capsys):
    assert main(["attack", "--kind", "double-claim", "--config", str(SCENARIOS / "attack.json"),
                 "--out", str(tmp_path)]) == 0
    outcome = json.loads(capsys.readouterr().out)
    assert outcome["succeeded"] == 0 and outcome["rejectionCodes"] == {"AlreadyClaimed": 3}
    assert (tmp_path / "report.json").exists()


def test_unknown_attack_exit_one(capsys):
    assert main(["attack", "--kind", "nope", "--config", str(SCENARIOS / "attack.json")]) == 1
    assert "nope" in capsys.readouterr().err


def test_verify_proof_valid(proof_files, capsys):
    rc = main(["verify-proof", "--bundle", str(proof_files / "bundle.json"),
               "--header", str(proof_files / "header.json")])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0 and out["valid"] and out["status"] is True
    assert set(out["checks"]) == {"headerHash", "blockHash", "samePath", "txProof", "receiptProof",
                                  "receiptLeaf", "txLeaf", "receiptTx"}


@pytest.mark.parametrize("field, broken", [
    ("tx sibling", "txProof"), ("receipt status", "receiptLeaf"), ("path", "samePath"), ("header", "headerHash"),
])
def test_verify_proof_mutated(proof_files, tmp_path, capsys, field, broken):
    b = json.loads((proof_files / "bundle.json").read_text())
    h = json.loads((proof_files / "header.json").read_text())
    if field == "tx sibling":
        s = b["bundle"]["tx_proof"]["siblings"]
        s[0] = ("0" if s[0][0] != "0" else "1") + s[0][1:]
    elif field == "receipt status":
        b["bundle"]["receipt"]["status"] = False
    elif field == "path":
        b["bundle"]["path"] += 1
    else:
        h["timestamp"] += 1
    (tmp_path / "b.json").write_text(json.dumps(b))
    (tmp_path / "h.json").write_text(json.dumps(h))
    assert main(["verify-proof", "--bundle", str(tmp_path / "b.json"), "--header", str(tmp_path / "h.json")]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] is False and out["checks"][broken] is False


def test_verify_proof_unreadable(tmp_path, capsys):
    (tmp_path / "b.json").write_text("{}")
    assert main(["verify-proof", "--bundle", str(tmp_path / "b.json"), "--header", str(tmp_path / "none")]) == 1
    assert "cannot load" in capsys.readouterr().err


def test_check_invariants(example, tmp_path, capsys):
    main(["run", "--config", str(example), "--out", str(tmp_path)])
    trace = tmp_path / "trace.jsonl"
    assert main(["check-invariants", "--trace", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    recs = [json.loads(line) for line in lines]
    i = next(i for i, r in enumerate(recs) if r["kind"] == "tx_executed" and r["details"]["txKind"] == "claim")
    lines.insert(i + 1, lines[i])
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["check-invariants", "--trace", str(bad)]) == 1
    assert "VIOLATION" in capsys.readouterr().out
    assert main(["check-invariants", "--trace", str(tmp_path / "missing.jsonl")]) == 1


def test_module_entry_point(example, tmp_path):
    r = subprocess.run([sys.executable, "-m", "xchain", "run", "--config", str(example), "--out", str(tmp_path)],
                       capture_output=True, text=True, env={"XCHAIN_SEED": "9", "PATH": ""})
    assert r.returncode == 0, r.stderr
    assert json.loads((tmp_path / "report.json").read_text())["seed"] == 9
