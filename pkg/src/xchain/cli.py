"""Command line: run, attack, verify-proof, check-invariants.

Exit status is 0 on success, 1 on a config error, failed check or invariant
violation, and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agents import ATTACKS, UnknownAttack
from .codec import decode, encode, to_jsonable
from .config import ConfigError, load_config
from .harness import IoError, attack_to_json, emit_report, run_attack, run_scenario
from .invariants import check_trace
from .merkle import InclusionProofBundle, leaf_hash, verify_membership
from .model import BlockHeader, Transaction


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xchain", description="Cross-chain burn/claim transfer simulator.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write report.json, transfers.csv, trace.jsonl")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, default=None, help="overrides $XCHAIN_SEED and the config seed")
    run.add_argument("--out", type=Path, default=Path("out"))

    att = sub.add_parser("attack", help="run one scripted attack against a scenario")
    att.add_argument("--kind", required=True, help=f"one of: {', '.join(sorted(ATTACKS))}")
    att.add_argument("--config", required=True, type=Path)
    att.add_argument("--seed", type=int, default=None)
    att.add_argument("--out", type=Path, default=None)

    vp = sub.add_parser("verify-proof", help="check an inclusion bundle against a header offline")
    vp.add_argument("--bundle", required=True, type=Path)
    vp.add_argument("--header", required=True, type=Path)

    ci = sub.add_parser("check-invariants", help="replay a trace.jsonl and re-check global invariants")
    ci.add_argument("--trace", required=True, type=Path)
    return ap


def _cmd_run(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    report = run_scenario(cfg)
    paths = emit_report(report, args.out)
    s = report.summary
    print(f"{cfg.name}: seed={cfg.seed} protocol={cfg.protocol} transfers={s['transfers']} "
          f"phases={s['phases']} violations={len(report.invariant_violations)} -> {paths['report'].parent}")
    for v in report.invariant_violations[:20]:
        print(f"VIOLATION {v}", file=sys.stderr)
    return 0 if report.ok else 1


def _cmd_attack(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    outcome, report = run_attack(args.kind, cfg)
    if args.out is not None:
        emit_report(report, args.out)
    print(json.dumps(attack_to_json(outcome), sort_keys=True))
    for v in report.invariant_violations[:20]:
        print(f"VIOLATION {v}", file=sys.stderr)
    return 0 if outcome.succeeded == 0 and outcome.attempted > 0 and report.ok else 1


def load_bundle(path: Path) -> tuple[InclusionProofBundle, Transaction | None]:
    """Bundle JSON as produced by ``to_jsonable``; an optional ``tx`` key carries the transaction."""
    d = json.loads(path.read_text())
    tx = None
    if "tx" in d:
        tx = decode(bytes.fromhex(d.pop("tx")))
    return InclusionProofBundle.from_dict(d.get("bundle", d)), tx


def _cmd_verify(args) -> int:
    try:
        bundle, tx = load_bundle(args.bundle)
        header = BlockHeader.from_dict(json.loads(args.header.read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: cannot load inputs: {exc}", file=sys.stderr)
        return 1
    checks = {
        "headerHash": header.recompute_hash() == header.self_hash,
        "blockHash": bundle.block_hash == header.self_hash,
        "samePath": bundle.tx_proof.index == bundle.receipt_proof.index == bundle.path,
        "txProof": verify_membership(bundle.tx_proof, header.tx_root),
        "receiptProof": verify_membership(bundle.receipt_proof, header.receipt_root),
    }
    if bundle.receipt is not None:
        checks["receiptLeaf"] = bundle.receipt_proof.leaf_hash == leaf_hash(encode(bundle.receipt))
    if tx is not None:
        checks["txLeaf"] = bundle.tx_proof.leaf_hash == leaf_hash(encode(tx))
        checks["receiptTx"] = bundle.receipt is not None and bundle.receipt.tx_id == tx.id
    ok = all(checks.values())
    print(json.dumps(to_jsonable({"valid": ok, "checks": checks,
                                  "status": None if bundle.receipt is None else bundle.receipt.status}),
                     sort_keys=True))
    return 0 if ok else 1


def _cmd_check(args) -> int:
    try:
        problems = check_trace(args.trace)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot replay {args.trace}: {exc}", file=sys.stderr)
        return 1
    for p in problems[:50]:
        print(f"VIOLATION {p}")
    print(f"{args.trace}: {len(problems)} violation(s)")
    return 0 if not problems else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {"run": _cmd_run, "attack": _cmd_attack, "verify-proof": _cmd_verify,
                "check-invariants": _cmd_check}
    try:
        return handlers[args.cmd](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except UnknownAttack as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 1
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
