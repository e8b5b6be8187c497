"""Run a scenario end to end and write its report, transfer table and trace."""
from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .agents import ATTACK_BEHAVIOR, AttackOutcome, attack_class, attack_outcomes
from .codec import to_jsonable
from .config import AgentSpec, ScenarioConfig
from .model import XChainError
from .protocol import TransferRecord
from .world import LEGS, Simulation

STEPS = ("inclusion", "confirmation", "relay")

CSV_COLUMNS = [
    "burn_tx_id", "claim_tx_id", "confirm_tx_id", "sender", "recipient", "src", "dest", "x_count", "y_count",
    "phase", "rejection_code",
    *[f"{leg}_{step}" for leg in LEGS for step in STEPS if (leg, step) != ("confirm", "relay")],
    "total", "elapsed", "fee_paid", "stake_outcome",
]


class IoError(XChainError, OSError):
    pass


@dataclass
class RunReport:
    scenario: str
    seed: int
    protocol: int
    transfers: list = field(default_factory=list)
    duration_stats: dict = field(default_factory=dict)
    op_counts: dict = field(default_factory=dict)
    attack_outcomes: list = field(default_factory=list)
    invariant_violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    trace: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return not self.invariant_violations

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario, "seed": self.seed, "protocol": self.protocol,
            "summary": self.summary,
            "transfers": [record_to_json(r) for r in self.transfers],
            "durationStats": self.duration_stats,
            "opCounts": self.op_counts,
            "attackOutcomes": [attack_to_json(a) for a in self.attack_outcomes],
            "invariantViolations": self.invariant_violations,
            "warnings": self.warnings,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def record_to_json(r: TransferRecord) -> dict:
    durations = {}
    for leg in LEGS:
        steps = {s: r.durations[f"{leg}{s.title()}"] for s in STEPS if f"{leg}{s.title()}" in r.durations}
        if steps:
            durations[leg] = steps
    for key in ("total", "elapsed"):
        if key in r.durations:
            durations[key] = r.durations[key]
    return {
        "burnTxId": r.burn_tx_id, "claimTxId": r.claim_tx_id, "confirmTxId": r.confirm_tx_id,
        "sender": r.sender, "recipient": r.recipient, "src": r.src, "dest": r.dest,
        "x": list(r.x), "y": list(r.y), "phase": r.phase, "rejectionCode": r.rejection_code,
        "durations": durations, "times": r.times, "feePaid": list(r.fee_paid), "stakeOutcome": r.stake_outcome,
    }


def attack_to_json(a: AttackOutcome) -> dict:
    return {"attack": a.attack, "attempted": a.attempted, "succeeded": a.succeeded,
            "rejectionCodes": a.rejection_codes, "pending": a.pending}


def _stats(values) -> dict:
    values = list(values)
    if not values:
        return {"n": 0, "mean": None, "stddev": None}
    return {"n": len(values), "mean": round(statistics.fmean(values), 6),
            "stddev": round(statistics.pstdev(values), 6)}


def duration_stats(rows: list[dict]) -> dict:
    """Per-phase mean and population stddev over flat, CSV-shaped rows."""
    out = {}
    for col in CSV_COLUMNS[CSV_COLUMNS.index("burn_inclusion"):CSV_COLUMNS.index("elapsed") + 1]:
        vals = [float(row[col]) for row in rows if row.get(col) not in (None, "")]
        if "_" in col:
            leg, step = col.split("_")
            out.setdefault(leg, {})[step] = _stats(vals)
        else:
            out[col] = _stats(vals)
    return out


def csv_row(r: TransferRecord) -> dict:
    row = {
        "burn_tx_id": r.burn_tx_id, "claim_tx_id": r.claim_tx_id or "", "confirm_tx_id": r.confirm_tx_id or "",
        "sender": r.sender, "recipient": r.recipient, "src": r.src, "dest": r.dest,
        "x_count": len(r.x), "y_count": len(r.y), "phase": r.phase, "rejection_code": r.rejection_code or "",
        "fee_paid": " ".join(map(str, r.fee_paid)), "stake_outcome": r.stake_outcome,
    }
    for col in CSV_COLUMNS:
        if col in row:
            continue
        key = col if "_" not in col else col.split("_")[0] + col.split("_")[1].title()
        value = r.durations.get(key)
        row[col] = "" if value is None else repr(float(value))
    return row


def op_counts(trace: list[dict]) -> dict:
    per = {}
    for rec in trace:
        if rec["kind"] == "tx_executed":
            d = rec["details"]
            per.setdefault(d["txKind"], {"ok": [], "rejected": []})["ok" if d["status"] else "rejected"].append(d["ops"])
    out = {}
    for kind, groups in sorted(per.items()):
        ok = groups["ok"]
        out[kind] = {
            "n": len(ok), "mean": round(statistics.fmean(ok), 6) if ok else None,
            "min": min(ok, default=None), "max": max(ok, default=None),
            "rejectedN": len(groups["rejected"]),
            "rejectedMean": round(statistics.fmean(groups["rejected"]), 6) if groups["rejected"] else None,
        }
    return out


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    sim = Simulation(cfg).run()
    return build_report(sim)


def build_report(sim: Simulation) -> RunReport:
    records = sim.tracker.all_records()
    phases = {}
    for r in records:
        phases[r.phase] = phases.get(r.phase, 0) + 1
    summary = {
        "transfers": len(records), "phases": dict(sorted(phases.items())),
        "scheduled": len(sim.cfg.transfers), "skipped": len(sim.skipped),
        "endTime": sim.now, "totalSupply": sim.total_supply,
        "blocks": {str(cid): ch.height for cid, ch in sorted(sim.net.chains.items())},
        "traceRecords": len(sim.trace.records),
    }
    return RunReport(
        scenario=sim.cfg.name, seed=sim.cfg.seed, protocol=sim.protocol, transfers=records,
        duration_stats=duration_stats([csv_row(r) for r in records]),
        op_counts=op_counts(sim.trace.records), attack_outcomes=attack_outcomes(sim),
        invariant_violations=list(sim.violations), warnings=list(sim.warnings), summary=summary,
        trace=sim.trace.records,
    )


def run_attack(kind: str, cfg: ScenarioConfig) -> tuple[AttackOutcome, RunReport]:
    """Add one attacker agent running ``kind`` to ``cfg`` and simulate."""
    attack_class(kind)
    user = cfg.attack.user
    agents = [a for a in cfg.agents if a.user != user]
    agents.append(AgentSpec(user, ATTACK_BEHAVIOR[kind], attack=kind, attempts=cfg.attack.attempts,
                            active_from=cfg.attack.start_time))
    cfg = ScenarioConfig(**{**vars(cfg), "agents": agents})
    report = run_scenario(cfg)
    outcome = next(a for a in report.attack_outcomes if a.attack == kind)
    return outcome, report


def emit_report(report: RunReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.json", "transfers": out / "transfers.csv", "trace": out / "trace.jsonl"}
        paths["report"].write_text(report.dumps())
        with paths["transfers"].open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in report.transfers:
                w.writerow(csv_row(r))
        with paths["trace"].open("w") as fh:
            for rec in report.trace:
                fh.write(json.dumps(to_jsonable(rec), sort_keys=True, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc.strerror or exc}") from None
    return paths
