from pathlib import Path

import pytest

from kit import config, transfer
from xchain.agents import ATTACKS, UnknownAttack, attack_class
from xchain.config import load_config
from xchain.harness import run_attack, run_scenario
from xchain.protocol import REJECTION_CODES
from xchain.world import Simulation

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def claims_of(sim, burn_hex):
    """(signer, status, code, block height) of every claim touching a burn."""
    out = []
    for blk in sim.chain(2).blocks:
        for tx, rc in zip(blk.transactions, blk.receipts):
            if tx.kind == "claim" and tx.payload[1].id.hex() == burn_hex:
                out.append((tx.signer, rc.status, rc.events[0], blk.header.number))
    return out


def one(sim):
    (rec,) = sim.tracker.records.values()
    return rec


def withheld(*agents, x=3, y=1, **kw):
    return Simulation(config(transfers=[transfer(x=x, y=y)],
                             agents=[{"user": "bob", "behavior": "ByzantineWithholder"}, *agents], **kw)).run()


def test_withholding_recipient_gets_claimed_by_altruist():
    sim = withheld({"user": "dave", "behavior": "AltruisticFinalizer"})
    rec = one(sim)
    assert rec.phase == "Confirmed"
    assert claims_of(sim, rec.burn_tx_id) == [("dave", True, "Claimed", 8)]
    assert sim.ledger(2).owned["bob"] == {0, 1, 2} and rec.fee_paid == ()


def test_patient_altruist_claims_after_timeout_and_earns_fee():
    sim = withheld({"user": "dave", "behavior": "AltruisticFinalizer", "patienceBlocks": 5})
    rec = one(sim)
    assert rec.fee_paid == (0,)
    assert sim.ledger(2).owned["bob"] == {1, 2} and sim.ledger(2).owned["dave"] == {0}


def test_idle_altruist_submits_nothing():
    sim = Simulation(config(transfers=[], agents=[{"user": "dave", "behavior": "AltruisticFinalizer"}],
                            horizon=300)).run()
    assert not [r for r in sim.trace.records if r["kind"] == "tx_submitted"]


def test_two_altruists_race_one_wins():
    sim = withheld({"user": "dave", "behavior": "AltruisticFinalizer"},
                   {"user": "erin", "behavior": "AltruisticFinalizer"})
    got = claims_of(sim, one(sim).burn_tx_id)
    assert sorted((s, c) for s, _, c, _ in got) == [("dave", "Claimed"), ("erin", "AlreadyClaimed")]
    assert sum(ok for _, ok, _, _ in got) == 1


def expected_rational_claim_height(burn_height, timeout, lag=1):
    # at dest block m the relay holds source headers up to m - lag
    m = burn_height + timeout + lag
    return m + 1


def test_rational_acts_right_after_timeout():
    sim = withheld({"user": "rick", "behavior": "RationalFinalizer", "costThreshold": 1},
                   params={"feeEntityCount": 2})
    rec = one(sim)
    got = claims_of(sim, rec.burn_tx_id)
    assert got == [("rick", True, "Claimed", expected_rational_claim_height(1, 10))]
    assert rec.fee_paid == (0, 1)


def test_rational_with_zero_cost_behaves_like_late_altruist():
    sim = withheld({"user": "rick", "behavior": "RationalFinalizer", "costThreshold": 0})
    assert claims_of(sim, one(sim).burn_tx_id) == [("rick", True, "Claimed", 13)]


def test_rational_without_reward_never_acts():
    sim = withheld({"user": "rick", "behavior": "RationalFinalizer"}, x=1, horizon=900)
    assert claims_of(sim, one(sim).burn_tx_id) == []
    assert one(sim).phase == "Burned"
    assert any("never claimed" in w for w in sim.warnings)


def test_rational_confirmer_waits_for_stake_timeout():
    sim = Simulation(config(transfers=[transfer(x=1, y=2)],
                            agents=[{"user": "alice", "behavior": "ByzantineWithholder"},
                                    {"user": "rick", "behavior": "RationalFinalizer", "costThreshold": 1}])).run()
    rec = one(sim)
    assert rec.phase == "Confirmed" and rec.stake_outcome == "PaidToConfirmer(rick)"
    blk = sim.chain(1).locate(bytes.fromhex(rec.confirm_tx_id))
    # burn at height 1, confirm must land where height - 1 > 40
    assert blk.header.number == 42
    assert sim.ledger(1).owned["rick"] == {1, 2}


def test_altruistic_confirmer_returns_stake_to_sender():
    sim = Simulation(config(transfers=[transfer(x=1, y=2, at=7.5 + 15 * i) for i in range(4)],
                            agents=[{"user": "alice", "behavior": "ByzantineWithholder"},
                                    {"user": "dave", "behavior": "AltruisticFinalizer"}])).run()
    recs = list(sim.tracker.records.values())
    assert [r.phase for r in recs] == ["Confirmed"] * 4
    assert {r.stake_outcome for r in recs} == {"ReturnedToSender"}
    assert not sim.violations


def test_honest_pair_confirms_everything():
    sim = Simulation(config(transfers=[transfer(), transfer(at=22.5)])).run()
    assert [r.phase for r in sim.tracker.records.values()] == ["Confirmed", "Confirmed"]


def test_unknown_attack():
    with pytest.raises(UnknownAttack):
        attack_class("teleport")
    with pytest.raises(UnknownAttack):
        run_attack("teleport", load_config(SCENARIOS / "attack.json"))


@pytest.fixture(scope="module")
def attack_runs():
    cfg = load_config(SCENARIOS / "attack.json")
    return {kind: run_attack(kind, cfg) for kind in sorted(ATTACKS)}


@pytest.mark.parametrize("kind", sorted(ATTACKS))
def test_attack_never_succeeds(attack_runs, kind):
    outcome, report = attack_runs[kind]
    assert outcome.attempted > 0 and outcome.pending == 0
    assert outcome.succeeded == 0
    assert not report.invariant_violations
    honest = [r for r in report.transfers if r.sender != "mallory"]
    assert honest and all(r.phase == "Confirmed" for r in honest)


EXPECTED_CODES = {
    "mimic-contract": {"UnauthorizedBurnContract", "UnauthorizedClaimContract"},
    "fake-proof": {"InclusionFailed"},
    "double-claim": {"AlreadyClaimed"},
    "wrong-chain": {"WrongDest"},
    "double-confirm": {"AlreadyConfirmed", "WrongSourceContract", "ClaimFailed", "AlreadyClaimed"},
    "fork-relayer": {"InclusionFailed"},
    "bad-burn": {"NotOwnerX", "NotOwnerY", "Overlap", "UnknownDest", "Malformed"},
    "failed-burn": {"BurnFailed", "NotOwnerX"},
}


@pytest.mark.parametrize("kind", sorted(ATTACKS))
def test_attack_rejection_codes(attack_runs, kind):
    assert set(attack_runs[kind][0].rejection_codes) == EXPECTED_CODES[kind]


def test_attack_suite_covers_every_rejection_code(attack_runs):
    seen = set()
    for outcome, _ in attack_runs.values():
        seen |= set(outcome.rejection_codes)
    assert seen == set(REJECTION_CODES)


def test_fork_relayer_really_moved_the_relay(attack_runs):
    _, report = attack_runs["fork-relayer"]
    syncs = [r["details"]["mainHeadHeight"] for r in report.trace
             if r["kind"] == "relay_sync" and r["details"]["hostChain"] == 2 and r["details"]["remoteChain"] == 1]
    jumps = [b - a for a, b in zip(syncs, syncs[1:])]
    assert max(jumps) >= 4  # a whole fork landed at once


def test_fake_proof_covers_many_fields(attack_runs):
    outcome, _ = attack_runs["fake-proof"]
    assert outcome.attempted >= 25
