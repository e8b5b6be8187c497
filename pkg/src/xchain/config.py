"""Scenario description loaded from JSON.

Every field is explicit in the file; the only defaults are those of
``ChainConfig`` and ``ProtocolParams``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .chain import ChainConfig
from .model import XChainError
from .protocol import ProtocolParams

BEHAVIORS = (
    "HonestSender", "HonestRecipient", "AltruisticFinalizer", "RationalFinalizer",
    "ByzantineWithholder", "ByzantineForger", "ByzantineDoubleClaimer", "ForkFeedingRelayer",
)


class ConfigError(XChainError, ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class AgentSpec:
    user: str
    behavior: str
    cost_threshold: int = 0
    patience_blocks: int = 0
    active_from: float = 0.0
    active_until: float | None = None
    attack: str | None = None
    attempts: int = 3

    def active(self, time: float) -> bool:
        return time >= self.active_from and (self.active_until is None or time < self.active_until)


@dataclass
class TransferSpec:
    sender: str
    recipient: str
    src: int
    dest: int
    x: int
    y: int
    submit_time: float


@dataclass
class RelaySpec:
    host: int
    remote: int
    lag_blocks: int = 1
    fee: int = 0
    pauses: list = field(default_factory=list)


@dataclass
class AttackSpec:
    user: str = "mallory"
    src: int | None = None
    dest: int | None = None
    third: int | None = None
    start_time: float = 0.0
    attempts: int = 3


@dataclass
class ScenarioConfig:
    chains: list
    registry: dict
    genesis: list
    agents: list
    transfers: list
    params: ProtocolParams
    relays: list
    seed: int = 0
    protocol: int = 2
    horizon_seconds: float | None = None
    attack: AttackSpec = field(default_factory=AttackSpec)
    name: str = "scenario"

    @property
    def total_supply(self) -> int:
        return sum(count for _chain, _user, count in self.genesis)

    def users(self) -> list[str]:
        seen = {}
        for _c, user, _n in self.genesis:
            seen.setdefault(user, None)
        for t in self.transfers:
            seen.setdefault(t.sender, None)
            seen.setdefault(t.recipient, None)
        for a in self.agents:
            seen.setdefault(a.user, None)
        return list(seen)

    def horizon(self) -> float:
        if self.horizon_seconds is not None:
            return self.horizon_seconds
        last = max([t.submit_time for t in self.transfers] + [self.attack.start_time, 0.0])
        slowest = max(c.inter_block_seconds for c in self.chains)
        return last + 200 * slowest


def _get(d: dict, key: str, path: str, kind=None, default=...):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    value = d[key]
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _num(d, key, path, default=...):
    return _get(d, key, path, (int, float), default)


def parse_config(raw: dict, name: str = "scenario") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("$", "scenario must be a JSON object")
    chains = []
    for i, c in enumerate(_get(raw, "chains", "$", list)):
        p = f"$.chains[{i}]"
        try:
            chains.append(ChainConfig(
                chain=_get(c, "id", p, int),
                inter_block_seconds=float(_num(c, "interBlockSeconds", p, 15.0)),
                confirmations=_get(c, "confirmations", p, int, 5),
                timing=_get(c, "timing", p, str, "fixed"),
                max_tx_per_block=_get(c, "maxTxPerBlock", p, (int, type(None)), None),
            ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(p, str(exc)) from None
    if not chains:
        raise ConfigError("$.chains", "at least one chain required")
    ids = [c.chain for c in chains]
    if len(set(ids)) != len(ids):
        raise ConfigError("$.chains", "duplicate chain id")

    reg_raw = _get(raw, "registry", "$", dict, {})
    registry = {}
    for cid in ids:
        addr = reg_raw.get(str(cid), f"asset-{cid}")
        if not isinstance(addr, str):
            raise ConfigError(f"$.registry.{cid}", "address must be a string")
        registry[cid] = addr
    for key in reg_raw:
        if not key.lstrip("-").isdigit() or int(key) not in registry:
            raise ConfigError(f"$.registry.{key}", "unknown chain")

    genesis = []
    for i, g in enumerate(_get(raw, "genesisOwnership", "$", list)):
        p = f"$.genesisOwnership[{i}]"
        chain = _get(g, "chain", p, int)
        if chain not in registry:
            raise ConfigError(f"{p}.chain", f"unknown chain {chain}")
        count = _get(g, "count", p, int)
        if count < 0:
            raise ConfigError(f"{p}.count", "must be >= 0")
        genesis.append((chain, _get(g, "user", p, str), count))

    pr = _get(raw, "params", "$", dict, {})
    try:
        params = ProtocolParams(
            claim_timeout_blocks=_get(pr, "claimTimeoutBlocks", "$.params", int, 10),
            confirm_timeout_blocks=_get(pr, "confirmTimeoutBlocks", "$.params", int, 40),
            fee_entity_count=_get(pr, "feeEntityCount", "$.params", int, 1),
            min_confirmations=_get(pr, "minConfirmations", "$.params", int, 5),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("$.params", str(exc)) from None

    agents = []
    for i, a in enumerate(_get(raw, "agents", "$", list, [])):
        p = f"$.agents[{i}]"
        behavior = _get(a, "behavior", p, str)
        if behavior not in BEHAVIORS:
            raise ConfigError(f"{p}.behavior", f"unknown behavior {behavior!r}")
        agents.append(AgentSpec(
            user=_get(a, "user", p, str), behavior=behavior,
            cost_threshold=_get(a, "costThreshold", p, int, 0),
            patience_blocks=_get(a, "patienceBlocks", p, int, 0),
            active_from=float(_num(a, "activeFrom", p, 0.0)),
            active_until=_get(a, "activeUntil", p, (int, float, type(None)), None),
            attack=_get(a, "attack", p, (str, type(None)), None),
            attempts=_get(a, "attempts", p, int, 3),
        ))
    if len({a.user for a in agents}) != len(agents):
        raise ConfigError("$.agents", "a user may have only one behavior")

    transfers = []
    for i, t in enumerate(_get(raw, "transfers", "$", list, [])):
        p = f"$.transfers[{i}]"
        spec = TransferSpec(
            sender=_get(t, "sender", p, str), recipient=_get(t, "recipient", p, str),
            src=_get(t, "src", p, int), dest=_get(t, "dest", p, int),
            x=_get(t, "x", p, int), y=_get(t, "y", p, int, 0),
            submit_time=float(_num(t, "submitTime", p)),
        )
        for key in ("src", "dest"):
            if getattr(spec, key) not in registry:
                raise ConfigError(f"{p}.{key}", f"unknown chain {getattr(spec, key)}")
        if spec.x < 1 or spec.y < 0 or spec.submit_time < 0:
            raise ConfigError(p, "need x >= 1, y >= 0, submitTime >= 0")
        transfers.append(spec)

    relays = []
    for i, r in enumerate(_get(raw, "relays", "$", list, [])):
        p = f"$.relays[{i}]"
        spec = RelaySpec(host=_get(r, "host", p, int), remote=_get(r, "remote", p, int),
                         lag_blocks=_get(r, "lagBlocks", p, int, 1), fee=_get(r, "fee", p, int, 0),
                         pauses=[tuple(map(float, w)) for w in _get(r, "pauses", p, list, [])])
        for key in ("host", "remote"):
            if getattr(spec, key) not in registry:
                raise ConfigError(f"{p}.{key}", "unknown chain")
        if spec.host == spec.remote or spec.lag_blocks < 0 or spec.fee < 0:
            raise ConfigError(p, "need host != remote, lagBlocks >= 0, fee >= 0")
        relays.append(spec)
    if len({(r.host, r.remote) for r in relays}) != len(relays):
        raise ConfigError("$.relays", "duplicate (host, remote) pair")

    protocol = _get(raw, "protocol", "$", int, 2)
    if protocol not in (1, 2):
        raise ConfigError("$.protocol", "must be 1 or 2")

    at = _get(raw, "attack", "$", dict, {})
    attack = AttackSpec(user=_get(at, "user", "$.attack", str, "mallory"),
                        src=_get(at, "src", "$.attack", int, ids[0]),
                        dest=_get(at, "dest", "$.attack", int, ids[1] if len(ids) > 1 else ids[0]),
                        third=_get(at, "third", "$.attack", (int, type(None)), ids[2] if len(ids) > 2 else None),
                        start_time=float(_num(at, "startTime", "$.attack", 0.0)),
                        attempts=_get(at, "attempts", "$.attack", int, 3))

    seed = _get(raw, "seed", "$", int, 0)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("$.seed", "must be a 64-bit unsigned integer")
    horizon = _get(raw, "horizonSeconds", "$", (int, float, type(None)), None)
    return ScenarioConfig(chains=chains, registry=registry, genesis=genesis, agents=agents,
                          transfers=transfers, params=params, relays=relays, seed=seed,
                          protocol=protocol, horizon_seconds=horizon, attack=attack,
                          name=_get(raw, "name", "$", str, name))


def load_config(path, seed: int | None = None) -> ScenarioConfig:
    """Read a scenario file; ``seed`` beats $XCHAIN_SEED, which beats the file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    cfg = parse_config(raw, name=path.stem)
    env = os.environ.get("XCHAIN_SEED")
    if seed is None and env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError("$XCHAIN_SEED", f"not an integer: {env!r}") from None
    if seed is not None:
        cfg.seed = seed
    return cfg
