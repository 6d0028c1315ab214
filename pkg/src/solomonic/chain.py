"""Deterministic discrete-event model of a public mempool and fee-ordered blocks.

Time advances in integer ticks. Agents act first within a tick; blocks are
built afterwards at every positive multiple of ``block_interval``. Block
height ``h`` is built at tick ``h * block_interval``.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Protocol, Sequence

TIE_BREAKS = ("time_hash", "random")


class ChainError(Exception):
    pass


class DuplicateClaim(ChainError):
    pass


class HorizonExceeded(ChainError):
    def __init__(self, horizon: int, pending: Sequence[str], trace: list[dict] | None = None):
        self.horizon = horizon
        self.pending = list(pending)
        self.trace = trace or []
        super().__init__(f"settlement still pending at horizon {horizon}: {', '.join(self.pending)}")


def substream(seed: int, *names: Any) -> random.Random:
    """Independent named PRNG stream derived from one seed."""
    return random.Random("/".join([str(seed), *map(str, names)]))


def address_hash(address: str) -> str:
    return hashlib.sha256(address.encode()).hexdigest()


@dataclass(frozen=True)
class ClaimMessage:
    """A transaction: a payment claim or a challenge-stage response.

    ``sender`` is the controlling agent (it pays the fee); ``payee`` is the
    wallet that would receive payment. ``precommit`` carries a hard-coded
    challenge response. ``not_before`` delays inclusion, which models a
    message held up by network problems.
    """

    sender: str
    payee: str
    fee: int
    broadcast_time: int
    evidence: bool = True
    contract: str = "contract-0"
    kind: str = "claim"
    action: str | None = None
    round: int | None = None
    precommit: str | None = None
    not_before: int = 0

    def __post_init__(self):
        if self.fee < 0:
            raise ValueError("fee must be non-negative")
        if self.kind not in ("claim", "response"):
            raise ValueError(f"unknown message kind {self.kind!r}")
        if self.kind == "response" and self.action not in ("assert", "withdraw"):
            raise ValueError("a response must assert or withdraw")

    @property
    def key(self) -> tuple:
        return (self.contract, self.kind, self.payee, self.round)

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class Receipt:
    seq: int
    visible_at: int


@dataclass(frozen=True)
class Block:
    height: int
    build_time: int
    transactions: tuple[ClaimMessage, ...]

    def to_json(self) -> dict:
        return {"height": self.height, "build_time": self.build_time,
                "transactions": [m.to_json() for m in self.transactions]}


@dataclass(frozen=True)
class ChainConfig:
    block_interval: int = 4
    block_capacity: int = 16
    observation_latency: int = 1
    seed: int = 0
    tie_break: str = "time_hash"

    def __post_init__(self):
        if self.block_interval < 1:
            raise ValueError("block_interval must be >= 1")
        if self.block_capacity < 1:
            raise ValueError("block_capacity must be >= 1")
        if self.observation_latency < 0:
            raise ValueError("observation_latency must be >= 0")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")


class Chain:
    """Mempool plus block builder.

    Ordering within a block is fee-descending. Equal fees are broken by
    broadcast time then payee-address hash (``time_hash``), or shuffled by
    the chain's seeded stream (``random``), which stands in for a miner that
    orders equal bids arbitrarily.
    """

    def __init__(self, config: ChainConfig, rng: random.Random | None = None):
        self.config = config
        self.rng = rng or substream(config.seed, "chain")
        self.now = 0
        self.pending: list[tuple[int, ClaimMessage]] = []
        self.blocks: list[Block] = []
        self.events: list[dict] = []
        self._seq = 0
        self._seen: set[tuple] = set()

    def broadcast(self, msg: ClaimMessage, at: int | None = None) -> Receipt:
        at = self.now if at is None else at
        if at < self.now:
            raise ChainError(f"cannot broadcast in the past (tick {at} < {self.now})")
        if msg.broadcast_time != at:
            msg = replace(msg, broadcast_time=at)
        if msg.key in self._seen:
            raise DuplicateClaim(f"{msg.payee} already claimed {msg.contract}")
        self._seen.add(msg.key)
        self.pending.append((self._seq, msg))
        receipt = Receipt(self._seq, at + self.config.observation_latency)
        self._seq += 1
        self.events.append({"t": at, "type": "broadcast", "seq": receipt.seq, **msg.to_json()})
        return receipt

    def observe_mempool(self, observer: str | None, at: int) -> list[ClaimMessage]:
        lat = self.config.observation_latency
        return [m for _, m in self.pending
                if m.sender == observer or m.broadcast_time + lat <= at]

    def is_block_boundary(self, t: int) -> bool:
        return t > 0 and t % self.config.block_interval == 0

    def _order(self, entries: list[tuple[int, ClaimMessage]]) -> list[tuple[int, ClaimMessage]]:
        if self.config.tie_break == "random":
            keyed = [(-m.fee, self.rng.random(), s, m) for s, m in entries]
            return [(s, m) for _, _, s, m in sorted(keyed, key=lambda k: k[:3])]
        return sorted(entries, key=lambda e: (-e[1].fee, e[1].broadcast_time,
                                              address_hash(e[1].payee), e[0]))

    def build_block(self, at: int) -> Block:
        if not self.is_block_boundary(at):
            raise ChainError(f"tick {at} is not a block boundary")
        eligible = [e for e in self.pending if e[1].not_before <= at]
        chosen = self._order(eligible)[: self.config.block_capacity]
        ids = {s for s, _ in chosen}
        self.pending = [e for e in self.pending if e[0] not in ids]
        block = Block(at // self.config.block_interval, at, tuple(m for _, m in chosen))
        self.blocks.append(block)
        self.events.append({"t": at, "type": "block", "height": block.height,
                            "seqs": [s for s, _ in chosen]})
        return block


@dataclass(frozen=True)
class Solicitation:
    """Addresses asked to respond in the current challenge round."""

    contract: str
    round: int
    selected: tuple[str, ...]
    deadline_height: int


@dataclass
class ChainView:
    """What an agent can see at a tick."""

    now: int
    visible: list[ClaimMessage]
    contracts: dict[str, Any]
    solicitations: list[Solicitation] = field(default_factory=list)
    height: int = 0


class Contract(Protocol):
    contract_id: str
    signal: bool

    def process_block(self, block: Block) -> list[dict]: ...

    def solicitation(self) -> Solicitation | None: ...

    @property
    def pending(self) -> bool: ...


class Agent(Protocol):
    agent_id: str

    def act(self, view: ChainView) -> Iterable[ClaimMessage]: ...


class Simulation:
    """Single-threaded event loop tying agents, mempool and contracts together."""

    def __init__(self, config: ChainConfig, contracts: Iterable[Contract] = (),
                 agents: Iterable[Agent] = (), rng: random.Random | None = None):
        self.chain = Chain(config, rng)
        self.contracts = {c.contract_id: c for c in contracts}
        self.agents = list(agents)

    @property
    def trace(self) -> list[dict]:
        return self.chain.events

    def add_agent(self, agent: Agent) -> None:
        self.agents.append(agent)

    def view(self, agent_id: str | None, t: int) -> ChainView:
        sols = [s for c in self.contracts.values() if (s := c.solicitation()) is not None]
        return ChainView(now=t, visible=self.chain.observe_mempool(agent_id, t),
                         contracts=self.contracts, solicitations=sols,
                         height=len(self.chain.blocks))

    def step(self) -> None:
        t = self.chain.now
        for agent in self.agents:
            for msg in agent.act(self.view(agent.agent_id, t)):
                self.chain.broadcast(msg, t)
        if self.chain.is_block_boundary(t):
            block = self.chain.build_block(t)
            for c in self.contracts.values():
                for ev in c.process_block(block):
                    self.chain.events.append({"t": t, **ev})
        self.chain.now = t + 1

    def run_until(self, horizon: int, *, stop_when_settled: bool = False) -> list[dict]:
        """Advance through tick ``horizon`` inclusive and return the trace.

        Raises :class:`HorizonExceeded` if any contract is still collecting
        claims or inside a challenge when the horizon is reached.
        """
        while self.chain.now <= horizon:
            self.step()
            if stop_when_settled and self._all_settled():
                break
        pending = [cid for cid, c in self.contracts.items() if c.pending]
        if pending:
            raise HorizonExceeded(horizon, pending, self.trace)
        return self.trace

    def _all_settled(self) -> bool:
        return bool(self.contracts) and all(
            getattr(c, "settled", False) for c in self.contracts.values())


def dump_trace(events: Iterable[dict]) -> str:
    """JSON-lines, one event per line, keys sorted."""
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in events)


def load_trace(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


class _Replayer:
    agent_id = "<replay>"

    def __init__(self, events: list[dict]):
        self.by_tick: dict[int, list[ClaimMessage]] = {}
        fields = set(ClaimMessage.__dataclass_fields__)
        for ev in events:
            if ev.get("type") == "broadcast":
                msg = ClaimMessage(**{k: v for k, v in ev.items() if k in fields})
                self.by_tick.setdefault(ev["t"], []).append(msg)

    def act(self, view: ChainView) -> list[ClaimMessage]:
        return self.by_tick.get(view.now, [])


def replay(events: list[dict], config: ChainConfig, contracts: Iterable[Contract] = (),
           rng: random.Random | None = None, horizon: int | None = None) -> Simulation:
    """Re-drive a fresh simulation with the broadcasts recorded in ``events``.

    Contracts must be fresh instances seeded like the originals; the result
    can be compared block by block with the recorded run.
    """
    if horizon is None:
        horizon = max((e["t"] for e in events), default=0)
    sim = Simulation(config, contracts, [_Replayer(events)], rng)
    sim.run_until(horizon)
    return sim
