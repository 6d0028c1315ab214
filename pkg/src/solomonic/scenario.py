"""Scenario files, repeated simulation runs, reports and parameter sweeps."""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

import jsonschema

from .agents import AgentProfile, StrategyAgent, compute_payoffs, front_run_fee
from .chain import ChainConfig, Simulation, dump_trace, substream
from .clause import ClauseConfig, FirstClaimContract, SolomonicClause

SCHEMA_VERSION = 1
CONTRACT_ID = "contract-0"

_AGENT_PROPS = {
    "id": {"type": "string", "minLength": 1},
    "strategy": {"enum": ["legitimate", "frontrunner", "coalition"]},
    "fee": {"type": "integer", "minimum": 0},
    "fee_policy": {"enum": ["fixed", "match", "outbid"]},
    "challenge_policy": {"enum": ["rational", "always_assert", "always_withdraw",
                                 "indifferent_random", "precommit_assert", "precommit_withdraw"]},
    "mode": {"enum": ["best_response", "always", "never"]},
    "theta": {"type": "integer", "minimum": 0},
    "cost": {"type": "integer", "minimum": 0},
    "clause_belief": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
    "absence_belief": {"type": "number", "minimum": 0, "maximum": 1},
    "p_absent": {"type": "number", "minimum": 0, "maximum": 1},
    "absent_delay": {"type": "integer", "minimum": 0},
    "perform_at": {"type": "integer", "minimum": 0},
    "expected_bots": {"type": "integer", "minimum": 0},
    "bot_fee_model": {"enum": ["none", "equal", "auction"]},
    "wallets": {"type": "integer", "minimum": 1},
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "seed", "payment", "horizon", "agents"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer"},
        "repetitions": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 0},
        "payment": {"type": "integer", "minimum": 1},
        "cost": {"type": "integer", "minimum": 0},
        "chain": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "block_interval": {"type": "integer", "minimum": 1},
                "block_capacity": {"type": "integer", "minimum": 1},
                "observation_latency": {"type": "integer", "minimum": 0},
                "tie_break": {"enum": ["time_hash", "random"]},
            },
        },
        "clause": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "window": {"type": "integer", "minimum": 1},
                "selection_policy": {"enum": ["uniform_random", "latest_timestamp"]},
                "burn_destination": {"enum": ["null", "charity"]},
                "challenge_fee": {"type": "integer", "minimum": 0},
                "hardcoded_responses": {"type": "boolean"},
                "response_deadline": {"type": "integer", "minimum": 1},
                "missing_response": {"enum": ["withdraw", "error"]},
                "signal": {"type": "boolean"},
            },
        },
        "agents": {
            "type": "array",
            "items": {"type": "object", "required": ["id", "strategy"],
                      "additionalProperties": False, "properties": _AGENT_PROPS},
        },
    },
}


class ScenarioError(ValueError):
    """Schema or semantic problem in a scenario or sweep file."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = f" at {path}" if path else ""
        where += f" (line {line})" if line else ""
        super().__init__(f"{message}{where}")


def _parse_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(e.msg, line=e.lineno) from None


def _line_of(text: str | None, key: str) -> int | None:
    if not text or not key:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


@dataclass
class Scenario:
    raw: dict
    name: str
    seed: int
    repetitions: int
    horizon: int
    payment: int
    cost: int
    chain: ChainConfig
    clause: ClauseConfig | None
    agents: list[AgentProfile]

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def scenario_from_dict(doc: dict, text: str | None = None) -> Scenario:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path)
        key = next((str(p) for p in reversed(e.absolute_path) if isinstance(p, str)), "")
        raise ScenarioError(e.message, path or "<root>", _line_of(text, key))
    chain = doc.get("chain", {})
    clause = doc.get("clause", {"enabled": False})
    ids = [a["id"] for a in doc["agents"]]
    if len(set(ids)) != len(ids):
        raise ScenarioError("agent ids must be unique", "agents")
    profiles = []
    for i, a in enumerate(doc["agents"]):
        kw = {k: v for k, v in a.items() if k != "id"}
        kw.setdefault("cost", doc.get("cost", 0) if a["strategy"] == "legitimate" else 0)
        try:
            profiles.append(AgentProfile(address=a["id"], legitimate=a["strategy"] == "legitimate", **kw))
        except ValueError as e:
            raise ScenarioError(str(e), f"agents/{i}", _line_of(text, a["id"])) from None
    try:
        clause_cfg = None
        if clause.get("enabled", True):
            clause_cfg = ClauseConfig(payment=doc["payment"],
                                      **{k: v for k, v in clause.items() if k != "enabled"})
        chain_cfg = ChainConfig(seed=doc["seed"], **chain)
    except ValueError as e:
        raise ScenarioError(str(e), "clause") from None
    return Scenario(doc, doc.get("name", "scenario"), doc["seed"], doc.get("repetitions", 1),
                    doc["horizon"], doc["payment"], doc.get("cost", 0), chain_cfg, clause_cfg, profiles)


def load_scenario(path: str | Path, *, seed: int | None = None, repetitions: int | None = None,
                  signal: bool = False) -> Scenario:
    text = Path(path).read_text()
    doc = _parse_json(text)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    doc = apply_overrides(doc, seed=seed, repetitions=repetitions, signal=signal)
    return scenario_from_dict(doc, text)


def apply_overrides(doc: dict, *, seed=None, repetitions=None, signal=False) -> dict:
    doc = copy.deepcopy(doc)
    if seed is not None:
        doc["seed"] = seed
    if repetitions is not None:
        doc["repetitions"] = repetitions
    if signal:
        doc.setdefault("clause", {"enabled": True})["signal"] = True
    return doc


# --- running ----------------------------------------------------------------


@dataclass
class RunResult:
    rep: int
    outcome: str  # paid_legitimate | paid_illegitimate | burned | none
    destination: str | None
    settled_height: int | None
    rounds: int
    delay: int | None
    bot_claims: int
    performed: bool
    payoffs: dict
    conserved: bool
    trace: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "rep": self.rep, "outcome": self.outcome, "to": self.destination,
            "settled_height": self.settled_height, "rounds": self.rounds, "delay": self.delay,
            "bot_claims": self.bot_claims, "performed": self.performed,
            "payoffs": {a: p.to_json() for a, p in sorted(self.payoffs.items())},
            "conserved": self.conserved,
        }


def build_run(sc: Scenario, rep: int) -> tuple[Simulation, list[StrategyAgent]]:
    chain_rng = substream(sc.seed, rep, "chain")
    if sc.clause is None:
        contract = FirstClaimContract(sc.payment, CONTRACT_ID)
    else:
        contract = SolomonicClause(sc.clause, substream(sc.seed, rep, "selection"), CONTRACT_ID)
    agents = [StrategyAgent(p, sc.payment, contract, substream(sc.seed, rep, "agent", p.address))
              for p in sc.agents]
    return Simulation(sc.chain, [contract], agents, chain_rng), agents


def run_once(sc: Scenario, rep: int, *, keep_trace: bool = True) -> RunResult:
    sim, agents = build_run(sc, rep)
    sim.run_until(sc.horizon)
    contract = sim.contracts[CONTRACT_ID]
    payoffs = compute_payoffs(sim, agents)
    legit = {w for a in agents if a.profile.legitimate for w in a.wallets}
    t = contract.transfer
    if t is None:
        outcome, dest = "none", None
    elif t.kind == "burned":
        outcome, dest = "burned", t.destination
    else:
        outcome = "paid_legitimate" if t.destination in legit else "paid_illegitimate"
        dest = t.destination
    interval = sc.chain.block_interval
    first_legit = min((e["t"] for e in sim.trace if e["type"] == "broadcast"
                       and e.get("kind") == "claim" and e["payee"] in legit), default=None)
    delay = None
    if contract.settled_at is not None and first_legit is not None:
        delay = contract.settled_at * interval - first_legit
    bot_claims = sum(1 for b in sim.chain.blocks for m in b.transactions
                     if m.kind == "claim" and m.payee not in legit)
    wallets = {w for a in agents for w in a.wallets}
    paid_out = sum(v for k, v in contract.ledger.balances.items() if k != contract.ledger.escrow)
    received = sum(p.received for p in payoffs.values())
    burned = sum(v for k, v in contract.ledger.balances.items()
                 if k not in wallets and k != contract.ledger.escrow)
    conserved = (received + burned == paid_out
                 and paid_out + contract.ledger.balances[contract.ledger.escrow] == sc.payment)
    trace = [{"rep": rep, **e} for e in sim.trace] if keep_trace else []
    return RunResult(rep, outcome, dest, contract.settled_at, contract.rounds, delay, bot_claims,
                     any(a.performed for a in agents if a.profile.legitimate), payoffs,
                     conserved, trace)


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, round(centre - half, 6)), min(1.0, round(centre + half, 6)))


def _mean(xs: list) -> float | None:
    return round(float(sum(xs) / len(xs)), 9) if xs else None


def aggregate(sc: Scenario, runs: list[RunResult]) -> dict:
    n = len(runs)
    counts = {k: sum(r.outcome == k for r in runs)
              for k in ("paid_legitimate", "paid_illegitimate", "burned", "none")}
    agents = sorted({a for r in runs for a in r.payoffs})
    return {
        "runs": n,
        "counts": counts,
        "frequencies": {k: round(v / n, 6) for k, v in counts.items()},
        "paid_legitimate_ci95": wilson_interval(counts["paid_legitimate"], n),
        "mean_payoff": {a: _mean([r.payoffs[a].net for r in runs]) for a in agents},
        "mean_rounds": _mean([r.rounds for r in runs]),
        "max_rounds": max((r.rounds for r in runs), default=0),
        "mean_delay": _mean([r.delay for r in runs if r.delay is not None]),
        "bot_claims": sum(r.bot_claims for r in runs),
        "performed": sum(r.performed for r in runs),
        "all_conserved": all(r.conserved for r in runs),
    }


@dataclass
class SimulationReport:
    scenario: Scenario
    runs: list[RunResult]

    def to_json(self) -> dict:
        sc = self.scenario
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": sc.name,
            "digest": sc.digest,
            "seed": sc.seed,
            "repetitions": sc.repetitions,
            "tie_break": sc.chain.tie_break,
            "clause": sc.clause is not None,
            "aggregate": aggregate(sc, self.runs),
            "runs": [r.to_json() for r in self.runs],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    def trace_jsonl(self) -> str:
        return dump_trace(e for r in self.runs for e in r.trace)


def simulate(sc: Scenario, *, keep_trace: bool = True) -> SimulationReport:
    # repetitions are independent; results are assembled in repetition order
    return SimulationReport(sc, [run_once(sc, rep, keep_trace=keep_trace)
                                 for rep in range(sc.repetitions)])


# --- sweeps -----------------------------------------------------------------

SWEEP_PARAMETERS = ("p_absent", "window", "n_bots", "fee")
CSV_COLUMNS = ("parameter", "value", "runs", "analytic_bot_profit", "simulated_bot_profit",
               "burn_rate", "paid_legitimate_rate", "performer_payoff", "mean_delay")

SWEEP_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "base", "parameter", "values"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "base": {"type": ["object", "string"]},
        "parameter": {"enum": list(SWEEP_PARAMETERS)},
        "values": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "repetitions": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 0},
    },
}


def _legit(doc: dict) -> dict:
    return next(a for a in doc["agents"] if a["strategy"] == "legitimate")


def _bots(doc: dict) -> list[dict]:
    return [a for a in doc["agents"] if a["strategy"] != "legitimate"]


def vary(doc: dict, parameter: str, value) -> dict:
    """Copy of a scenario document with one swept parameter set."""
    doc = copy.deepcopy(doc)
    if parameter == "p_absent":
        _legit(doc)["p_absent"] = value
        for b in _bots(doc):
            b["absence_belief"] = value
    elif parameter == "window":
        doc.setdefault("clause", {"enabled": True})["window"] = int(value)
    elif parameter == "fee":
        for a in doc["agents"]:
            a["fee"] = int(value)
    elif parameter == "n_bots":
        bots = _bots(doc)
        if not bots:
            raise ScenarioError("n_bots sweep needs a bot in the base scenario", "base/agents")
        template = bots[0]
        others = [a for a in doc["agents"] if a["strategy"] == "legitimate"]
        doc["agents"] = others + [dict(template, id=f"bot{i + 1}") for i in range(int(value))]
    else:
        raise ScenarioError(f"unknown sweep parameter {parameter!r}", "parameter")
    return doc


def analytic_bot_profit(sc: Scenario) -> Fraction | None:
    """Expected profit of one bot that claims, from the closed forms."""
    bots = [p for p in sc.agents if not p.legitimate]
    legit = [p for p in sc.agents if p.legitimate]
    if not bots or not legit:
        return None
    bot, perf = bots[0], legit[0]
    T = Fraction(sc.payment)
    fee = Fraction(front_run_fee(bot, perf.fee))
    if sc.clause is not None:
        return Fraction(perf.p_absent).limit_denominator(10**6) * T - fee
    top = max(fee, perf.fee)
    if fee < top:
        return -fee
    winners = len(bots) + (1 if perf.fee == fee else 0)
    return T / winners - fee


def run_sweep(spec: dict, base_dir: Path | None = None, *, seed: int | None = None) -> list[dict]:
    validator = jsonschema.Draft202012Validator(SWEEP_SCHEMA)
    errors = sorted(validator.iter_errors(spec), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ScenarioError(e.message, "/".join(map(str, e.absolute_path)) or "<root>")
    base = spec["base"]
    if isinstance(base, str):
        path = Path(base)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        base = _parse_json(path.read_text())
    base = apply_overrides(base, seed=seed, repetitions=spec.get("repetitions"))
    if "horizon" in spec:
        base["horizon"] = spec["horizon"]
    rows = []
    for value in spec["values"]:
        sc = scenario_from_dict(vary(base, spec["parameter"], value))
        report = simulate(sc, keep_trace=False)
        runs = report.runs
        bot_ids = [p.address for p in sc.agents if not p.legitimate]
        legit_ids = [p.address for p in sc.agents if p.legitimate]
        bot_profit = [r.payoffs[b].net for r in runs for b in bot_ids]
        analytic = analytic_bot_profit(sc)
        n = len(runs)
        rows.append({
            "parameter": spec["parameter"],
            "value": value,
            "runs": n,
            "analytic_bot_profit": None if analytic is None else round(float(analytic), 9),
            "simulated_bot_profit": _mean(bot_profit),
            "burn_rate": round(sum(r.outcome == "burned" for r in runs) / n, 6),
            "paid_legitimate_rate": round(sum(r.outcome == "paid_legitimate" for r in runs) / n, 6),
            "performer_payoff": _mean([r.payoffs[a].net for r in runs for a in legit_ids]),
            "mean_delay": _mean([r.delay for r in runs if r.delay is not None]),
        })
    return rows


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r[k] is None else r[k] for k in CSV_COLUMNS})
    return buf.getvalue()
