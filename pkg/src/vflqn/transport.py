"""Metered in-process channels between the host (A), guest (B) and coordinator (C).

Every message goes through :class:`Network`, which delivers FIFO per directed
channel and books element counts into a :class:`CommLedger`. An optional
transcript file receives one length-prefixed JSON record per message.
"""
import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Optional

from .errors import ProtocolError
from .he.base import Ciphertext


class Party(str, Enum):
    A = "A"
    B = "B"
    C = "C"


class Kind(str, Enum):
    UA = "UA"
    D = "D"
    PartialGradA = "PartialGradA"
    PartialGradB = "PartialGradB"
    Loss = "Loss"
    DeltaUA = "DeltaUA"
    H_SCALARS = "H_SCALARS"
    V_A = "V_A"
    V_B = "V_B"
    StepA = "StepA"
    StepB = "StepB"
    Setup = "Setup"


A, B, C = Party.A, Party.B, Party.C

ROUTES = {
    Kind.UA: (A, B),
    Kind.D: (B, A),
    Kind.PartialGradA: (A, C),
    Kind.PartialGradB: (B, C),
    Kind.Loss: (B, C),
    Kind.DeltaUA: (A, B),
    Kind.H_SCALARS: (B, A),
    Kind.V_A: (A, C),
    Kind.V_B: (B, C),
    Kind.StepA: (C, A),
    Kind.StepB: (C, B),
}
ENCRYPTED = frozenset({Kind.UA, Kind.D, Kind.PartialGradA, Kind.PartialGradB, Kind.Loss,
                       Kind.DeltaUA, Kind.H_SCALARS, Kind.V_A, Kind.V_B})
PLAINTEXT = frozenset({Kind.StepA, Kind.StepB})
# vector traffic between the data parties and the coordinator (loss scalar excluded)
COORD_VECTOR_KINDS = frozenset({Kind.PartialGradA, Kind.PartialGradB, Kind.V_A, Kind.V_B,
                                Kind.StepA, Kind.StepB})


@dataclass(frozen=True)
class ProtocolMessage:
    kind: Kind
    round: int
    sender: Party
    receiver: Party
    payload: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "sender", Party(self.sender))
        object.__setattr__(self, "receiver", Party(self.receiver))
        object.__setattr__(self, "payload", tuple(self.payload))
        if self.sender == self.receiver:
            raise ProtocolError("a party cannot message itself")
        route = ROUTES.get(kind)
        if route is not None and route != (self.sender, self.receiver):
            raise ProtocolError(f"{kind.value} must travel {route[0].value}->{route[1].value}, "
                                f"not {self.sender.value}->{self.receiver.value}")
        if kind in ENCRYPTED and not all(isinstance(p, Ciphertext) for p in self.payload):
            raise ProtocolError(f"{kind.value} payload must be ciphertexts only")
        if kind in PLAINTEXT and not all(isinstance(p, float) for p in self.payload):
            raise ProtocolError(f"{kind.value} payload must be plain floats")
        if kind is Kind.Setup and self.payload:
            raise ProtocolError("Setup carries metadata only")

    @property
    def n_encrypted(self) -> int:
        return len(self.payload) if self.kind in ENCRYPTED else 0

    @property
    def n_plaintext(self) -> int:
        return len(self.payload) if self.kind in PLAINTEXT else 0

    def to_record(self) -> dict:
        if self.kind in ENCRYPTED:
            payload = [c.to_wire() for c in self.payload]
        else:
            payload = [repr(x) for x in self.payload]
        return {"kind": self.kind.value, "round": self.round, "sender": self.sender.value,
                "receiver": self.receiver.value, "payload": payload, "meta": self.meta}

    @classmethod
    def from_record(cls, record: dict, backend=None) -> "ProtocolMessage":
        kind = Kind(record["kind"])
        if kind in ENCRYPTED:
            if backend is None:
                payload = [Ciphertext(_parse_raw(p["raw"]), int(p["exp"])) for p in record["payload"]]
            else:
                payload = [backend.from_wire(p) for p in record["payload"]]
        else:
            payload = [float(x) for x in record["payload"]]
        return cls(kind, int(record["round"]), Party(record["sender"]), Party(record["receiver"]),
                   tuple(payload), dict(record.get("meta", {})))


def _parse_raw(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def encode_record(record: dict) -> str:
    body = json.dumps(record, separators=(",", ":"), sort_keys=True)
    return f"{len(body.encode())} {body}\n"


def read_transcript(path) -> list[dict]:
    """Parse a transcript; each line is ``<byte length> <json>``."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            head, sep, body = line.partition(" ")
            if not sep or not head.isdigit() or int(head) != len(body.encode()):
                raise ProtocolError(f"corrupt transcript record at line {lineno}")
            try:
                records.append(json.loads(body))
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"corrupt transcript record at line {lineno}: {exc}") from exc
    return records


def _payload_bytes(msg: ProtocolMessage) -> int:
    if msg.kind in ENCRYPTED:
        return sum(len(str(c.raw)) + 16 for c in msg.payload)
    return 24 * len(msg.payload)


@dataclass
class ChannelCount:
    encrypted: int = 0
    plaintext: int = 0
    bytes: int = 0
    messages: int = 0


@dataclass
class RoundCost:
    """Element counts for one round.

    ``ab`` is encrypted numbers exchanged between A and B in both directions.
    ``parties_coord`` is vector traffic between the data parties and the
    coordinator: encrypted gradients and v upstream plus plaintext steps
    downstream. The encrypted loss scalar is reported on its own.
    """

    ab: int
    parties_coord: int
    upstream_encrypted: int
    downstream_plain: int
    loss_scalars: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class CommLedger:
    def __init__(self):
        # (round, sender, receiver, kind) -> counts
        self._cells: dict[tuple, ChannelCount] = defaultdict(ChannelCount)
        self.round_info: dict[int, dict] = {}
        self.meta: dict[str, Any] = {}

    def record(self, msg: ProtocolMessage, nbytes: int) -> None:
        cell = self._cells[(msg.round, msg.sender.value, msg.receiver.value, msg.kind.value)]
        cell.encrypted += msg.n_encrypted
        cell.plaintext += msg.n_plaintext
        cell.bytes += nbytes
        cell.messages += 1

    def note_round(self, k: int, **info) -> None:
        self.round_info.setdefault(k, {}).update(info)

    def rounds(self) -> list[int]:
        return sorted({key[0] for key in self._cells if key[0] > 0})

    def channel(self, sender: str, receiver: str, k: Optional[int] = None) -> ChannelCount:
        out = ChannelCount()
        for (r, s, d, _), c in self._cells.items():
            if s == sender and d == receiver and (k is None or r == k):
                out.encrypted += c.encrypted
                out.plaintext += c.plaintext
                out.bytes += c.bytes
                out.messages += c.messages
        return out

    def round_cost(self, k: int) -> RoundCost:
        cells = [(key, c) for key, c in self._cells.items() if key[0] == k]
        if k not in self.round_info and not cells:
            raise KeyError(f"no traffic recorded for round {k}")
        ab = up = down = loss = 0
        for (_, s, d, kind), c in cells:
            if {s, d} == {"A", "B"}:
                ab += c.encrypted
            elif kind == Kind.Loss.value:
                loss += c.encrypted
            elif kind in {x.value for x in COORD_VECTOR_KINDS}:
                up += c.encrypted
                down += c.plaintext
        return RoundCost(ab, up + down, up, down, loss)

    def amortized(self, rounds: Iterable[int]) -> dict[str, Fraction]:
        rounds = list(rounds)
        if not rounds:
            raise ValueError("empty round window")
        costs = [self.round_cost(k) for k in rounds]
        return {
            "ab": Fraction(sum(c.ab for c in costs), len(costs)),
            "parties_coord": Fraction(sum(c.parties_coord for c in costs), len(costs)),
        }

    def totals(self) -> dict:
        out = {"encrypted": 0, "plaintext": 0, "bytes": 0, "messages": 0}
        for c in self._cells.values():
            out["encrypted"] += c.encrypted
            out["plaintext"] += c.plaintext
            out["bytes"] += c.bytes
            out["messages"] += c.messages
        return out

    def to_json(self) -> dict:
        return {
            "meta": self.meta,
            "rounds": {str(k): v for k, v in sorted(self.round_info.items())},
            "cells": [[k[0], k[1], k[2], k[3], c.encrypted, c.plaintext, c.bytes, c.messages]
                      for k, c in sorted(self._cells.items())],
        }

    @classmethod
    def from_json(cls, d: dict) -> "CommLedger":
        led = cls()
        led.meta = dict(d.get("meta", {}))
        led.round_info = {int(k): dict(v) for k, v in d.get("rounds", {}).items()}
        for r, s, rc, kind, enc, pt, nb, nm in d.get("cells", []):
            led._cells[(int(r), s, rc, kind)] = ChannelCount(enc, pt, nb, nm)
        return led

    @classmethod
    def from_transcript(cls, records: list[dict]) -> "CommLedger":
        led = cls()
        for rec in records:
            msg = ProtocolMessage.from_record(rec)
            if msg.kind is Kind.Setup:
                led.meta.update(msg.meta.get("ledger_meta", {}))
                for k, info in msg.meta.get("round_info", {}).items():
                    led.note_round(int(k), **info)
            led.record(msg, len(encode_record(rec)))
        return led


@dataclass(frozen=True)
class Receipt:
    seq: int
    nbytes: int


class Network:
    """FIFO channels for every ordered pair of parties, plus the ledger."""

    def __init__(self, transcript_path=None):
        self.ledger = CommLedger()
        self._queues: dict[tuple, deque] = defaultdict(deque)
        self._closed: set = set()
        self._seq = 0
        self._transcript = open(transcript_path, "w", encoding="utf-8") if transcript_path else None

    def send(self, msg: ProtocolMessage) -> Receipt:
        chan = (msg.sender, msg.receiver)
        if chan in self._closed:
            raise ProtocolError(f"channel {msg.sender.value}->{msg.receiver.value} is closed")
        if self._transcript is not None:
            line = encode_record(msg.to_record())
            self._transcript.write(line)
            nbytes = len(line)
        else:
            nbytes = _payload_bytes(msg)
        self.ledger.record(msg, nbytes)
        self._queues[chan].append(msg)
        self._seq += 1
        return Receipt(self._seq, nbytes)

    def recv(self, sender: Party, receiver: Party, kind: Optional[Kind] = None) -> ProtocolMessage:
        q = self._queues[(Party(sender), Party(receiver))]
        if not q:
            raise ProtocolError(f"nothing pending on {Party(sender).value}->{Party(receiver).value}")
        msg = q.popleft()
        if kind is not None and msg.kind is not Kind(kind):
            raise ProtocolError(f"expected {Kind(kind).value}, got {msg.kind.value}")
        return msg

    def pending(self, sender: Party, receiver: Party) -> int:
        return len(self._queues[(Party(sender), Party(receiver))])

    def close(self, sender: Optional[Party] = None, receiver: Optional[Party] = None) -> None:
        if sender is None:
            for s in Party:
                for r in Party:
                    if s != r:
                        self._closed.add((s, r))
        else:
            self._closed.add((Party(sender), Party(receiver)))
        if self._transcript is not None and sender is None:
            self._transcript.close()
            self._transcript = None

    def write_summary(self) -> None:
        """Append a Setup record carrying ledger metadata (for offline audits)."""
        if self._transcript is None:
            return
        msg = ProtocolMessage(Kind.Setup, 0, C, A, meta={
            "ledger_meta": self.ledger.meta,
            "round_info": {str(k): v for k, v in self.ledger.round_info.items()},
        })
        self._transcript.write(encode_record(msg.to_record()))
