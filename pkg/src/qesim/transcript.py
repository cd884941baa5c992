"""Append-only message log and the in-process duplex channel that feeds it."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterator


@dataclass(frozen=True)
class Record:
    index: int
    party: str
    kind: str
    payload: Any
    direction: str | None = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {"index": self.index, "t": self.index, "party": self.party, "kind": self.kind}
        if self.direction is not None:
            out["direction"] = self.direction
        if isinstance(self.payload, (bytes, bytearray)):
            out["payload_hex"] = bytes(self.payload).hex()
        else:
            out["quantities"] = self.payload
        return out


class Transcript:
    """Ordered log of protocol messages.  Timestamps are message counters."""

    def __init__(self) -> None:
        self._records: list[Record] = []

    def append(self, party: str, kind: str, payload: Any, direction: str | None = None) -> Record:
        rec = Record(len(self._records), party, kind, payload, direction)
        self._records.append(rec)
        return rec

    def __iter__(self) -> Iterator[Record]:
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, i: int) -> Record:
        return self._records[i]

    def of_kind(self, kind: str) -> list[Record]:
        return [r for r in self._records if r.kind == kind]

    def lines(self) -> list[str]:
        return [json.dumps(r.to_json(), sort_keys=True, separators=(",", ":")) for r in self._records]

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


Tap = Callable[[str, str, Any], Any]


class Channel:
    """Ordered, reliable duplex link between two endpoints.

    Every delivered message is logged once, after the optional ``tap`` (an
    adversary sitting on the wire) has had the chance to rewrite it.  A tap
    returning ``None`` drops the message.
    """

    def __init__(self, a: str, b: str, transcript: Transcript | None = None, tap: Tap | None = None):
        self.ends = (a, b)
        self.transcript = transcript if transcript is not None else Transcript()
        self.tap = tap
        self._queues: dict[str, deque] = {a: deque(), b: deque()}

    def _peer(self, party: str) -> str:
        a, b = self.ends
        if party == a:
            return b
        if party == b:
            return a
        raise ValueError(f"{party!r} is not an endpoint of this channel")

    def send(self, sender: str, kind: str, payload: Any) -> None:
        receiver = self._peer(sender)
        if self.tap is not None:
            payload = self.tap(sender, kind, payload)
            if payload is None:
                return
        self.transcript.append(sender, kind, payload, f"{sender}->{receiver}")
        self._queues[receiver].append((kind, payload))

    def recv(self, receiver: str, expect: str | None = None) -> tuple[str, Any]:
        self._peer(receiver)
        queue = self._queues[receiver]
        if not queue:
            raise ProtocolOrderError(f"{receiver} expected a message but none is pending")
        kind, payload = queue.popleft()
        if expect is not None and kind != expect:
            raise ProtocolOrderError(f"{receiver} expected {expect!r}, got {kind!r}")
        return kind, payload

    def pending(self, receiver: str) -> int:
        return len(self._queues[receiver])


class ProtocolOrderError(RuntimeError):
    """A party received a message out of protocol order."""
