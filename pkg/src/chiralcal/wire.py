"""Newline-delimited canonical JSON messages exchanged between agents."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

from .errors import ProtocolError

PROTOCOL_VERSION = 1

KINDS = ("hello", "pair_count", "axis_request", "outcome", "records_batch", "verdict", "bye", "error")

# Every payload key an agent may send. Nothing in here can carry the
# prepared state or the frame maps, so parties only ever learn records.
PAYLOAD_FIELDS: dict[str, frozenset[str]] = {
    "hello": frozenset({"role"}),
    "pair_count": frozenset({"pairs"}),
    "axis_request": frozenset({"pairs"}),
    "outcome": frozenset({"pairs"}),
    "records_batch": frozenset({"sender", "records", "final"}),
    "verdict": frozenset({"sender", "decision", "min_eigenvalue", "min_eigenvalue_std", "z_score", "mode"}),
    "bye": frozenset(),
    "error": frozenset({"code", "message"}),
}


class DecodeError(ProtocolError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class WireMessage:
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)
    session_id: str = ""
    version: int = PROTOCOL_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProtocolError(f"unknown message kind {self.kind!r}")

    @cached_property
    def digest(self) -> str:
        return payload_digest(self.payload)

    def check_schema(self) -> None:
        """Raise if the payload has keys outside this kind's schema."""
        extra = set(self.payload) - PAYLOAD_FIELDS[self.kind]
        if extra:
            raise ProtocolError(f"{self.kind} payload has unexpected fields {sorted(extra)}")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def payload_digest(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def encode(msg: WireMessage) -> bytes:
    try:
        text = canonical_json(
            {"version": msg.version, "session_id": msg.session_id, "kind": msg.kind, "payload": msg.payload}
        )
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"payload is not serializable: {exc}") from None
    # compact JSON escapes control characters, so no raw newline can appear
    return text.encode("utf-8") + b"\n"


def decode(line: bytes | str) -> WireMessage:
    if isinstance(line, bytes):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"invalid UTF-8 at byte {exc.start}", exc.start) from None
    else:
        text = line
    if text.endswith("\n"):
        text = text[:-1]
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise DecodeError(f"malformed message at byte {offset}: {exc.msg}", offset) from None
    if not isinstance(obj, dict):
        raise DecodeError("message is not a JSON object", 0)
    try:
        kind = obj["kind"]
        version = int(obj["version"])
    except (KeyError, TypeError, ValueError):
        raise DecodeError("message lacks a kind or integer version", 0) from None
    payload = obj.get("payload", {})
    if not isinstance(payload, dict):
        raise DecodeError("payload is not a JSON object", 0)
    # unknown top-level fields are ignored
    return WireMessage(kind, payload, str(obj.get("session_id", "")), version)
