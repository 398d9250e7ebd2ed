"""Agents and the calibration session.

Cecil (the source) is the only agent that knows the prepared state and the
frame errors; it answers axis requests with outcomes. Alice and Bob choose
their axes locally, exchange records through Cecil, reconstruct the state
and each produce a verdict. The two verdicts must agree.

Message order on each party's link::

    party -> cecil   hello
    cecil -> party   hello, pair_count
    party -> cecil   axis_request (one window of pairs)   } repeated until
    cecil -> party   outcome (same window)                } all pairs done
    party -> cecil   records_batch ... (final=true)
    cecil -> party   records_batch ... of the other party (final=true)
    party -> cecil   verdict
    cecil -> party   verdict of the other party
    party -> cecil   bye
    cecil -> party   bye

Cecil relays records and verdicts only after both parties have finished
the corresponding phase, which keeps the content of every directional
stream independent of thread or network timing.
"""

from __future__ import annotations

import hashlib
import logging
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .config import PartyConfig, SessionConfig
from .errors import ChannelClosed, InvalidParameterError, ProtocolError, SessionAborted
from .sampling import (
    OUTCOME_SIGNS,
    MeasurementSchedule,
    RecordList,
    choose_axes,
    draw_outcomes,
    probability_table,
)
from .tomography import CalibrationVerdict, Estimate, estimate, verdict
from .wire import PROTOCOL_VERSION, WireMessage, canonical_json
from .witness_maps import apply_frame_maps

log = logging.getLogger(__name__)

PARTIES = ("alice", "bob")
DEFAULT_TIMEOUT = 60.0
MAX_WINDOWS_IN_FLIGHT = 4


def _other(role: str) -> str:
    return "bob" if role == "alice" else "alice"


# ---------------------------------------------------------------------------
# channels


class Channel:
    """Ordered, reliable, message-oriented, bidirectional endpoint."""

    def send(self, msg: WireMessage) -> None:
        raise NotImplementedError

    def recv(self, timeout: float | None = DEFAULT_TIMEOUT) -> WireMessage:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


_CLOSED = object()


class QueueChannel(Channel):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send(self, msg: WireMessage) -> None:
        if self._closed:
            raise ChannelClosed("send on closed channel")
        msg.check_schema()
        self._outbox.put(msg)

    def recv(self, timeout: float | None = DEFAULT_TIMEOUT) -> WireMessage:
        if self._closed:
            raise ChannelClosed("recv on closed channel")
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise ChannelClosed(f"no message within {timeout} s") from None
        if item is _CLOSED:
            self._closed = True
            raise ChannelClosed("peer closed the channel")
        return item

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSED)


def in_process_pair() -> tuple[Channel, Channel]:
    """Two connected in-memory endpoints: (party end, source end)."""
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return QueueChannel(b_to_a, a_to_b), QueueChannel(a_to_b, b_to_a)


# ---------------------------------------------------------------------------
# transcript


class TranscriptLog:
    """Per-stream message logs; a stream is one direction of one link."""

    def __init__(self):
        self._streams: dict[str, list[dict]] = {}
        self._lock = threading.Lock()

    def add(self, sender: str, receiver: str, msg: WireMessage) -> None:
        stream = f"{sender}->{receiver}"
        with self._lock:
            entries = self._streams.setdefault(stream, [])
            entries.append(
                {
                    "stream": stream,
                    "seq": len(entries),
                    "role": sender,
                    "kind": msg.kind,
                    "digest": msg.digest,
                }
            )

    def entries(self) -> list[dict]:
        with self._lock:
            return [e for s in sorted(self._streams) for e in self._streams[s]]


def transcript_digest(entries: list[dict]) -> str:
    rows = sorted(
        ([e["stream"], e["seq"], e["kind"], e["digest"]] for e in entries),
        key=lambda r: (r[0], r[1]),
    )
    return hashlib.sha256(canonical_json(rows).encode("utf-8")).hexdigest()


@dataclass
class PartyResult:
    role: str
    records: RecordList
    peer_records: RecordList
    estimate: Estimate
    verdict: CalibrationVerdict
    peer_verdict: CalibrationVerdict
    entries: list[dict]

    @property
    def digest(self) -> str:
        return transcript_digest(self.entries)


@dataclass
class SessionTranscript:
    entries: list[dict]
    estimate: Estimate | None
    verdict: CalibrationVerdict | None
    parties: dict[str, PartyResult] = field(default_factory=dict)
    messages: list[tuple[str, WireMessage]] = field(default_factory=list, repr=False)

    @property
    def digest(self) -> str:
        return transcript_digest(self.entries)

    def to_jsonl(self) -> str:
        return "".join(canonical_json(e) + "\n" for e in self.entries)


# ---------------------------------------------------------------------------
# agents


class _Endpoint:
    """A channel bound to one agent, logging everything it sends or receives."""

    def __init__(self, me: str, peer: str, channel: Channel, log_: TranscriptLog, timeout: float,
                 sink: list | None = None):
        self.me = me
        self.peer = peer
        self.channel = channel
        self.log = log_
        self.timeout = timeout
        self.session_id = ""
        self._sink = sink

    def send(self, kind: str, payload: dict | None = None) -> None:
        self.forward(WireMessage(kind, payload or {}, self.session_id))

    def forward(self, msg: WireMessage) -> None:
        msg.check_schema()
        self.channel.send(msg)
        self.log.add(self.me, self.peer, msg)
        if self._sink is not None:
            self._sink.append((f"{self.me}->{self.peer}", msg))

    def recv(self, *kinds: str) -> WireMessage:
        msg = self.channel.recv(self.timeout)
        self.log.add(self.peer, self.me, msg)
        if self._sink is not None:
            self._sink.append((f"{self.peer}->{self.me}", msg))
        if msg.kind == "error" and "error" not in kinds:
            p = msg.payload
            raise ProtocolError(f"{self.peer} reported {p.get('code', 'error')}: {p.get('message', '')}")
        if kinds and msg.kind not in kinds:
            raise ProtocolError(f"expected {'/'.join(kinds)} from {self.peer}, got {msg.kind}")
        return msg


class Party:
    """Alice or Bob. Knows only its own schedule policy and decision settings."""

    def __init__(self, cfg: PartyConfig, timeout: float = DEFAULT_TIMEOUT):
        if cfg.role not in PARTIES:
            raise InvalidParameterError(f"unknown party role {cfg.role!r}")
        self.cfg = cfg
        self.timeout = timeout
        self.log = TranscriptLog()
        self.messages: list[tuple[str, WireMessage]] = []

    def run(self, channel: Channel) -> PartyResult:
        cfg = self.cfg
        ep = _Endpoint(cfg.role, "cecil", channel, self.log, self.timeout, self.messages)
        ep.send("hello", {"role": cfg.role})
        hello = ep.recv("hello")
        if hello.version != PROTOCOL_VERSION:
            raise ProtocolError(f"source speaks protocol version {hello.version}")
        ep.session_id = hello.session_id
        n_pairs = int(ep.recv("pair_count").payload["pairs"])
        if n_pairs % 9:
            raise ProtocolError(f"pair count {n_pairs} is not a multiple of 9")

        schedule = MeasurementSchedule(n_pairs // 9, cfg.axis_policy)
        pair_ids = np.arange(n_pairs, dtype=np.int64)
        axes = choose_axes(schedule, cfg.role, cfg.seed, pair_ids)
        outcomes = np.zeros(n_pairs, dtype=np.int8)
        joint = None
        windows = [(s, min(s + cfg.window, n_pairs)) for s in range(0, n_pairs, cfg.window)]
        in_flight: list[tuple[int, int]] = []
        for i, (start, stop) in enumerate(windows):
            ep.send("axis_request", {"pairs": [[int(k), int(axes[k])] for k in range(start, stop)]})
            in_flight.append((start, stop))
            # bounded pipelining keeps socket buffers from filling in both directions
            while in_flight and (len(in_flight) >= MAX_WINDOWS_IN_FLIGHT or i == len(windows) - 1):
                lo, hi = in_flight.pop(0)
                reply = ep.recv("outcome").payload["pairs"]
                if [r[0] for r in reply] != list(range(lo, hi)):
                    raise ProtocolError("outcome window does not match the request")
                if reply and isinstance(reply[0][1], list):
                    if joint is None:
                        joint = np.zeros((n_pairs, 4))
                    joint[lo:hi] = [r[1] for r in reply]
                else:
                    outcomes[lo:hi] = [r[1] for r in reply]
        mine = RecordList(pair_ids, axes, outcomes, joint)

        rows = mine.to_rows()
        for start in range(0, max(len(rows), 1), cfg.batch_size):
            chunk = rows[start : start + cfg.batch_size]
            ep.send("records_batch", {
                "sender": cfg.role,
                "records": chunk,
                "final": start + cfg.batch_size >= len(rows),
            })
        peer_rows: list = []
        while True:
            batch = ep.recv("records_batch").payload
            peer_rows.extend(batch["records"])
            if batch["final"]:
                break
        theirs = RecordList.from_rows(peer_rows)

        alice, bob = (mine, theirs) if cfg.role == "alice" else (theirs, mine)
        est = estimate(alice, bob)
        ver = verdict(est, cfg.mode, cfg.z_threshold, cfg.n_bootstrap, cfg.seed)
        ep.send("verdict", {"sender": cfg.role, **ver.to_dict()})
        peer_ver = CalibrationVerdict.from_dict(ep.recv("verdict").payload)
        if peer_ver.to_dict() != ver.to_dict():
            raise ProtocolError(f"verdicts disagree: {ver} vs {peer_ver}")
        ep.send("bye")
        ep.recv("bye")
        return PartyResult(cfg.role, mine, theirs, est, ver, peer_ver, self.log.entries())


class Source:
    """Cecil: prepares pairs and produces joint outcomes for both parties' axes."""

    def __init__(self, cfg: SessionConfig, timeout: float = DEFAULT_TIMEOUT):
        self.cfg = cfg
        self.timeout = timeout
        self.log = TranscriptLog()
        self.messages: list[tuple[str, WireMessage]] = []
        f_alice, f_bob = cfg.frames()
        self._table = probability_table(apply_frame_maps(cfg.state(), f_alice, f_bob))
        self._n_pairs = cfg.schedule.total_pairs
        self._axes = {r: np.zeros(self._n_pairs, dtype=np.int8) for r in PARTIES}
        self._records: dict[str, list[WireMessage]] = {r: [] for r in PARTIES}
        self._records_done = {r: False for r in PARTIES}
        self._verdicts: dict[str, WireMessage] = {}
        self._cond = threading.Condition()
        self._abort = threading.Event()
        self.session_id = cfg.session_id()

    def abort(self) -> None:
        self._abort.set()
        with self._cond:
            self._cond.notify_all()

    def _wait_for(self, predicate, what: str) -> None:
        deadline = time.monotonic() + self.timeout
        with self._cond:
            while not predicate():
                if self._abort.is_set():
                    raise ChannelClosed(f"session aborted while waiting for {what}")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise ChannelClosed(f"timed out waiting for {what}")
                self._cond.wait(min(remaining, 0.5))

    def outcomes_for(self, role: str, pair_ids: np.ndarray) -> list:
        ax_a = self._axes["alice"][pair_ids]
        ax_b = self._axes["bob"][pair_ids]
        if self.cfg.mode == "exact":
            probs = self._table[ax_a - 1, ax_b - 1]
            return [[int(p), [float(x) for x in row]] for p, row in zip(pair_ids, probs)]
        idx = draw_outcomes(self._table, self.cfg.seed, pair_ids, ax_a, ax_b)
        col = 0 if role == "alice" else 1
        signs = OUTCOME_SIGNS[idx, col]
        return [[int(p), int(s)] for p, s in zip(pair_ids, signs)]

    def handle(self, channel: Channel, hello: WireMessage | None = None) -> str:
        """Serve one party over ``channel``; returns the party's role."""
        ep = _Endpoint("cecil", "?", channel, self.log, self.timeout, self.messages)
        first = hello if hello is not None else channel.recv(self.timeout)
        role = first.payload.get("role") if first.kind == "hello" else None
        if role not in PARTIES:
            ep.peer = "unknown"
            ep.send("error", {"code": "bad_hello", "message": f"expected hello from alice or bob, got {first.kind}"})
            channel.close()
            raise ProtocolError("party did not introduce itself")
        ep.peer = role
        self.log.add(role, "cecil", first)
        self.messages.append((f"{role}->cecil", first))
        ep.session_id = self.session_id
        if first.version != PROTOCOL_VERSION:
            ep.send("error", {
                "code": "version_mismatch",
                "message": f"source speaks version {PROTOCOL_VERSION}, {role} sent {first.version}",
            })
            channel.close()
            raise ProtocolError(f"{role} uses protocol version {first.version}")
        ep.send("hello", {"role": "cecil"})
        ep.send("pair_count", {"pairs": self._n_pairs})

        other = _other(role)
        served = 0
        while served < self._n_pairs:
            pairs = ep.recv("axis_request").payload["pairs"]
            if not pairs:
                raise ProtocolError("empty axis request")
            req = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            pids, axes = req[:, 0], req[:, 1]
            if pids.min() < 0 or pids.max() >= self._n_pairs or np.any((axes < 1) | (axes > 3)):
                raise ProtocolError("axis request out of range")
            with self._cond:
                if np.any(self._axes[role][pids] != 0):
                    raise ProtocolError(f"{role} requested a pair twice")
                self._axes[role][pids] = axes
                self._cond.notify_all()
            self._wait_for(lambda: np.all(self._axes[other][pids] != 0), f"{other}'s axes")
            ep.send("outcome", {"pairs": self.outcomes_for(role, pids)})
            served += len(pids)

        while True:
            batch = ep.recv("records_batch")
            final = bool(batch.payload.get("final"))
            with self._cond:
                self._records[role].append(batch)
                if final:
                    self._records_done[role] = True
                    self._cond.notify_all()
            if final:
                break
        self._wait_for(lambda: self._records_done[other], f"{other}'s records")
        for batch in self._records[other]:
            ep.forward(batch)

        mine = ep.recv("verdict")
        with self._cond:
            self._verdicts[role] = mine
            self._cond.notify_all()
        self._wait_for(lambda: other in self._verdicts, f"{other}'s verdict")
        ep.forward(self._verdicts[other])
        ep.recv("bye")
        ep.send("bye")
        return role

    def verdict(self) -> CalibrationVerdict | None:
        v = self._verdicts.get("alice")
        return CalibrationVerdict.from_dict(v.payload) if v else None


# ---------------------------------------------------------------------------
# sessions


def _run_agents(jobs: dict, on_failure) -> dict:
    """Run callables in threads; on the first failure call ``on_failure``."""
    results: dict = {}
    errors: list[tuple[str, BaseException]] = []
    lock = threading.Lock()

    def wrap(name, fn):
        try:
            value = fn()
            with lock:
                results[name] = value
        except BaseException as exc:  # noqa: BLE001 - reported below
            with lock:
                errors.append((name, exc))
            on_failure()

    threads = [threading.Thread(target=wrap, args=(n, f), name=n, daemon=True) for n, f in jobs.items()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        # the first failure is the cause; later ones are usually knock-on closures
        name, exc = min(errors, key=lambda e: isinstance(e[1], ChannelClosed))
        raise SessionAborted(f"{name} failed: {exc}") from exc
    return results


def run_session(cfg: SessionConfig, link_factory=in_process_pair, timeout: float = DEFAULT_TIMEOUT) -> SessionTranscript:
    """Run Cecil, Alice and Bob concurrently over ``link_factory`` links."""
    links = {role: link_factory() for role in PARTIES}
    source = Source(cfg, timeout)
    parties = {role: Party(cfg.party(role), timeout) for role in PARTIES}

    def shutdown():
        source.abort()
        for party_end, source_end in links.values():
            for ch in (party_end, source_end):
                try:
                    ch.close()
                except Exception:  # noqa: BLE001 - best effort during teardown
                    pass

    jobs = {}
    for role in PARTIES:
        jobs[f"cecil/{role}"] = lambda ch=links[role][1]: source.handle(ch)
        jobs[role] = lambda p=parties[role], ch=links[role][0]: p.run(ch)
    try:
        results = _run_agents(jobs, shutdown)
    except SessionAborted as exc:
        exc.transcript = SessionTranscript(source.log.entries(), None, None, messages=list(source.messages))
        raise
    finally:
        shutdown()

    alice, bob = results["alice"], results["bob"]
    if alice.verdict != bob.verdict or alice.estimate != bob.estimate:
        raise ProtocolError("internal error: parties reconstructed different results")
    return SessionTranscript(
        source.log.entries(),
        alice.estimate,
        alice.verdict,
        {"alice": alice, "bob": bob},
        list(source.messages),
    )


def run_time_arrow_session(cfg: SessionConfig, link_factory=in_process_pair,
                           timeout: float = DEFAULT_TIMEOUT) -> SessionTranscript:
    """Session in which the only possible mismatch is a flipped time arrow."""
    for f in cfg.frames():
        if not f.is_proper:
            raise InvalidParameterError("time-arrow sessions take proper rotations only")
    return run_session(cfg, link_factory, timeout)
