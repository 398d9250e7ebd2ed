"""TCP transport: each agent in its own process, Cecil as the rendezvous server."""

from __future__ import annotations

import logging
import socket
import threading
from typing import Callable

from .config import PartyConfig, SessionConfig
from .errors import ChannelClosed, ProtocolError, SessionAborted
from .protocol import (
    DEFAULT_TIMEOUT,
    PARTIES,
    Channel,
    Party,
    PartyResult,
    SessionTranscript,
    Source,
    _run_agents,
)
from .wire import PROTOCOL_VERSION, WireMessage, decode, encode

log = logging.getLogger(__name__)


class TcpChannel(Channel):
    """One newline-delimited JSON message per line over a connected socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._reader = sock.makefile("rb")
        self._send_lock = threading.Lock()
        self._closed = False

    def send(self, msg: WireMessage) -> None:
        msg.check_schema()
        data = encode(msg)
        try:
            with self._send_lock:
                self.sock.sendall(data)
        except OSError as exc:
            raise ChannelClosed(f"send failed: {exc}") from None

    def recv(self, timeout: float | None = DEFAULT_TIMEOUT) -> WireMessage:
        try:
            self.sock.settimeout(timeout)
            line = self._reader.readline()
        except (OSError, ValueError) as exc:
            raise ChannelClosed(f"receive failed: {exc}") from None
        if not line:
            raise ChannelClosed("connection closed by peer")
        if not line.endswith(b"\n"):
            raise ChannelClosed("connection closed mid-message")
        return decode(line)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._reader.close()
        self.sock.close()


def connect(host: str, port: int, timeout: float = 10.0) -> TcpChannel:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise SessionAborted(f"cannot connect to {host}:{port}: {exc}") from None
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return TcpChannel(sock)


def tcp_pair() -> tuple[Channel, Channel]:
    """A localhost TCP connection, returned as (party end, source end)."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as listener:
        listener.bind(("127.0.0.1", 0))
        listener.listen(1)
        client = socket.create_connection(listener.getsockname())
        server, _ = listener.accept()
    for s in (client, server):
        s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return TcpChannel(client), TcpChannel(server)


def serve_source(
    cfg: SessionConfig,
    host: str = "127.0.0.1",
    port: int = 0,
    timeout: float = DEFAULT_TIMEOUT,
    ready: Callable[[int], None] | None = None,
) -> SessionTranscript:
    """Run Cecil: accept Alice and Bob, then drive the session to completion.

    ``ready`` is called with the bound port once the server is listening.
    """
    source = Source(cfg, timeout)
    channels: list[TcpChannel] = []
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        listener.bind((host, port))
        listener.listen(2)
        listener.settimeout(timeout)
        if ready is not None:
            ready(listener.getsockname()[1])
        handlers: dict[str, tuple[TcpChannel, WireMessage]] = {}
        while len(handlers) < len(PARTIES):
            try:
                sock, _ = listener.accept()
            except socket.timeout:
                raise SessionAborted("parties did not connect in time") from None
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            ch = TcpChannel(sock)
            channels.append(ch)
            try:
                hello = ch.recv(timeout)
            except ProtocolError as exc:
                ch.close()
                log.warning("dropping connection: %s", exc)
                continue
            role = hello.payload.get("role")
            if hello.kind == "hello" and role in handlers:
                ch.send(WireMessage("error", {"code": "duplicate_role", "message": f"{role} already connected"}))
                ch.close()
                continue
            if hello.kind != "hello" or role not in PARTIES or hello.version != PROTOCOL_VERSION:
                # handle() answers with the matching error message, then fails
                try:
                    source.handle(ch, hello)
                except ProtocolError as exc:
                    raise SessionAborted(str(exc)) from exc
            handlers[role] = (ch, hello)

        def shutdown():
            source.abort()
            for c in channels:
                c.close()

        jobs = {f"cecil/{r}": (lambda c=c, h=h: source.handle(c, h)) for r, (c, h) in handlers.items()}
        try:
            _run_agents(jobs, shutdown)
        except SessionAborted as exc:
            exc.transcript = SessionTranscript(source.log.entries(), None, None)
            raise
        return SessionTranscript(source.log.entries(), None, source.verdict())
    finally:
        for c in channels:
            c.close()
        listener.close()


def serve_party(cfg: PartyConfig, host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> PartyResult:
    """Run Alice or Bob against a Cecil listening at ``host:port``."""
    channel = connect(host, port, timeout=min(timeout, 10.0))
    party = Party(cfg, timeout)
    try:
        return party.run(channel)
    except ProtocolError as exc:
        raise SessionAborted(str(exc), SessionTranscript(party.log.entries(), None, None)) from exc
    finally:
        channel.close()


def serve(role: str, cfg: SessionConfig, host: str = "127.0.0.1", port: int = 0, timeout: float = DEFAULT_TIMEOUT,
          ready: Callable[[int], None] | None = None):
    """Run one role of the session over TCP.

    Cecil binds and returns the full :class:`SessionTranscript`; Alice and
    Bob connect and return their :class:`PartyResult`.
    """
    if role == "cecil":
        return serve_source(cfg, host, port, timeout, ready)
    if role in PARTIES:
        return serve_party(cfg.party(role), host, port, timeout)
    raise ValueError(f"unknown role {role!r}")
