import json
import socket
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chiralcal.config import SessionConfig
from chiralcal.errors import ProtocolError, SessionAborted
from chiralcal.protocol import run_session
from chiralcal.sampling import MeasurementSchedule, RecordList, sample_run
from chiralcal.transport import connect, serve, serve_party, serve_source
from chiralcal.wire import KINDS, PROTOCOL_VERSION, DecodeError, WireMessage, decode, encode
from chiralcal.witness_maps import FrameMap

json_scalars = st.one_of(
    st.none(), st.booleans(), st.integers(-(2**53), 2**53),
    st.floats(allow_nan=False, allow_infinity=False), st.text(),
)
json_values = st.recursive(
    json_scalars,
    lambda inner: st.one_of(st.lists(inner, max_size=5), st.dictionaries(st.text(), inner, max_size=5)),
    max_leaves=20,
)
messages = st.builds(
    WireMessage,
    st.sampled_from(KINDS),
    st.dictionaries(st.text(), json_values, max_size=5),
    st.text(),
    st.integers(0, 10),
)


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestCodec:
    def test_hello_round_trips_byte_identically(self):
        data = encode(WireMessage("hello", {"role": "alice"}, "abc"))
        assert data == b'{"kind":"hello","payload":{"role":"alice"},"session_id":"abc","version":1}\n'
        assert encode(decode(data)) == data

    @given(messages)
    def test_round_trip(self, msg):
        data = encode(msg)
        assert data.endswith(b"\n") and data.count(b"\n") == 1
        assert decode(data) == msg

    def test_large_records_batch(self):
        alice, _ = sample_run(SessionConfig().state(), MeasurementSchedule(1112), FrameMap.identity(),
                              FrameMap.identity(), 3)
        assert len(alice) >= 10_000
        msg = WireMessage("records_batch", {"sender": "alice", "records": alice.to_rows(), "final": True})
        back = RecordList.from_rows(decode(encode(msg)).payload["records"])
        assert back == alice

    def test_exact_records_are_lossless(self):
        joint = np.random.default_rng(0).dirichlet(np.ones(4), size=50)
        rec = RecordList(np.arange(50), np.ones(50), np.zeros(50), joint)
        msg = WireMessage("records_batch", {"sender": "bob", "records": rec.to_rows(), "final": True})
        assert RecordList.from_rows(decode(encode(msg)).payload["records"]) == rec

    def test_malformed_line_names_offset(self):
        with pytest.raises(DecodeError) as info:
            decode(b"{\n")
        assert info.value.offset == 1
        assert "byte 1" in str(info.value)

    def test_offset_counts_bytes(self):
        with pytest.raises(DecodeError) as info:
            decode('{"kind": "héllo" x}'.encode())
        assert info.value.offset == len('{"kind": "héllo" '.encode())

    def test_invalid_utf8(self):
        with pytest.raises(DecodeError) as info:
            decode(b'{"kind":"\xff"}')
        assert info.value.offset == 9

    def test_unknown_kind(self):
        with pytest.raises(ProtocolError):
            decode(b'{"kind":"gossip","payload":{},"session_id":"","version":1}')

    def test_unknown_fields_ignored(self):
        msg = decode(b'{"kind":"bye","payload":{},"session_id":"s","version":1,"extra":[1,2]}')
        assert msg == WireMessage("bye", {}, "s")

    @pytest.mark.parametrize("line", [b"[1,2]", b'{"payload":{}}', b'{"kind":"bye","version":"one"}',
                                      b'{"kind":"bye","version":1,"payload":[]}'])
    def test_structurally_invalid(self, line):
        with pytest.raises(DecodeError):
            decode(line)

    def test_non_serializable_payload(self):
        with pytest.raises(ProtocolError):
            encode(WireMessage("verdict", {"min_eigenvalue": float("nan")}))
        with pytest.raises(ProtocolError):
            encode(WireMessage("verdict", {"min_eigenvalue": object()}))

    def test_embedded_newlines_are_escaped(self):
        data = encode(WireMessage("error", {"code": "x", "message": "two\nlines"}))
        assert data.count(b"\n") == 1

    def test_schema_check(self):
        with pytest.raises(ProtocolError):
            WireMessage("pair_count", {"pairs": 9, "state": "singlet"}).check_schema()


class TestNetworkedSession:
    def run_threads(self, cfg):
        ready = threading.Event()
        port = []
        out = {}

        def on_ready(p):
            port.append(p)
            ready.set()

        def cecil():
            out["cecil"] = serve("cecil", cfg, "127.0.0.1", 0, 30, on_ready)

        def party(role):
            ready.wait(10)
            out[role] = serve(role, cfg, "127.0.0.1", port[0], 30)

        threads = [threading.Thread(target=cecil)] + [threading.Thread(target=party, args=(r,)) for r in ("alice", "bob")]
        for t in threads:
            t.start()
        for t in threads:
            t.join(60)
        return out

    def test_matches_in_process(self):
        cfg = SessionConfig("singlet", "identity", "improper", MeasurementSchedule(120), "statistical", 8,
                            n_bootstrap=50, window=100, batch_size=250)
        out = self.run_threads(cfg)
        local = run_session(cfg)
        assert out["cecil"].digest == local.digest
        for role in ("alice", "bob"):
            assert out[role].estimate == local.estimate
            assert out[role].verdict == local.verdict
            assert out[role].digest == local.parties[role].digest

    def test_cecil_absent(self):
        with pytest.raises(SessionAborted):
            serve_party(SessionConfig().party("alice"), "127.0.0.1", free_port(), timeout=2)

    def test_unknown_role(self):
        with pytest.raises(ValueError):
            serve("dave", SessionConfig())


class TestNegotiation:
    def start_cecil(self, timeout=5):
        ready = threading.Event()
        port = []
        result = {}

        def run():
            try:
                serve_source(SessionConfig(), "127.0.0.1", 0, timeout, lambda p: (port.append(p), ready.set()))
            except Exception as exc:  # noqa: BLE001 - inspected by the test
                result["error"] = exc

        t = threading.Thread(target=run)
        t.start()
        ready.wait(5)
        return port[0], t, result

    def test_version_mismatch(self):
        port, thread, result = self.start_cecil()
        ch = connect("127.0.0.1", port)
        ch.send(WireMessage("hello", {"role": "alice"}, version=PROTOCOL_VERSION + 1))
        reply = ch.recv(5)
        assert reply.kind == "error"
        assert reply.payload["code"] == "version_mismatch"
        with pytest.raises(ProtocolError):
            ch.recv(5)
        ch.close()
        thread.join(10)
        assert isinstance(result["error"], SessionAborted)

    def test_bad_hello(self):
        port, thread, result = self.start_cecil()
        ch = connect("127.0.0.1", port)
        ch.send(WireMessage("bye"))
        assert ch.recv(5).payload["code"] == "bad_hello"
        ch.close()
        thread.join(10)
        assert isinstance(result["error"], SessionAborted)

    def test_duplicate_role_is_refused(self):
        port, thread, result = self.start_cecil(timeout=2)
        first = connect("127.0.0.1", port)
        first.send(WireMessage("hello", {"role": "alice"}))
        second = connect("127.0.0.1", port)
        second.send(WireMessage("hello", {"role": "alice"}))
        reply = second.recv(5)
        assert reply.kind == "error" and reply.payload["code"] == "duplicate_role"
        first.close()
        second.close()
        thread.join(10)
        assert isinstance(result["error"], SessionAborted)

    def test_garbage_line_is_dropped(self):
        port, thread, result = self.start_cecil(timeout=2)
        with socket.create_connection(("127.0.0.1", port)) as s:
            s.sendall(b"{\n")
        thread.join(10)
        # the listener survives the garbage and then times out waiting for parties
        assert "connect in time" in str(result["error"])

    def test_wire_is_plain_json_lines(self):
        port, thread, _ = self.start_cecil(timeout=2)
        with socket.create_connection(("127.0.0.1", port)) as a, socket.create_connection(("127.0.0.1", port)) as b:
            a.sendall(encode(WireMessage("hello", {"role": "alice"})))
            b.sendall(encode(WireMessage("hello", {"role": "bob"})))
            reader = b.makefile("rb")
            first = json.loads(reader.readline())
            second = json.loads(reader.readline())
        assert first["kind"] == "hello" and second == {
            "kind": "pair_count", "payload": {"pairs": 9000}, "session_id": first["session_id"], "version": 1,
        }
        thread.join(10)
