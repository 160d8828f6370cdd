import base64
import hashlib
import json
import os
import socket
import struct
import time

import pytest

from echosim.assets import load_manifest, synthetic_library
from echosim.gifcodec import decode_gif
from echosim.service import PortInUse, SessionService, _Client
from echosim.telemetry import format_line, ProbeSample

from conftest import hall_for, script_lines

HOST = "127.0.0.1"


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("svc-assets")
    synthetic_library(out, nt=4, n=16, size_px=24)
    return load_manifest(out / "manifest.json")


class LineClient:
    """Raw TCP peer speaking newline-delimited JSON."""

    def __init__(self, port):
        self.sock = socket.create_connection((HOST, port), timeout=10)
        self.reader = self.sock.makefile("rb")

    def send(self, doc):
        self.sock.sendall(json.dumps(doc).encode() + b"\n")

    def recv(self):
        line = self.reader.readline()
        if not line:
            raise ConnectionError("server closed the stream")
        return json.loads(line)

    def recv_type(self, wanted, deadline_s=10.0):
        end = time.monotonic() + deadline_s
        while time.monotonic() < end:
            msg = self.recv()
            if msg["type"] == wanted:
                return msg
        raise TimeoutError(f"no {wanted!r} message")

    def recv_until(self, pred, deadline_s=10.0):
        end = time.monotonic() + deadline_s
        collected = []
        while time.monotonic() < end:
            msg = self.recv()
            collected.append(msg)
            if pred(msg):
                return msg, collected
        raise TimeoutError("predicate never satisfied")

    def probe(self, yaw=0.0, pitch=0.0, contact=None):
        contacts = [False] * 5
        if contact is not None:
            contacts[contact] = True
        self.send({"type": "virtual_probe", "yaw": yaw, "pitch": pitch,
                   "roll": 0.0, "contacts": contacts})

    def close(self):
        self.sock.close()


def http_get(port, path, method="GET"):
    sock = socket.create_connection((HOST, port), timeout=10)
    sock.sendall(f"{method} {path} HTTP/1.1\r\nHost: x\r\n\r\n".encode())
    data = b""
    while True:
        chunk = sock.recv(65536)
        if not chunk:
            break
        data += chunk
    sock.close()
    head, _, body = data.partition(b"\r\n\r\n")
    status = int(head.split(b" ")[1])
    return status, body


def test_snapshot_comes_first(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        c = LineClient(svc.port)
        snap = c.recv()
        assert snap["type"] == "state"
        assert snap["stage"] == 0 and snap["stage_max"] == 0
        assert snap["completed"] is False
        assert snap["target"] == {"view": "Apical", "variant": "Tilt"}
        assert isinstance(snap["seq"], int)
        c.close()


def test_probe_drives_completion_with_contiguous_seq(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, dwell_ms=100.0) as svc:
        c = LineClient(svc.port)
        c.probe(yaw=90.0, pitch=7.0, contact=0)
        done, seen = c.recv_until(
            lambda m: m["type"] == "state" and m["completed"])
        states = [m for m in seen if m["type"] == "state"]
        seqs = [m["seq"] for m in states]
        assert seqs == list(range(seqs[0], seqs[0] + len(seqs)))
        bars = [m["stage_max"] for m in states]
        assert bars == sorted(bars)  # the ratchet never slips
        assert done["stage_max"] == 3
        events = [m["feedback_event"]["code"] for m in states
                  if m.get("feedback_event")]
        assert events == ["LOCATION_OK", "NOTCH_OK", "VIEW_ACQUIRED"]
        c.close()


def test_live_stage_drops_while_bar_holds(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, dwell_ms=100.0) as svc:
        c = LineClient(svc.port)
        c.probe(yaw=90.0, pitch=7.0, contact=0)
        c.recv_until(lambda m: m["type"] == "state" and m["completed"])
        c.probe()  # hands off
        msg, _ = c.recv_until(
            lambda m: m["type"] == "state" and m["stage"] == 0)
        assert msg["stage_max"] == 3
        assert msg["completed"] is True
        c.close()


def test_select_target_and_reset(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        c = LineClient(svc.port)
        c.recv_type("state")
        c.send({"type": "select_target", "view": "PLAX", "variant": "Normal"})
        msg = c.recv_type("state")
        assert msg["target"] == {"view": "PLAX", "variant": "Normal"}
        assert msg["stage_max"] == 0 and not msg["completed"]

        c.probe(yaw=-30.0, pitch=0.0, contact=1)  # PLAX window, flat
        c.recv_until(lambda m: m["type"] == "state" and m["stage_max"] == 3,
                     deadline_s=10.0)
        c.probe()  # let go so the reset is not immediately re-earned
        c.recv_until(lambda m: m["type"] == "state" and m["stage"] == 0)
        c.send({"type": "reset_attempt"})
        msg = c.recv_until(lambda m: m["type"] == "state"
                           and m["stage_max"] == 0 and not m["completed"])[0]
        assert msg["target"] == {"view": "PLAX", "variant": "Normal"}
        c.close()


def test_wrong_target_select_is_rejected(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        c = LineClient(svc.port)
        c.recv_type("state")
        c.send({"type": "select_target", "view": "Sternal", "variant": "Tilt"})
        err = c.recv_type("error")
        assert err["code"] == "BadRequest"
        c.close()


def test_malformed_and_unknown_messages(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        c = LineClient(svc.port)
        c.recv_type("state")
        c.sock.sendall(b"this is not json\n")
        assert c.recv_type("error")["code"] == "BadRequest"
        c.send({"type": "warp_drive"})
        err = c.recv_type("error")
        assert err["code"] == "BadRequest" and "warp_drive" in err["detail"]
        c.send({"type": "virtual_probe", "yaw": 0, "pitch": 0, "roll": 0,
                "contacts": [1, 0, 0, 0, 0]})  # ints, not booleans
        assert c.recv_type("error")["code"] == "BadRequest"
        c.close()


def test_virtual_probe_refused_on_replay_source(manifest, tmp_path):
    script = tmp_path / "r.txt"
    script.write_text("".join(script_lines([(5000.0, 0.0, 0.0, None)])))
    with SessionService(manifest, source=f"replay:{script}", port=0) as svc:
        c = LineClient(svc.port)
        c.recv_type("state")
        c.probe(yaw=1.0)
        err = c.recv_type("error")
        assert err["code"] == "SourceConflict"
        assert "replay" in err["detail"]
        c.close()


def test_replay_source_drives_the_session(manifest, tmp_path):
    script = tmp_path / "run.txt"
    script.write_text("".join(script_lines([
        (300.0, 90.0, 0.0, None),
        (200.0, 90.0, 0.0, 0),
        (600.0, 90.0, 7.0, 0),
    ])))
    with SessionService(manifest, source=f"replay:{script}", port=0,
                        dwell_ms=200.0) as svc:
        c = LineClient(svc.port)
        done, seen = c.recv_until(
            lambda m: m["type"] == "state" and m["completed"], deadline_s=15.0)
        bars = [m["stage_max"] for m in seen if m["type"] == "state"]
        assert bars == sorted(bars)
        assert done["stage_max"] == 3
        c.close()


def test_port_in_use(manifest):
    blocker = socket.socket()
    blocker.bind((HOST, 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        with pytest.raises(PortInUse) as exc:
            SessionService(manifest, port=port).start()
        assert str(port) in str(exc.value)
    finally:
        blocker.close()


def test_quiz_answers(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        c = LineClient(svc.port)
        c.recv_type("state")
        c.send({"type": "quiz_answer", "item_id": "plax-notch", "choice": 0})
        first = c.recv_type("quiz_result")
        assert first["item_id"] == "plax-notch"
        assert isinstance(first["correct"], bool)
        assert first["explanation"]
        c.send({"type": "quiz_answer", "item_id": "no-such-item", "choice": 0})
        assert c.recv_type("error")["code"] == "BadRequest"
        c.send({"type": "quiz_answer", "item_id": "plax-notch", "choice": 99})
        assert c.recv_type("error")["code"] == "BadRequest"
        c.close()


def test_calibration_applies_and_shifts_the_frame(manifest):
    # window 0.1 s at 50 Hz: five samples to collect
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, cal_window_s=0.1,
                        dwell_ms=100.0) as svc:
        c = LineClient(svc.port)
        c.recv_type("state")
        c.send({"type": "start_calibration"})
        msg = c.recv_type("calibration")
        assert msg["phase"] == "collecting"
        assert msg["seconds_remaining"] == pytest.approx(0.1)
        for _ in range(5):
            c.probe(yaw=30.0)
        msg = c.recv_type("calibration")
        assert msg["phase"] == "applied"
        # yaw now reads relative to the calibrated zero: 120 lands on the
        # 3 o'clock notch
        c.probe(yaw=120.0, pitch=7.0, contact=0)
        done, _ = c.recv_until(lambda m: m["type"] == "state" and m["completed"])
        assert done["stage_max"] == 3
        c.close()


def test_calibration_rejects_motion(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, cal_window_s=0.1) as svc:
        c = LineClient(svc.port)
        c.recv_type("state")
        c.send({"type": "start_calibration"})
        c.recv_type("calibration")
        for i in range(5):
            c.probe(yaw=i * 10.0)
        msg = c.recv_type("calibration")
        assert msg["phase"] == "failed"
        assert "moved" in msg["detail"]
        c.close()


def test_heartbeat(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, heartbeat_s=0.05) as svc:
        c = LineClient(svc.port)
        beat = c.recv_type("heartbeat")
        assert beat["t_ms"] >= 0
        c.close()


def test_preloaded_playback_emits_frame_refs(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, dwell_ms=100.0) as svc:
        c = LineClient(svc.port)
        c.probe(yaw=90.0, pitch=7.0, contact=0)
        refs = []
        end = time.monotonic() + 10.0
        while len(refs) < 6 and time.monotonic() < end:
            msg = c.recv()
            if msg["type"] == "frame_ref":
                refs.append(msg)
        assert len(refs) >= 6
        assert {r["asset_key"] for r in refs} == {"Apical/TiltView"}
        indices = [r["frame_index"] for r in refs]
        assert all(0 <= i < 4 for i in indices)
        assert len(set(indices)) > 1  # the loop advances
        assert all(a != b for a, b in zip(indices, indices[1:]))  # deduplicated
        c.close()


def test_frame_refs_stop_when_visualization_gates_shut(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        c = LineClient(svc.port)
        c.probe(yaw=90.0, pitch=7.0, contact=0)
        c.recv_until(lambda m: m["type"] == "frame_ref")
        c.probe(yaw=90.0, pitch=7.0)  # lifted off: no location
        c.recv_until(lambda m: m["type"] == "state" and m["stage"] == 0)
        time.sleep(0.15)
        # drain anything queued before the gate closed, then expect quiet
        tail = []
        c.sock.settimeout(0.3)
        try:
            while True:
                tail.append(c.recv())
        except (TimeoutError, socket.timeout, ConnectionError):
            pass
        kinds = {m["type"] for m in tail[-3:]}
        assert "frame_ref" not in kinds
        c.close()


def test_realtime_mode_sends_pixels(manifest, rng):
    from echosim.assets import synthetic_sequence
    vol = synthetic_sequence(nt=3, n=16)
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, mode="realtime", volume=vol) as svc:
        c = LineClient(svc.port)
        c.probe(yaw=90.0, pitch=7.0, contact=0)
        msg = c.recv_type("slice_frame")
        pixels = base64.b64decode(msg["pixels"])
        assert len(pixels) == msg["width"] * msg["height"]
        assert msg["width"] == manifest.planes[list(manifest.planes)[0]].width_px
        c.close()


def test_http_manifest_routes(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        status, body = http_get(svc.port, "/manifest.json")
        assert status == 200
        doc = json.loads(body)
        assert doc["stage_max"] == 3
        assert len(doc["entries"]) == 10
        entry = doc["entries"]["Apical/TiltView"]
        assert entry["gif"] == "/assets/Apical/TiltView.gif"
        assert entry["frame_period_ms"] > 0
        assert {t["view"] for t in doc["targets"]} == \
            {"Apical", "PLAX", "PSAX", "Subcostal", "Suprasternal"}
        assert doc["sensors"]["Apical"] == 0

        status, body = http_get(svc.port, "/quiz.json")
        assert status == 200
        quiz = json.loads(body)
        assert all("answer_index" not in i and "explanation" not in i
                   for i in quiz["items"])


def test_http_serves_decodable_gifs(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        status, body = http_get(svc.port, "/assets/Apical/TiltView.gif")
        assert status == 200
        anim = decode_gif(body)
        assert anim.nt == 4


def test_http_rejects_bad_paths(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        assert http_get(svc.port, "/assets/Apical/Nope.gif")[0] == 404
        assert http_get(svc.port, "/assets/../manifest.json")[0] == 404
        assert http_get(svc.port, "/../../etc/passwd")[0] == 404
        assert http_get(svc.port, "/no-such-page")[0] == 404
        assert http_get(svc.port, "/manifest.json", method="POST")[0] == 405


def test_static_files_served_from_web_root(manifest, tmp_path):
    (tmp_path / "index.html").write_text("<h1>probe trainer</h1>")
    (tmp_path / "secret").mkdir()
    (tmp_path / "secret" / "x.txt").write_text("x")
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, web_root=tmp_path) as svc:
        status, body = http_get(svc.port, "/")
        assert status == 200 and b"probe trainer" in body
        status, _ = http_get(svc.port, "/index.html")
        assert status == 200
        assert http_get(svc.port, "/secret/../../manifest.json")[0] in (200, 404)
        assert http_get(svc.port, "/%2e%2e/manifest.json")[0] == 404


# websocket plumbing


def ws_connect(port):
    sock = socket.create_connection((HOST, port), timeout=10)
    key = base64.b64encode(os.urandom(16)).decode()
    sock.sendall((f"GET /ws HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\n"
                  f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
                  f"Sec-WebSocket-Version: 13\r\n\r\n").encode())
    head = b""
    while b"\r\n\r\n" not in head:
        chunk = sock.recv(1024)
        if not chunk:
            raise ConnectionError("no handshake response")
        head += chunk
    status_line, rest = head.split(b"\r\n", 1)
    assert b"101" in status_line
    want = base64.b64encode(hashlib.sha1(
        (key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11").encode()).digest())
    assert want in rest
    return sock


def ws_send(sock, doc, opcode=0x1):
    payload = json.dumps(doc).encode()
    mask = os.urandom(4)
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([0x80 | n])
    else:
        head += bytes([0x80 | 126]) + struct.pack(">H", n)
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    sock.sendall(head + mask + masked)


def ws_recv(sock):
    def need(n):
        data = b""
        while len(data) < n:
            chunk = sock.recv(n - len(data))
            if not chunk:
                raise ConnectionError("ws closed")
            data += chunk
        return data

    b1, b2 = need(2)
    opcode = b1 & 0x0F
    length = b2 & 0x7F
    if length == 126:
        length = struct.unpack(">H", need(2))[0]
    elif length == 127:
        length = struct.unpack(">Q", need(8))[0]
    payload = need(length)
    return opcode, payload


def test_websocket_round_trip(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, dwell_ms=100.0) as svc:
        sock = ws_connect(svc.port)
        opcode, payload = ws_recv(sock)
        assert opcode == 0x1
        snap = json.loads(payload)
        assert snap["type"] == "state"

        contacts = [True, False, False, False, False]
        ws_send(sock, {"type": "virtual_probe", "yaw": 90.0, "pitch": 7.0,
                       "roll": 0.0, "contacts": contacts})
        end = time.monotonic() + 10.0
        done = None
        while time.monotonic() < end:
            opcode, payload = ws_recv(sock)
            if opcode != 0x1:
                continue
            msg = json.loads(payload)
            if msg["type"] == "state" and msg["completed"]:
                done = msg
                break
        assert done is not None and done["stage_max"] == 3
        sock.close()


def test_websocket_ping_pong(manifest):
    with SessionService(manifest, port=0, sniff_timeout_s=0.05) as svc:
        sock = ws_connect(svc.port)
        ws_recv(sock)  # snapshot
        mask = os.urandom(4)
        sock.sendall(bytes([0x89, 0x83]) + mask +
                     bytes(b ^ mask[i % 4] for i, b in enumerate(b"hey")))
        end = time.monotonic() + 5.0
        while time.monotonic() < end:
            opcode, payload = ws_recv(sock)
            if opcode == 0xA:
                assert payload == b"hey"
                break
        else:
            pytest.fail("no pong")
        sock.close()


def test_queue_sheds_frames_before_states():
    a, b = socket.socketpair()
    try:
        client = _Client(a, websocket=False, cap=4)
        for i in range(4):
            client.send_json("state", {"seq": i})
        client.send_json("frame_ref", {"n": 1})  # queue full of must-deliver
        assert [k for k, _ in client.queue] == ["state"] * 4
        client.queue.clear()
        for i in range(4):
            client.send_json("frame_ref", {"n": i})
        client.send_json("state", {"seq": 9})
        kinds = [k for k, _ in client.queue]
        assert kinds == ["frame_ref"] * 3 + ["state"]
        client.send_json("heartbeat", {})  # sheds the oldest frame_ref
        kinds = [k for k, _ in client.queue]
        assert kinds == ["frame_ref"] * 2 + ["state", "heartbeat"]
    finally:
        a.close()
        b.close()


def test_states_never_dropped_for_slow_readers(manifest):
    # a reader that never drains still sees every state transition when it
    # finally catches up, because only droppable kinds are shed
    with SessionService(manifest, port=0, sniff_timeout_s=0.05, dwell_ms=100.0, queue_cap=8) as svc:
        c = LineClient(svc.port)
        time.sleep(0.2)  # let frame traffic pile up while we hold back
        c.probe(yaw=90.0, pitch=7.0, contact=0)
        done, seen = c.recv_until(
            lambda m: m["type"] == "state" and m["completed"])
        states = [m for m in seen if m["type"] == "state"]
        seqs = [m["seq"] for m in states]
        assert seqs == list(range(seqs[0], seqs[0] + len(seqs)))
        c.close()
