"""Network session service.

One listening port carries everything. Incoming connections are sniffed:
a request line starting with "GET " gets HTTP treatment (static UI files,
the client-facing manifest, quiz content, GIF assets, and the WebSocket
upgrade); anything else is treated as a raw TCP client speaking
newline-delimited JSON. WebSocket clients speak the same JSON documents,
one per text frame, so the two transports differ only in framing.

Server messages (one JSON object per line/frame, `type` selects):
  state        seq, stage (live), stage_max (best this attempt), tilt_class,
               completed, target{view,variant}, feedback_event{t_ms,code}?
  frame_ref    asset_key "View/Class", frame_index (preloaded playback)
  slice_frame  width, height, pixels (base64 of row-major grayscale bytes)
  calibration  phase collecting|applied|failed, seconds_remaining, detail?
  quiz_result  item_id, correct, explanation
  error        code, detail
  heartbeat    t_ms

Client messages:
  select_target {view, variant}      virtual_probe {yaw, pitch, roll,
  start_calibration                                 contacts[5]}
  reset_attempt                      quiz_answer {item_id, choice}

Threading: one stepper applies the held pose to the session at a fixed
rate (state writes happen nowhere else except the rare control messages,
serialized by the same lock); one playback thread paces frames off a
shared monotonic clock so every client sees the same cardiac phase; each
client gets a reader and a writer thread with a bounded FIFO between
them. When a queue fills, the oldest droppable message (frames, slices,
heartbeats) is shed first; state updates are never dropped, which keeps
their sequence numbers gap-free per client.
"""

from __future__ import annotations

import base64
import errno
import hashlib
import json
import logging
import math
import socket
import threading
import time
from collections import deque
from pathlib import Path
from typing import Optional

from .assets import AssetKey, AssetManifest, MissingAsset, key_name
from .quizbank import QuizBank, bank_to_json, default_bank
from .session import (
    DEFAULT_DWELL_MS,
    DEFAULT_SPECS,
    DEFAULT_TOL_DEG,
    OutOfRange,
    SessionState,
    TiltClass,
    Variant,
    View,
    check_answer,
    new_session,
    reset_attempt,
    select_visualization,
    step,
    view_spec,
)
from .slicer import slice_frame, tilted_plane
from .telemetry import (
    Calibration,
    MalformedLine,
    ProbeSample,
    TelemetryError,
    calibrate,
    contact_hall,
    parse_line,
    to_pose,
)
from .volume import VolumeSequence

log = logging.getLogger(__name__)

STAGE_MAX = 3
DEFAULT_PORT = 8080
DEFAULT_HEARTBEAT_S = 5.0
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_DROPPABLE = ("frame_ref", "slice_frame", "heartbeat", "pong")
# first four bytes of every HTTP method this side cares to recognize; a
# raw JSON peer opens with '{' (or nothing at all) and never collides
_HTTP_VERBS = (b"GET ", b"POST", b"PUT ", b"HEAD", b"DELE", b"OPTI", b"PATC")


class ServiceError(Exception):
    pass


class PortInUse(ServiceError):
    pass


def _encode_line(payload: bytes) -> bytes:
    return payload + b"\n"


def _ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    n = len(payload)
    head = bytes([0x80 | opcode])
    if n < 126:
        head += bytes([n])
    elif n < 65536:
        head += bytes([126]) + n.to_bytes(2, "big")
    else:
        head += bytes([127]) + n.to_bytes(8, "big")
    return head + payload


def _ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


class _Client:
    """One connected peer: a bounded FIFO and a writer thread draining it."""

    def __init__(self, sock: socket.socket, websocket: bool, cap: int):
        self.sock = sock
        self.websocket = websocket
        self.cap = cap
        self.queue: deque[tuple[str, bytes]] = deque()
        self.cond = threading.Condition()
        self.closed = False

    def send_json(self, kind: str, doc: dict) -> None:
        payload = json.dumps(doc, separators=(",", ":")).encode("utf-8")
        wire = _ws_frame(payload) if self.websocket else _encode_line(payload)
        self.enqueue(kind, wire)

    def enqueue(self, kind: str, wire: bytes) -> None:
        with self.cond:
            if self.closed:
                return
            if len(self.queue) >= self.cap:
                for i, (k, _) in enumerate(self.queue):
                    if k in _DROPPABLE:
                        del self.queue[i]
                        break
                else:
                    if kind in _DROPPABLE:
                        return  # full of must-deliver traffic; shed the new one
            self.queue.append((kind, wire))
            self.cond.notify()

    def writer_loop(self) -> None:
        while True:
            with self.cond:
                while not self.queue and not self.closed:
                    self.cond.wait()
                if self.closed and not self.queue:
                    return
                _, wire = self.queue.popleft()
            try:
                self.sock.sendall(wire)
            except OSError:
                self.close()
                return

    def close(self) -> None:
        with self.cond:
            if self.closed:
                return
            self.closed = True
            self.cond.notify_all()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class SessionService:
    """The running service. Construct, then `start()`; `stop()` tears every
    thread down. Usable as a context manager."""

    def __init__(self,
                 manifest: AssetManifest,
                 source: str = "virtual",
                 host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT,
                 bank: QuizBank | None = None,
                 target: tuple[View | str, Variant | str] = (View.APICAL, Variant.TILT),
                 level: int = 2,
                 mode: str = "preloaded",
                 volume: VolumeSequence | None = None,
                 web_root: str | Path | None = None,
                 rate_hz: float = 50.0,
                 replay_rate_hz: float | None = None,
                 heartbeat_s: float = DEFAULT_HEARTBEAT_S,
                 dwell_ms: float = DEFAULT_DWELL_MS,
                 tol_deg: float = DEFAULT_TOL_DEG,
                 cal_window_s: float = 20.0,
                 queue_cap: int = 64,
                 sniff_timeout_s: float = 0.25):
        if mode not in ("preloaded", "realtime"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "realtime" and volume is None:
            raise ValueError("realtime mode needs a volume sequence")
        self.manifest = manifest
        self.source = source
        self.host = host
        self.port = port
        self.bank = bank if bank is not None else default_bank()
        self.level = level
        self.mode = mode
        self.volume = volume
        self.web_root = Path(web_root) if web_root else None
        self.rate_hz = rate_hz
        self.replay_rate_hz = replay_rate_hz if replay_rate_hz else rate_hz
        self.heartbeat_s = heartbeat_s
        self.dwell_ms = dwell_ms
        self.tol_deg = tol_deg
        self.cal_window_s = cal_window_s
        self.queue_cap = queue_cap
        self.sniff_timeout_s = sniff_timeout_s

        self._session: SessionState = new_session(
            view_spec(target[0], target[1]), level=level)
        self._state_lock = threading.Lock()
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._seq = 0

        self._sample: Optional[ProbeSample] = None
        self._calibration = Calibration()
        self._sample_lock = threading.Lock()
        self._vseq = 0
        self._cal_buf: Optional[list[ProbeSample]] = None
        self._cal_needed = 0

        # written by the stepper, read by playback; plain attribute writes
        self._viz: Optional[AssetKey] = None
        self._viz_pose = None

        # raw GIF bytes cached up front so serving assets does no disk I/O
        self._gif_bytes = {
            key: (manifest.root / entry.gif_path).read_bytes()
            for key, entry in manifest.entries.items()
        }

        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._listener: Optional[socket.socket] = None
        self._t0 = 0.0

    # lifecycle

    def start(self) -> "SessionService":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((self.host, self.port))
        except OSError as exc:
            listener.close()
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {self.port} is already in use") from exc
            raise
        listener.listen(16)
        self.port = listener.getsockname()[1]
        self._listener = listener
        self._t0 = time.monotonic()

        self._spawn(self._accept_loop, "accept")
        self._spawn(self._stepper_loop, "stepper")
        self._spawn(self._playback_loop, "playback")
        self._spawn(self._heartbeat_loop, "heartbeat")
        if self.source.startswith("replay:"):
            self._spawn(self._replay_loop, "replay", self.source[len("replay:"):])
        elif self.source.startswith("serial:"):
            self._spawn(self._serial_loop, "serial", self.source[len("serial:"):])
        elif self.source != "virtual":
            raise ValueError(f"unknown telemetry source {self.source!r}")
        log.info("listening on %s:%d (source=%s mode=%s)",
                 self.host, self.port, self.source, self.mode)
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.close()
        for t in self._threads:
            t.join(timeout=2.0)

    def __enter__(self) -> "SessionService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _spawn(self, fn, name: str, *args) -> None:
        t = threading.Thread(target=fn, args=args, name=f"svc-{name}", daemon=True)
        t.start()
        self._threads.append(t)

    def _now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    # state fan-out

    def _state_doc(self) -> dict:
        s = self._session
        spec = s.target
        return {
            "type": "state",
            "seq": self._seq,
            "stage": s.live_stage,
            "stage_max": s.stage,
            "tilt_class": s.tilt_class.value if s.tilt_class else None,
            "completed": s.completed,
            "target": {"view": spec.view.value, "variant": spec.variant.value},
        }

    def _broadcast_state(self, event=None) -> None:
        with self._clients_lock:
            with self._state_lock:
                self._seq += 1
                doc = self._state_doc()
                if event is not None:
                    doc["feedback_event"] = {"t_ms": event.t_ms,
                                             "code": event.code.value}
            for c in self._clients:
                c.send_json("state", doc)

    def _broadcast(self, kind: str, doc: dict) -> None:
        with self._clients_lock:
            for c in self._clients:
                c.send_json(kind, doc)

    def _attach(self, client: _Client) -> None:
        """Register a peer and hand it the current snapshot; registration
        and snapshot share the broadcast lock so no state update can slip
        between them."""
        with self._clients_lock:
            with self._state_lock:
                doc = self._state_doc()
            client.send_json("state", doc)
            self._clients.append(client)
        threading.Thread(target=client.writer_loop, daemon=True,
                         name="svc-writer").start()

    def _drop_client(self, client: _Client) -> None:
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)
        client.close()

    # stepper

    def _stepper_loop(self) -> None:
        interval = 1.0 / self.rate_hz
        dt_ms = 1000.0 * interval
        while not self._stop.wait(interval):
            with self._sample_lock:
                sample = self._sample
                cal = self._calibration
            if sample is None:
                continue
            pose = to_pose(sample, cal)
            with self._state_lock:
                s = self._session
                before = (s.live_stage, s.stage, s.tilt_class, s.completed)
                n0 = len(s.feedback)
                step(s, pose, dt_ms, self.dwell_ms, self.tol_deg)
                events = list(s.feedback[n0:])
                after = (s.live_stage, s.stage, s.tilt_class, s.completed)
                viz = select_visualization(s, pose, self.tol_deg)
            self._viz_pose = pose
            self._viz = self._resolve_viz(viz)
            if events:
                for ev in events:
                    self._broadcast_state(ev)
            elif after != before:
                self._broadcast_state()

    def _resolve_viz(self, viz) -> Optional[AssetKey]:
        if viz is None:
            return None
        if self.mode == "realtime":
            return viz
        try:
            return self.manifest.resolve(*viz)
        except MissingAsset:
            log.warning("no asset for %s", key_name(viz))
            return None

    # playback

    def _playback_loop(self) -> None:
        last = None
        while not self._stop.wait(0.005):
            viz = self._viz
            if viz is None:
                last = None
                continue
            if self.mode == "preloaded":
                anim = self.manifest.animations[viz]
                period = max(float(anim.delay_cs) * 10.0, 1.0)
                idx = int(self._now_ms() / period) % anim.nt
                if (viz, idx) != last:
                    self._broadcast("frame_ref", {
                        "type": "frame_ref",
                        "asset_key": key_name(viz),
                        "frame_index": idx,
                    })
                    last = (viz, idx)
            else:
                seq = self.volume
                period = max(seq.frame_period_ms, 1.0)
                idx = int(self._now_ms() / period) % len(seq.frames)
                if (viz, idx) != last:
                    pose = self._viz_pose
                    base = self.manifest.planes[viz[0]]
                    plane = tilted_plane(base, pose.pitch_deg if pose else 0.0)
                    img = slice_frame(seq.frames[idx], plane)
                    self._broadcast("slice_frame", {
                        "type": "slice_frame",
                        "width": img.width,
                        "height": img.height,
                        "pixels": base64.b64encode(img.tobytes()).decode("ascii"),
                    })
                    last = (viz, idx)

    def _heartbeat_loop(self) -> None:
        while not self._stop.wait(self.heartbeat_s):
            self._broadcast("heartbeat", {"type": "heartbeat",
                                          "t_ms": round(self._now_ms(), 1)})

    # telemetry sources

    def _ingest(self, sample: ProbeSample) -> None:
        finished: Optional[list[ProbeSample]] = None
        with self._sample_lock:
            self._sample = sample
            if self._cal_buf is not None:
                self._cal_buf.append(sample)
                if len(self._cal_buf) >= self._cal_needed:
                    finished = self._cal_buf
                    self._cal_buf = None
        if finished is not None:
            self._finish_calibration(finished)

    def _begin_calibration(self) -> None:
        with self._sample_lock:
            self._cal_needed = max(2, round(self.cal_window_s * self.rate_hz))
            self._cal_buf = []
        self._broadcast("calibration", {
            "type": "calibration", "phase": "collecting",
            "seconds_remaining": self.cal_window_s,
        })

    def _finish_calibration(self, buf: list[ProbeSample]) -> None:
        try:
            cal = calibrate(buf, window_s=self.cal_window_s,
                            sample_rate_hz=self.rate_hz)
        except TelemetryError as exc:
            self._broadcast("calibration", {
                "type": "calibration", "phase": "failed",
                "seconds_remaining": 0.0, "detail": str(exc),
            })
            return
        with self._sample_lock:
            self._calibration = cal
        self._broadcast("calibration", {
            "type": "calibration", "phase": "applied", "seconds_remaining": 0.0,
        })

    def _replay_loop(self, path: str) -> None:
        interval = 1.0 / self.replay_rate_hz
        try:
            with open(path, "rb") as f:
                for raw in f:
                    if not raw.strip():
                        continue
                    try:
                        sample = parse_line(raw)
                    except MalformedLine as exc:
                        log.warning("replay: skipping line (%s)", exc)
                        continue
                    self._ingest(sample)
                    if self._stop.wait(interval):
                        return
        except OSError as exc:
            log.error("replay source failed: %s", exc)
        log.info("replay source exhausted; holding last pose")

    def _serial_loop(self, device: str) -> None:
        try:
            with open(device, "rb", buffering=0) as f:
                buf = b""
                while not self._stop.is_set():
                    chunk = f.read(256)
                    if not chunk:
                        time.sleep(0.01)
                        continue
                    buf += chunk
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        if not line.strip():
                            continue
                        try:
                            self._ingest(parse_line(line))
                        except MalformedLine as exc:
                            log.warning("serial: skipping line (%s)", exc)
        except OSError as exc:
            log.error("serial source failed: %s", exc)

    # client message handling

    def _handle_client_msg(self, client: _Client, data: bytes) -> None:
        try:
            msg = json.loads(data)
            if not isinstance(msg, dict):
                raise ValueError("message must be an object")
            mtype = msg.get("type")
        except ValueError as exc:
            self._error(client, "BadRequest", f"unparseable message: {exc}")
            return
        try:
            if mtype == "virtual_probe":
                self._on_virtual_probe(client, msg)
            elif mtype == "select_target":
                spec = view_spec(View(msg["view"]), Variant(msg["variant"]))
                with self._state_lock:
                    self._session = new_session(spec, level=self.level)
                self._broadcast_state()
            elif mtype == "reset_attempt":
                with self._state_lock:
                    reset_attempt(self._session)
                self._broadcast_state()
            elif mtype == "start_calibration":
                self._begin_calibration()
            elif mtype == "quiz_answer":
                self._on_quiz_answer(client, msg)
            else:
                self._error(client, "BadRequest", f"unknown type {mtype!r}")
        except (KeyError, TypeError, ValueError, OutOfRange) as exc:
            self._error(client, "BadRequest", str(exc))

    def _on_virtual_probe(self, client: _Client, msg: dict) -> None:
        if self.source != "virtual":
            self._error(client, "SourceConflict",
                        f"telemetry source is {self.source!r}; virtual probe refused")
            return
        yaw = float(msg["yaw"])
        pitch = float(msg["pitch"])
        roll = float(msg["roll"])
        contacts = msg["contacts"]
        if (len(contacts) != 5
                or not all(isinstance(c, bool) for c in contacts)
                or not all(math.isfinite(a) for a in (yaw, pitch, roll))):
            raise ValueError("virtual_probe needs finite angles and contacts[5] booleans")
        with self._sample_lock:
            self._vseq += 1
            seq = self._vseq
        self._ingest(ProbeSample(
            seq=seq, yaw_deg=yaw, pitch_deg=pitch, roll_deg=roll,
            hall_raw=tuple(contact_hall(c) for c in contacts)))

    def _on_quiz_answer(self, client: _Client, msg: dict) -> None:
        item_id = str(msg["item_id"])
        choice = int(msg["choice"])
        try:
            item = self.bank.by_id(item_id)
        except KeyError:
            self._error(client, "BadRequest", f"unknown quiz item {item_id!r}")
            return
        correct, explanation = check_answer(item, choice)
        client.send_json("quiz_result", {
            "type": "quiz_result", "item_id": item_id,
            "correct": correct, "explanation": explanation,
        })

    def _error(self, client: _Client, code: str, detail: str) -> None:
        client.send_json("error", {"type": "error", "code": code, "detail": detail})

    # connection handling

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handle_conn, args=(sock,),
                             name="svc-conn", daemon=True).start()

    def _handle_conn(self, sock: socket.socket) -> None:
        """Tell HTTP apart from a raw JSON client by the first bytes. A raw
        client is allowed to stay silent (the server speaks first), so the
        sniff gives up after a short window and assumes raw."""
        try:
            sock.settimeout(self.sniff_timeout_s)
            try:
                head = sock.recv(4, socket.MSG_PEEK)
            except TimeoutError:
                head = b""
            if head and any(v.startswith(head) or head.startswith(v)
                            for v in _HTTP_VERBS):
                sock.settimeout(10.0)
                self._handle_http(sock)
            else:
                sock.settimeout(None)
                self._run_tcp_client(sock)
        except OSError:
            try:
                sock.close()
            except OSError:
                pass

    def _run_tcp_client(self, sock: socket.socket) -> None:
        client = _Client(sock, websocket=False, cap=self.queue_cap)
        self._attach(client)
        try:
            reader = sock.makefile("rb")
            for raw in reader:
                line = raw.strip()
                if line:
                    self._handle_client_msg(client, line)
        except OSError:
            pass
        finally:
            self._drop_client(client)

    # HTTP side

    def _handle_http(self, sock: socket.socket) -> None:
        request = self._read_http_head(sock)
        if request is None:
            sock.close()
            return
        method, path, headers = request
        if headers.get("upgrade", "").lower() == "websocket":
            self._upgrade_websocket(sock, headers)
            return
        try:
            if method != "GET":
                self._respond(sock, 405, b"method not allowed")
            elif path == "/manifest.json":
                self._respond(sock, 200, self._client_manifest().encode(),
                              "application/json")
            elif path == "/quiz.json":
                self._respond(sock, 200, bank_to_json(self.bank).encode(),
                              "application/json")
            elif path.startswith("/assets/"):
                self._serve_asset(sock, path)
            else:
                self._serve_static(sock, path)
        finally:
            try:
                sock.close()
            except OSError:
                pass

    @staticmethod
    def _read_http_head(sock: socket.socket):
        data = b""
        while b"\r\n\r\n" not in data:
            try:
                chunk = sock.recv(4096)
            except OSError:
                return None
            if not chunk or len(data) > 65536:
                return None
            data += chunk
        head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
        lines = head.split("\r\n")
        parts = lines[0].split(" ")
        if len(parts) < 3:
            return None
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()
        return parts[0], parts[1], headers

    @staticmethod
    def _respond(sock: socket.socket, status: int, body: bytes,
                 ctype: str = "text/plain") -> None:
        reason = {200: "OK", 404: "Not Found", 405: "Method Not Allowed",
                  400: "Bad Request"}.get(status, "")
        head = (f"HTTP/1.1 {status} {reason}\r\n"
                f"Content-Type: {ctype}\r\n"
                f"Content-Length: {len(body)}\r\n"
                f"Access-Control-Allow-Origin: *\r\n"
                f"Connection: close\r\n\r\n")
        try:
            sock.sendall(head.encode("latin-1") + body)
        except OSError:
            pass

    def _client_manifest(self) -> str:
        entries = {
            key_name(key): {
                "gif": f"/assets/{key[0].value}/{key[1].value}.gif",
                "frame_period_ms": entry.frame_period_ms,
            }
            for key, entry in self.manifest.entries.items()
        }
        targets = [{"view": v.value, "variant": var.value}
                   for (v, var) in sorted(DEFAULT_SPECS,
                                          key=lambda k: (k[0].value, k[1].value))]
        return json.dumps({
            "entries": entries,
            "sensors": {v.value: i for v, i in self.manifest.sensors.items()},
            "targets": targets,
            "stage_max": STAGE_MAX,
        })

    def _serve_asset(self, sock: socket.socket, path: str) -> None:
        parts = path.strip("/").split("/")
        if len(parts) == 3 and parts[2].endswith(".gif"):
            try:
                key = (View(parts[1]), TiltClass(parts[2][:-4]))
            except ValueError:
                self._respond(sock, 404, b"no such asset")
                return
            blob = self._gif_bytes.get(key)
            if blob is not None:
                self._respond(sock, 200, blob, "image/gif")
                return
        self._respond(sock, 404, b"no such asset")

    def _serve_static(self, sock: socket.socket, path: str) -> None:
        if self.web_root is None:
            self._respond(sock, 404, b"not found")
            return
        rel = path.lstrip("/") or "index.html"
        target = (self.web_root / rel).resolve()
        root = self.web_root.resolve()
        if root not in target.parents and target != root:
            self._respond(sock, 404, b"not found")
            return
        if not target.is_file():
            self._respond(sock, 404, b"not found")
            return
        ctype = {
            ".html": "text/html", ".js": "text/javascript",
            ".css": "text/css", ".json": "application/json",
            ".gif": "image/gif", ".svg": "image/svg+xml",
        }.get(target.suffix, "application/octet-stream")
        self._respond(sock, 200, target.read_bytes(), ctype)

    # WebSocket side

    def _upgrade_websocket(self, sock: socket.socket, headers: dict) -> None:
        key = headers.get("sec-websocket-key")
        if not key:
            self._respond(sock, 400, b"missing websocket key")
            sock.close()
            return
        accept = _ws_accept_key(key)
        resp = ("HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n")
        try:
            sock.sendall(resp.encode("latin-1"))
        except OSError:
            sock.close()
            return
        sock.settimeout(None)
        client = _Client(sock, websocket=True, cap=self.queue_cap)
        self._attach(client)
        try:
            self._ws_reader(sock, client)
        except OSError:
            pass
        finally:
            self._drop_client(client)

    def _ws_reader(self, sock: socket.socket, client: _Client) -> None:
        reader = sock.makefile("rb")

        def need(n: int) -> Optional[bytes]:
            data = reader.read(n)
            return data if data is not None and len(data) == n else None

        message = b""
        while True:
            head = need(2)
            if head is None:
                return
            fin = head[0] & 0x80
            opcode = head[0] & 0x0F
            masked = head[1] & 0x80
            length = head[1] & 0x7F
            if length == 126:
                ext = need(2)
                if ext is None:
                    return
                length = int.from_bytes(ext, "big")
            elif length == 127:
                ext = need(8)
                if ext is None:
                    return
                length = int.from_bytes(ext, "big")
            if length > 1 << 20:
                return
            mask = need(4) if masked else b""
            payload = need(length) if length else b""
            if payload is None:
                return
            if masked and payload:
                payload = bytes(b ^ mask[i & 3] for i, b in enumerate(payload))
            if opcode == 0x8:  # close
                return
            if opcode == 0x9:  # ping
                client.enqueue("pong", _ws_frame(payload, opcode=0xA))
                continue
            if opcode == 0xA:  # pong
                continue
            if opcode in (0x0, 0x1, 0x2):
                message += payload
                if fin:
                    if message.strip():
                        self._handle_client_msg(client, message)
                    message = b""


def serve(manifest: AssetManifest, source: str = "virtual",
          port: int = DEFAULT_PORT, **kwargs) -> SessionService:
    """Build and start a service; returns it running."""
    return SessionService(manifest, source=source, port=port, **kwargs).start()
