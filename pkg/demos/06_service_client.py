"""
Talking to the session service over a socket
============================================

The service speaks newline-delimited JSON to anything that connects.
This starts one in-process, acts as a minimal client, and walks an
attempt through to completion with virtual probe messages.
"""

import json
import pathlib
import socket
import tempfile
import time
import urllib.request

from echosim.assets import synthetic_library
from echosim.service import serve

root = pathlib.Path(tempfile.mkdtemp(prefix="echosim_svc_"))
manifest = synthetic_library(root, nt=4, n=16, size_px=32)
svc = serve(manifest, source="virtual", port=0, sniff_timeout_s=0.05)
print(f"service on {svc.host}:{svc.port}")

sock = socket.create_connection((svc.host, svc.port), timeout=10)
reader = sock.makefile("rb")


def send(doc):
    sock.sendall((json.dumps(doc) + "\n").encode())


def probe(yaw, pitch, contact=None):
    send({"type": "virtual_probe", "yaw": yaw, "pitch": pitch, "roll": 0.0,
          "contacts": [i == contact for i in range(5)]})


# First message in is always a full snapshot of where the session stands.
snap = json.loads(reader.readline())
print(f"snapshot: target={snap['target']} bar={snap['stage_max']}/3")

# Feed poses like a learner homing in: pad, then notch, then tilt held.
# The service samples-and-holds, so a short pause between phases lets it
# observe each one; the last pose keeps accruing dwell on its own.
for yaw, pitch in ((40.0, 0.0), (90.0, 0.0), (90.0, 7.0)):
    for _ in range(3):
        probe(yaw, pitch, contact=0)
    time.sleep(0.15)

seen = set()
while True:
    msg = json.loads(reader.readline())
    kind = msg["type"]
    if kind == "state":
        line = (f"state: bar={msg['stage_max']}/3 class={msg['tilt_class']} "
                f"completed={msg['completed']}")
        if msg.get("feedback_event"):
            line += f"  <- {msg['feedback_event']['code']}"
        if line not in seen:
            seen.add(line)
            print(line)
        if msg["completed"]:
            break
    elif kind == "frame_ref" and "frame" not in seen:
        seen.add("frame")
        print(f"frame_ref: {msg['asset_key']} (served as a GIF over HTTP)")

# The same port answers HTTP: manifest, quiz, and the GIF assets.
doc = json.loads(urllib.request.urlopen(
    f"http://{svc.host}:{svc.port}/manifest.json", timeout=10).read())
print(f"http manifest: {len(doc['entries'])} entries, "
      f"targets={len(doc['targets'])}")

sock.close()
svc.stop()
print("done")
