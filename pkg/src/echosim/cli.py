"""Operator command line.

    echosim convert   volume(s) -> looping GIF, with a size report
    echosim slice     one frame, one plane -> PGM image
    echosim serve     run the training service against a telemetry source
    echosim simulate  run a scripted session, print the feedback log
    echosim calibrate collect a stillness window, write the offsets file

Exit codes: 0 success, 2 validation or parse failure, 3 I/O failure
(including a busy port), 4 calibration aborted because the probe moved.
Set ECHOSIM_LOG=debug (or info, warning, ...) for diagnostics on stderr;
stdout carries only data and event records.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Iterator

from . import assets, service
from .gifcodec import GifError, encode_gif, sequence_to_gif
from .session import (
    Variant,
    View,
    drive_session,
    new_session,
    view_spec,
)
from .slicer import SlicePlane, make_plane, slice_frame, write_pgm
from .telemetry import (
    NotStill,
    TelemetryError,
    calibrate,
    load_script,
    samples_from_lines,
    scripted_device,
)
from .volume import NrrdError, VolumeSequence, load_frame_directory, read_nrrd

log = logging.getLogger(__name__)

_VIEW_NAMES = {v.value.lower(): v for v in View}
_VARIANT_NAMES = {v.value.lower(): v for v in Variant}
_PRESET_SIZE_PX = 256


def _parse_target(text: str):
    try:
        view_part, variant_part = text.lower().split(":")
        return _VIEW_NAMES[view_part], _VARIANT_NAMES[variant_part]
    except (ValueError, KeyError):
        names = ",".join(sorted(_VIEW_NAMES))
        raise ValueError(
            f"target must look like apical:tilt (views: {names}; "
            f"variants: normal,tilt), got {text!r}") from None


def _load_input(path: str) -> VolumeSequence:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.nrrd"))
        if not files:
            raise ValueError(f"directory {path} contains no .nrrd files")
        return load_frame_directory(files)
    return read_nrrd(p)


def _resolve_plane(spec: str, seq: VolumeSequence) -> SlicePlane:
    """A plane flag is either a view preset name or twelve numbers:
    origin xyz, u xyz, v xyz, width_px, height_px, pixel_mm."""
    name = spec.strip().lower()
    if name in _VIEW_NAMES:
        planes = assets.default_planes(seq.frames[0], size_px=_PRESET_SIZE_PX)
        return planes[_VIEW_NAMES[name]]
    parts = spec.split(",")
    if len(parts) != 12:
        raise ValueError(
            f"plane must be a preset ({','.join(sorted(_VIEW_NAMES))}) or 12 "
            f"comma-separated numbers o,u,v,w,h,mm; got {len(parts)} fields")
    try:
        nums = [float(x) for x in parts]
    except ValueError:
        raise ValueError(f"plane spec has a non-numeric field: {spec!r}") from None
    w, h = int(nums[9]), int(nums[10])
    if w <= 0 or h <= 0 or nums[11] <= 0:
        raise ValueError("plane width, height and pixel size must be positive")
    return make_plane(nums[0:3], nums[3:6], nums[6:9], w, h, nums[11])


def _source_lines(spec: str) -> Iterator[bytes]:
    if spec.startswith("replay:"):
        with open(spec[len("replay:"):], "rb") as f:
            yield from f
    elif spec.startswith("serial:"):
        with open(spec[len("serial:"):], "rb", buffering=0) as f:
            buf = b""
            while True:
                chunk = f.read(256)
                if not chunk:
                    time.sleep(0.01)
                    continue
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    yield line + b"\n"
    else:
        raise ValueError(
            f"telemetry source must be replay:<file> or serial:<device>, got {spec!r}")


def _cmd_convert(args: argparse.Namespace) -> int:
    seq = _load_input(args.input)
    plane = _resolve_plane(args.plane, seq)
    delay_cs = None
    if args.delay_ms is not None:
        if args.delay_ms <= 0:
            raise ValueError("--delay-ms must be positive")
        delay_cs = max(1, round(args.delay_ms / 10))
    anim = sequence_to_gif(seq, plane, delay_cs=delay_cs)
    blob = encode_gif(anim)
    Path(args.output).write_bytes(blob)
    voxel_bytes = sum(f.voxels.nbytes for f in seq.frames)
    ratio = 100.0 * len(blob) / voxel_bytes if voxel_bytes else 0.0
    print(f"voxels: {voxel_bytes} bytes")
    print(f"gif:    {len(blob)} bytes ({ratio:.1f}% of raw) -> {args.output}")
    return 0


def _cmd_slice(args: argparse.Namespace) -> int:
    seq = _load_input(args.input)
    if not 0 <= args.t < len(seq.frames):
        raise ValueError(f"--t {args.t} outside 0..{len(seq.frames) - 1}")
    plane = _resolve_plane(args.plane, seq)
    img = slice_frame(seq.frames[args.t], plane)
    Path(args.output).write_bytes(write_pgm(img))
    print(f"{img.width}x{img.height} -> {args.output}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    manifest = assets.load_manifest(args.manifest)
    volume = None
    if args.mode == "realtime":
        if not args.volume:
            raise ValueError("--mode realtime needs --volume")
        volume = _load_input(args.volume)
    svc = service.serve(
        manifest,
        source=args.telemetry,
        host=args.host,
        port=args.port,
        target=_parse_target(args.target),
        mode=args.mode,
        volume=volume,
        web_root=args.web_root,
    )
    print(f"listening on {svc.host}:{svc.port}", file=sys.stderr)
    try:
        while True:
            time.sleep(1.0)
    except KeyboardInterrupt:
        pass
    finally:
        svc.stop()
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    script = load_script(args.script)
    view, variant = _parse_target(args.target)
    state = new_session(view_spec(view, variant))
    drive_session(state, scripted_device(script, rate_hz=args.rate),
                  rate_hz=args.rate)
    for ev in state.feedback:
        print(json.dumps({"t_ms": round(ev.t_ms, 3), "code": ev.code.value}))
    print(json.dumps({
        "summary": True,
        "stage_max": state.stage,
        "completed": state.completed,
        "tilt_class": state.tilt_class.value if state.tilt_class else None,
    }))
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    if args.seconds <= 0:
        raise ValueError("--seconds must be positive")
    needed = max(2, round(args.seconds * args.rate))
    samples = []
    for sample in samples_from_lines(_source_lines(args.telemetry),
                                     skip_malformed=True):
        samples.append(sample)
        if len(samples) >= needed:
            break
    cal = calibrate(samples, window_s=args.seconds, sample_rate_hz=args.rate)
    doc = {"yaw_off": cal.yaw_off, "pitch_off": cal.pitch_off,
           "roll_off": cal.roll_off, "window_s": cal.window_s}
    Path(args.output).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"calibration -> {args.output}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echosim",
        description="4D ultrasound training toolkit: convert volumes, cut "
                    "slices, and run the guided-scanning service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="volume sequence to looping GIF")
    p.add_argument("--input", required=True, help=".nrrd file or directory of per-frame .nrrd files")
    p.add_argument("--plane", required=True, help="view preset or o,u,v,w,h,mm (12 numbers)")
    p.add_argument("--delay-ms", type=float, default=None, help="frame delay override")
    p.add_argument("--output", required=True, help="output .gif path")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("slice", help="one frame through one plane to PGM")
    p.add_argument("--input", required=True)
    p.add_argument("--t", type=int, required=True, help="frame index")
    p.add_argument("--plane", required=True)
    p.add_argument("--output", required=True, help="output .pgm path")
    p.set_defaults(func=_cmd_slice)

    p = sub.add_parser("serve", help="run the network training service")
    p.add_argument("--manifest", required=True, help="asset manifest path")
    p.add_argument("--port", type=int, default=service.DEFAULT_PORT)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--telemetry", default="virtual",
                   help="serial:<device> | replay:<file> | virtual")
    p.add_argument("--target", default="apical:tilt", help="view:variant")
    p.add_argument("--mode", choices=("preloaded", "realtime"), default="preloaded")
    p.add_argument("--volume", help="volume for realtime slicing")
    p.add_argument("--web-root", help="directory of UI files to serve")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("simulate", help="run a probe script, print feedback events")
    p.add_argument("--script", required=True, help="probe script JSON")
    p.add_argument("--target", default="apical:tilt", help="view:variant")
    p.add_argument("--rate", type=float, default=50.0, help="sample rate Hz")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("calibrate", help="collect a stillness window, write offsets")
    p.add_argument("--telemetry", required=True,
                   help="replay:<file> or serial:<device>")
    p.add_argument("--seconds", type=float, default=20.0)
    p.add_argument("--rate", type=float, default=50.0, help="sample rate Hz")
    p.add_argument("--output", default="calibration.json")
    p.set_defaults(func=_cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    level_name = os.environ.get("ECHOSIM_LOG", "").strip()
    if level_name:
        level = getattr(logging, level_name.upper(), None)
        if not isinstance(level, int):
            print(f"warning: unknown ECHOSIM_LOG level {level_name!r}",
                  file=sys.stderr)
            level = logging.INFO
        logging.basicConfig(level=level, stream=sys.stderr,
                            format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotStill as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (service.PortInUse, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NrrdError, GifError, assets.AssetError, TelemetryError,
            ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
