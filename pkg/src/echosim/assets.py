"""Cine-loop asset library.

`build_assets` renders one looping GIF per (window, tilt class) pair from a
volume sequence and records it in a JSON manifest next to the files, along
with each window's base slice plane and its contact sensor slot. Playback
never touches the pipeline again: `load_manifest` validates the manifest,
decodes every referenced GIF up front, and hands back an immutable library
whose lookups are plain dict reads. Keeping all footage resident is the
point; per-frame work during a session is index arithmetic, not I/O.

Not every class needs dedicated footage. Off-target classes without a clip
of their own fall back to the nearest recorded neighbour, so a library with
only Normal and Tilt loops still renders something sensible for an
undershot probe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gifcodec import GifAnimation, GifError, decode_gif, encode_gif, sequence_to_gif
from .session import DEFAULT_SENSORS, TiltClass, View
from .slicer import SlicePlane, make_plane
from .volume import VolumeFrame, VolumeSequence

MANIFEST_NAME = "manifest.json"

AssetKey = tuple[View, TiltClass]


class AssetError(Exception):
    pass


class SchemaError(AssetError):
    pass


class MissingAsset(AssetError):
    pass


class DecodeError(AssetError):
    pass


# Preference order when a class has no dedicated clip: stay on the same
# side of the target band before jumping across it.
FALLBACK: dict[TiltClass, tuple[TiltClass, ...]] = {
    TiltClass.NORMAL_VIEW: (TiltClass.NORMAL_VIEW, TiltClass.UNDERSHOT,
                            TiltClass.TILT_VIEW, TiltClass.OVERSHOT),
    TiltClass.UNDERSHOT: (TiltClass.UNDERSHOT, TiltClass.NORMAL_VIEW,
                          TiltClass.TILT_VIEW, TiltClass.OVERSHOT),
    TiltClass.TILT_VIEW: (TiltClass.TILT_VIEW, TiltClass.UNDERSHOT,
                          TiltClass.OVERSHOT, TiltClass.NORMAL_VIEW),
    TiltClass.OVERSHOT: (TiltClass.OVERSHOT, TiltClass.TILT_VIEW,
                         TiltClass.UNDERSHOT, TiltClass.NORMAL_VIEW),
}


def key_name(key: AssetKey) -> str:
    return f"{key[0].value}/{key[1].value}"


def parse_key(name: str) -> AssetKey:
    try:
        view, cls = name.split("/")
        return View(view), TiltClass(cls)
    except ValueError as exc:
        raise SchemaError(f"bad asset key {name!r}") from exc


@dataclass(frozen=True)
class AssetEntry:
    gif_path: str  # relative to the manifest's directory
    source_volume_id: str
    frame_period_ms: float


@dataclass
class AssetManifest:
    entries: dict[AssetKey, AssetEntry]
    planes: dict[View, SlicePlane]
    sensors: dict[View, int]
    root: Path
    animations: dict[AssetKey, GifAnimation] = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AssetManifest):
            return NotImplemented
        return (self.entries == other.entries and self.planes == other.planes
                and self.sensors == other.sensors)

    def resolve(self, view: View, cls: TiltClass) -> AssetKey:
        """The key actually shown for (view, cls), after fallback."""
        for candidate in FALLBACK[cls]:
            if (view, candidate) in self.entries:
                return view, candidate
        raise MissingAsset(f"no assets for view {view.value}")

    def lookup(self, view: View, cls: TiltClass) -> GifAnimation:
        return self.animations[self.resolve(view, cls)]


def _plane_doc(p: SlicePlane) -> dict:
    return {"origin": list(p.origin), "u": list(p.u), "v": list(p.v),
            "width_px": p.width_px, "height_px": p.height_px,
            "pixel_mm": p.pixel_mm}


def _plane_from_doc(doc: dict) -> SlicePlane:
    def vec(name: str) -> tuple[float, float, float]:
        x, y, z = (float(c) for c in doc[name])
        return x, y, z
    return SlicePlane(origin=vec("origin"), u=vec("u"), v=vec("v"),
                      width_px=int(doc["width_px"]),
                      height_px=int(doc["height_px"]),
                      pixel_mm=float(doc["pixel_mm"]))


def build_assets(volumes: dict[AssetKey, VolumeSequence],
                 planes: dict[View, SlicePlane],
                 out_dir: str | Path,
                 sensors: dict[View, int] | None = None,
                 volume_ids: dict[AssetKey, str] | None = None) -> AssetManifest:
    """Render every (view, class) volume through its view's plane, write the
    GIFs and the manifest under out_dir, and return the loaded (decoded)
    library. Output is deterministic: unchanged inputs rebuild byte-identical
    files."""
    if not volumes:
        raise ValueError("no volumes given")
    views = {view for view, _ in volumes}
    missing = sorted(v.value for v in views if v not in planes)
    if missing:
        raise ValueError(f"no plane for view(s): {', '.join(missing)}")
    sensor_map = sensors if sensors is not None else DEFAULT_SENSORS
    missing = sorted(v.value for v in views if v not in sensor_map)
    if missing:
        raise ValueError(f"no sensor for view(s): {', '.join(missing)}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries: dict[str, dict] = {}
    for key in sorted(volumes, key=key_name):
        view, cls = key
        seq = volumes[key]
        anim = sequence_to_gif(seq, planes[view])
        name = f"{view.value}_{cls.value}.gif"
        (out / name).write_bytes(encode_gif(anim))
        vid = (volume_ids or {}).get(key, key_name(key))
        entries[key_name(key)] = {
            "gif": name,
            "source_volume_id": vid,
            "frame_period_ms": seq.frame_period_ms,
        }

    doc = {
        "entries": entries,
        "planes": {v.value: _plane_doc(planes[v]) for v in sorted(views, key=lambda x: x.value)},
        "sensors": {v.value: int(sensor_map[v]) for v in sorted(views, key=lambda x: x.value)},
    }
    manifest = out / MANIFEST_NAME
    manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return load_manifest(manifest)


def load_manifest(path: str | Path) -> AssetManifest:
    """Validate a manifest and pull every referenced GIF into memory,
    decoded. Raises SchemaError for structural problems, MissingAsset when
    a referenced file is absent (the message names the asset key), and
    DecodeError when a file exists but will not decode."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("manifest root must be an object")
    for section in ("entries", "planes", "sensors"):
        if section not in raw or not isinstance(raw[section], dict):
            raise SchemaError(f"manifest section {section!r} missing or not an object")
    if not raw["entries"]:
        raise SchemaError("manifest has no entries")

    try:
        planes = {View(name): _plane_from_doc(doc)
                  for name, doc in raw["planes"].items()}
        sensors = {View(name): int(idx) for name, idx in raw["sensors"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad plane or sensor record: {exc}") from exc
    for view, idx in sensors.items():
        if not 0 <= idx <= 4:
            raise SchemaError(f"sensor index {idx} for {view.value} outside 0..4")

    entries: dict[AssetKey, AssetEntry] = {}
    for name, doc in raw["entries"].items():
        key = parse_key(name)
        if not isinstance(doc, dict):
            raise SchemaError(f"entry {name!r} must be an object")
        try:
            entry = AssetEntry(gif_path=str(doc["gif"]),
                               source_volume_id=str(doc["source_volume_id"]),
                               frame_period_ms=float(doc["frame_period_ms"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"entry {name!r} malformed: {exc}") from exc
        view = key[0]
        if view not in planes:
            raise SchemaError(f"entry {name!r} has no plane for {view.value}")
        if view not in sensors:
            raise SchemaError(f"entry {name!r} has no sensor for {view.value}")
        entries[key] = entry

    root = path.parent
    animations: dict[AssetKey, GifAnimation] = {}
    for key, entry in entries.items():
        gif_file = root / entry.gif_path
        if not gif_file.is_file():
            raise MissingAsset(f"asset {key_name(key)}: file {entry.gif_path!r} not found")
        try:
            animations[key] = decode_gif(gif_file.read_bytes())
        except GifError as exc:
            raise DecodeError(f"asset {key_name(key)}: {exc}") from exc

    return AssetManifest(entries=entries, planes=planes, sensors=sensors,
                         root=root, animations=animations)


# Stand-in geometry for working without recorded clinical footage: one
# plane per window, all centered on the volume, with orientations chosen
# to cut visibly different sections. Real deployments override these with
# measured planes in the manifest.
_VIEW_AXES: dict[View, tuple[tuple[float, float, float], tuple[float, float, float]]] = {
    View.APICAL: ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
    View.PLAX: ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    View.PSAX: ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
    View.SUBCOSTAL: ((1.0, 0.0, 0.0), (0.0, 1.0, 1.0)),
    View.SUPRASTERNAL: ((0.0, 1.0, 0.0), (1.0, 0.0, 1.0)),
}


def default_planes(frame: VolumeFrame, size_px: int = 128) -> dict[View, SlicePlane]:
    """Center-anchored per-window planes sized to span the frame."""
    nx, ny, nz = frame.dims
    extent = np.array([(n - 1) * s for n, s in zip((nx, ny, nz), frame.spacing)])
    center = np.array(frame.origin) + extent / 2.0
    mm = float(max(extent.max(), 1e-6)) / size_px
    planes: dict[View, SlicePlane] = {}
    for view, (u, v) in _VIEW_AXES.items():
        probe = make_plane(center, u, v, size_px, size_px, mm)
        uhat = np.array(probe.u)
        vhat = np.array(probe.v)
        origin = center - uhat * ((size_px - 1) / 2.0 * mm) - vhat * ((size_px - 1) / 2.0 * mm)
        planes[view] = make_plane(origin, uhat, vhat, size_px, size_px, mm)
    return planes


def synthetic_sequence(nt: int = 8, n: int = 32,
                       frame_period_ms: float = 50.0,
                       accent: float = 0.0) -> VolumeSequence:
    """A deterministic beating-blob test volume: a bright ellipsoid whose
    radius breathes over the cycle. `accent` shifts a second, smaller blob
    off-center so variant footage is distinguishable by eye. Useful
    wherever real footage is absent (demos, tests, default CLI runs)."""
    zs, ys, xs = np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                             indexing="ij")
    c = (n - 1) / 2.0
    r2 = (xs - c) ** 2 + (ys - c) ** 2 + (zs - c) ** 2
    off = accent * n / 4.0
    r2b = (xs - c) ** 2 + (ys - c) ** 2 + (zs - c - off) ** 2
    frames = []
    for t in range(nt):
        radius = n * (0.30 + 0.08 * np.sin(2.0 * np.pi * t / nt))
        shell = np.clip(1.0 - np.sqrt(r2) / radius, 0.0, 1.0)
        if accent:
            shell = np.maximum(
                shell, 0.8 * np.clip(1.0 - np.sqrt(r2b) / (radius / 2.0), 0.0, 1.0))
        voxels = np.rint(shell * 255.0).astype(np.uint8)
        frames.append(VolumeFrame(spacing=(1.0, 1.0, 1.0),
                                  origin=(0.0, 0.0, 0.0), voxels=voxels))
    return VolumeSequence(frames=frames, frame_period_ms=frame_period_ms)


def synthetic_library(out_dir: str | Path, nt: int = 8, n: int = 32,
                      size_px: int = 64) -> AssetManifest:
    """Build a complete Normal+Tilt library for all five windows from the
    synthetic volume. Small by default so it stays fast."""
    normal = synthetic_sequence(nt=nt, n=n)
    tilted = synthetic_sequence(nt=nt, n=n, accent=1.0)
    planes = default_planes(normal.frames[0], size_px=size_px)
    volumes = {}
    for view in View:
        volumes[(view, TiltClass.NORMAL_VIEW)] = normal
        volumes[(view, TiltClass.TILT_VIEW)] = tilted
    return build_assets(volumes, planes, out_dir)
