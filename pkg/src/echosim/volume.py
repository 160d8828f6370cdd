"""NRRD volume sequences.

Reads and writes the NRRD subset used by the simulator: dimension 3 or 4,
uint8 voxels (16-bit inputs are min-max rescaled on load), raw or gzip
encoding, inline or detached payload. A 4D file carries one non-spatial
axis (kind "list", or space direction "none") that orders the frames; its
position in the header does not matter, only its kind does. The payload is
always a time-major run of frames, each frame x-fastest, which is what the
pipeline's own exporter emits. Files whose list axis is last therefore read
exactly like standard NRRD time series; list-first files are interpreted
frame-contiguously as well.
"""

from __future__ import annotations

import gzip
import re
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_FRAME_PERIOD_MS = 50.0

_MAGIC = re.compile(rb"^NRRD000[1-5]$")

_U8_TYPES = {"uchar", "unsigned char", "uint8", "uint8_t"}
_I16_TYPES = {"short", "short int", "signed short", "signed short int", "int16", "int16_t"}
_U16_TYPES = {"ushort", "unsigned short", "unsigned short int", "uint16", "uint16_t"}


class NrrdError(Exception):
    """Base for every volume parsing/writing failure."""


class BadMagic(NrrdError):
    """Input does not start with an NRRD magic line."""


class UnsupportedField(NrrdError):
    """Header is NRRD but declares something outside the supported subset."""


class SizeMismatch(NrrdError):
    """Declared sizes do not match the payload length."""


class NoTimeAxis(NrrdError):
    """Dimension-4 file with no identifiable list axis."""


class InconsistentGeometry(NrrdError):
    """Frames that must share geometry do not."""


@dataclass
class VolumeFrame:
    """One 3D voxel grid. ``voxels`` has shape (nz, ny, nx), so the flat
    buffer runs x-fastest; values are uint8. Voxel centers sit at
    origin + index * spacing."""

    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    voxels: np.ndarray

    def __post_init__(self) -> None:
        self.voxels = np.ascontiguousarray(self.voxels, dtype=np.uint8)
        if self.voxels.ndim != 3:
            raise ValueError("voxels must be a 3D array")
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.spacing) != 3 or len(self.origin) != 3:
            raise ValueError("spacing and origin must be 3-vectors")
        if any(s <= 0 for s in self.spacing):
            raise ValueError("spacing components must be positive")

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz) voxel counts."""
        nz, ny, nx = self.voxels.shape
        return nx, ny, nz

    def __eq__(self, other) -> bool:
        if not isinstance(other, VolumeFrame):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.origin == other.origin
            and self.voxels.shape == other.voxels.shape
            and np.array_equal(self.voxels, other.voxels)
        )


@dataclass
class VolumeSequence:
    """Time-ordered stack of identically shaped frames."""

    frames: list[VolumeFrame]
    frame_period_ms: float = DEFAULT_FRAME_PERIOD_MS

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError("a sequence needs at least one frame")
        self.frame_period_ms = float(self.frame_period_ms)
        if self.frame_period_ms <= 0:
            raise ValueError("frame_period_ms must be positive")
        first = self.frames[0]
        for f in self.frames[1:]:
            if f.dims != first.dims or f.spacing != first.spacing or f.origin != first.origin:
                raise InconsistentGeometry("frames disagree on dims/spacing/origin")

    @property
    def nt(self) -> int:
        return len(self.frames)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.frames[0].dims

    def __eq__(self, other) -> bool:
        if not isinstance(other, VolumeSequence):
            return NotImplemented
        return (
            self.frame_period_ms == other.frame_period_ms
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )


def _split_header(data: bytes) -> tuple[list[str], bytes]:
    # Header is text lines (LF or CRLF) up to the first blank line.
    pos = 0
    lines: list[str] = []
    while True:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise UnsupportedField("header never terminated by a blank line")
        raw = data[pos:nl]
        pos = nl + 1
        if raw.endswith(b"\r"):
            raw = raw[:-1]
        if raw == b"":
            return lines, data[pos:]
        lines.append(raw.decode("latin-1"))


def _parse_fields(lines: list[str]) -> dict[str, str]:
    fields: dict[str, str] = {}
    for ln in lines:
        if ln.startswith("#"):
            continue
        if ":=" in ln:
            continue  # key/value pairs pass through unused
        if ":" not in ln:
            raise UnsupportedField(f"malformed header line: {ln!r}")
        key, value = ln.split(":", 1)
        fields[key.strip().lower()] = value.strip()
    return fields


def _ints(text: str, what: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise UnsupportedField(f"non-integer {what}: {text!r}") from exc


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split()]
    except ValueError as exc:
        raise UnsupportedField(f"non-numeric {what}: {text!r}") from exc


def _parse_vector(tok: str) -> list[float] | None:
    """One `space directions` entry: "(a,b,c)" or "none"."""
    if tok.lower() == "none":
        return None
    if not (tok.startswith("(") and tok.endswith(")")):
        raise UnsupportedField(f"bad direction vector: {tok!r}")
    try:
        return [float(p) for p in tok[1:-1].split(",")]
    except ValueError as exc:
        raise UnsupportedField(f"bad direction vector: {tok!r}") from exc


def _parse_directions(text: str) -> list[list[float] | None]:
    toks = re.findall(r"\([^)]*\)|none", text, flags=re.IGNORECASE)
    return [_parse_vector(t) for t in toks]


def _find_time_axis(dim: int, kinds: list[str] | None,
                    directions: list[list[float] | None] | None) -> int:
    candidates = set()
    if kinds is not None:
        candidates.update(i for i, k in enumerate(kinds) if k.lower() in ("list", "time"))
    if not candidates and directions is not None:
        candidates.update(i for i, d in enumerate(directions) if d is None)
    if len(candidates) != 1:
        raise NoTimeAxis(
            "dimension 4 needs exactly one list axis, found "
            f"{sorted(candidates) if candidates else 'none'}"
        )
    return candidates.pop()


def _decode_payload(body: bytes, encoding: str, expected: int) -> bytes:
    if encoding == "raw":
        payload = body
    else:
        try:
            payload = gzip.decompress(body)
        except (OSError, EOFError, zlib.error) as exc:
            raise SizeMismatch(f"gzip payload does not decompress: {exc}") from exc
    if len(payload) != expected:
        raise SizeMismatch(f"payload is {len(payload)} bytes, header declares {expected}")
    return payload


def _rescale_to_u8(arr: np.ndarray) -> np.ndarray:
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        return np.zeros(arr.shape, dtype=np.uint8)
    scaled = (arr.astype(np.float64) - lo) * (255.0 / (hi - lo))
    return np.rint(scaled).astype(np.uint8)


def parse_nrrd(data: bytes, data_dir: str | Path | None = None,
               default_period_ms: float = DEFAULT_FRAME_PERIOD_MS) -> VolumeSequence:
    """Parse NRRD bytes into a VolumeSequence.

    ``data_dir`` resolves a detached ``data file:`` payload; without it a
    detached file is rejected. Raises BadMagic, UnsupportedField,
    SizeMismatch or NoTimeAxis; never anything untyped, whatever the input.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("parse_nrrd wants bytes")
    data = bytes(data)
    nl = data.find(b"\n")
    first = data[:nl] if nl >= 0 else data
    if first.endswith(b"\r"):
        first = first[:-1]
    if not _MAGIC.match(first):
        raise BadMagic("not an NRRD stream")

    lines, body = _split_header(data)
    fields = _parse_fields(lines[1:])

    for req in ("dimension", "sizes", "type", "encoding"):
        if req not in fields:
            raise UnsupportedField(f"missing required field: {req}")

    dim_l = _ints(fields["dimension"], "dimension")
    if len(dim_l) != 1 or dim_l[0] not in (3, 4):
        raise UnsupportedField(f"dimension {fields['dimension']!r} not supported")
    dim = dim_l[0]

    sizes = _ints(fields["sizes"], "sizes")
    if len(sizes) != dim or any(s < 1 for s in sizes):
        raise UnsupportedField(f"sizes {fields['sizes']!r} inconsistent with dimension {dim}")

    type_name = fields["type"].lower()
    if type_name in _U8_TYPES:
        dtype, itemsize = np.dtype(np.uint8), 1
    elif type_name in _I16_TYPES or type_name in _U16_TYPES:
        endian = fields.get("endian", "little").lower()
        if endian not in ("little", "big"):
            raise UnsupportedField(f"endian {fields['endian']!r} not recognized")
        char = "i" if type_name in _I16_TYPES else "u"
        dtype = np.dtype(("<" if endian == "little" else ">") + char + "2")
        itemsize = 2
    else:
        raise UnsupportedField(f"scalar type {fields['type']!r} not supported")

    encoding = fields["encoding"].lower()
    if encoding == "gz":
        encoding = "gzip"
    if encoding not in ("raw", "gzip"):
        raise UnsupportedField(f"encoding {fields['encoding']!r} not supported")

    kinds = fields["kinds"].split() if "kinds" in fields else None
    if kinds is not None and len(kinds) != dim:
        raise UnsupportedField("kinds count does not match dimension")

    directions = None
    if "space directions" in fields:
        directions = _parse_directions(fields["space directions"])
        if len(directions) != dim:
            raise UnsupportedField("space directions count does not match dimension")

    spacings = None
    if "spacings" in fields:
        spacings = _floats(fields["spacings"], "spacings")
        if len(spacings) != dim:
            raise UnsupportedField("spacings count does not match dimension")

    if "data file" in fields:
        if data_dir is None:
            raise UnsupportedField("detached data file without a directory context")
        body = (Path(data_dir) / fields["data file"]).read_bytes()

    if dim == 4:
        t_axis = _find_time_axis(dim, kinds, directions)
    else:
        t_axis = None

    spatial = [i for i in range(dim) if i != t_axis]
    nx, ny, nz = (sizes[i] for i in spatial)
    nt = sizes[t_axis] if t_axis is not None else 1

    expected = nt * nx * ny * nz * itemsize
    payload = _decode_payload(body, encoding, expected)
    arr = np.frombuffer(payload, dtype=dtype)
    if itemsize == 2:
        arr = _rescale_to_u8(arr)
    # time-major, frame bytes x-fastest
    arr = arr.reshape(nt, nz, ny, nx)

    spacing = [1.0, 1.0, 1.0]
    period = float(default_period_ms)
    if spacings is not None:
        vals = [spacings[i] for i in spatial]
        if all(np.isfinite(v) and v > 0 for v in vals):
            spacing = vals
        if t_axis is not None:
            t_sp = spacings[t_axis]
            if np.isfinite(t_sp) and t_sp > 0:
                period = float(t_sp)
    elif directions is not None:
        mags = []
        for i in spatial:
            vec = directions[i]
            if vec is None:
                mags = None
                break
            mags.append(float(np.linalg.norm(vec)))
        if mags and all(m > 0 for m in mags):
            spacing = mags

    origin = [0.0, 0.0, 0.0]
    if "space origin" in fields:
        vec = _parse_vector(fields["space origin"])
        if vec is None or len(vec) != 3:
            raise UnsupportedField(f"bad space origin: {fields['space origin']!r}")
        origin = vec

    frames = [
        VolumeFrame(spacing=tuple(spacing), origin=tuple(origin), voxels=arr[t])
        for t in range(nt)
    ]
    return VolumeSequence(frames=frames, frame_period_ms=period)


def read_nrrd(path: str | Path,
              default_period_ms: float = DEFAULT_FRAME_PERIOD_MS) -> VolumeSequence:
    """Load one NRRD file; detached data resolves next to it."""
    p = Path(path)
    return parse_nrrd(p.read_bytes(), data_dir=p.parent, default_period_ms=default_period_ms)


def write_nrrd(seq: VolumeSequence, encoding: str = "raw") -> bytes:
    """Serialize a sequence as a dimension-4 NRRD (gzip payloads are
    emitted with a zeroed mtime, so identical inputs give identical bytes).
    The frame period rides on the list axis of `spacings`."""
    if encoding not in ("raw", "gzip"):
        raise ValueError(f"encoding must be raw or gzip, not {encoding!r}")
    nx, ny, nz = seq.dims
    sp = seq.frames[0].spacing
    org = seq.frames[0].origin
    header = (
        "NRRD0004\n"
        "dimension: 4\n"
        f"sizes: {seq.nt} {nx} {ny} {nz}\n"
        "type: uint8\n"
        f"encoding: {encoding}\n"
        "kinds: list domain domain domain\n"
        f"spacings: {seq.frame_period_ms!r} {sp[0]!r} {sp[1]!r} {sp[2]!r}\n"
        f"space origin: ({org[0]!r},{org[1]!r},{org[2]!r})\n"
        "\n"
    )
    payload = b"".join(f.voxels.tobytes() for f in seq.frames)
    if encoding == "gzip":
        payload = gzip.compress(payload, mtime=0)
    return header.encode("ascii") + payload


def load_frame_directory(paths: list[str | Path],
                         frame_period_ms: float = DEFAULT_FRAME_PERIOD_MS) -> VolumeSequence:
    """Assemble a sequence from single-frame NRRD files, in the given order.

    All files must agree on dims and spacing; the first file's origin is
    adopted for the whole sequence.
    """
    if not paths:
        raise ValueError("empty path list")
    frames: list[VolumeFrame] = []
    ref: VolumeFrame | None = None
    for p in paths:
        seq = read_nrrd(p)
        if seq.nt != 1:
            raise InconsistentGeometry(f"{p}: multi-frame file in a frame directory")
        frame = seq.frames[0]
        if ref is None:
            ref = frame
        else:
            if frame.dims != ref.dims:
                raise InconsistentGeometry(f"{p}: dims {frame.dims} != {ref.dims}")
            if frame.spacing != ref.spacing:
                raise InconsistentGeometry(f"{p}: spacing {frame.spacing} != {ref.spacing}")
            if frame.origin != ref.origin:
                frame = VolumeFrame(spacing=frame.spacing, origin=ref.origin,
                                    voxels=frame.voxels)
        frames.append(frame)
    return VolumeSequence(frames=frames, frame_period_ms=frame_period_ms)
