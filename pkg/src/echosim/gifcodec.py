"""Animated GIF89a encoding and decoding.

The profile is deliberately narrow and matches what the asset pipeline
produces: one global 256-entry color table, full-frame images at (0,0),
no interlacing, no transparency, a Netscape extension that loops forever,
and LZW image data with minimum code size 8. The decoder rejects anything
outside that profile instead of guessing at it. Grayscale data encodes
losslessly because the palette is the identity ramp.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .slicer import slice_frame, SlicePlane
from .volume import VolumeSequence

_NETSCAPE = b"\x21\xff\x0bNETSCAPE2.0\x03\x01\x00\x00\x00"
_MAX_CODE = 4096


class GifError(Exception):
    """Base for codec failures."""


class BadMagic(GifError):
    """Not a GIF89a stream (GIF87a has no animation extensions)."""


class TruncatedStream(GifError):
    """Stream ended before the structure it promised."""


class UnsupportedFeature(GifError):
    """Well-formed GIF using something outside the supported profile."""


def grayscale_palette() -> np.ndarray:
    """Identity ramp: entry i -> (i, i, i)."""
    ramp = np.arange(256, dtype=np.uint8)
    return np.stack([ramp, ramp, ramp], axis=1)


@dataclass
class GifAnimation:
    """Looping indexed animation. Frames are (height, width) uint8 index
    images sharing one 256-entry palette; playback loops forever."""

    width: int
    height: int
    frames: list[np.ndarray]
    palette: np.ndarray
    delay_cs: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("frame size must be at least 1x1")
        if not self.frames:
            raise ValueError("an animation needs at least one frame")
        self.frames = [np.ascontiguousarray(f, dtype=np.uint8) for f in self.frames]
        for f in self.frames:
            if f.shape != (self.height, self.width):
                raise ValueError("all frames must be height x width")
        self.palette = np.ascontiguousarray(self.palette, dtype=np.uint8)
        if self.palette.shape != (256, 3):
            raise ValueError("palette must hold exactly 256 RGB entries")
        self.delay_cs = int(self.delay_cs)
        if self.delay_cs < 1:
            raise ValueError("delay_cs must be >= 1")

    @property
    def nt(self) -> int:
        return len(self.frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GifAnimation):
            return NotImplemented
        return (
            (self.width, self.height, self.delay_cs) == (other.width, other.height, other.delay_cs)
            and len(self.frames) == len(other.frames)
            and all(np.array_equal(a, b) for a, b in zip(self.frames, other.frames))
            and np.array_equal(self.palette, other.palette)
        )


def _lzw_encode(data: bytes, min_code_size: int = 8) -> bytes:
    clear_code = 1 << min_code_size
    end_code = clear_code + 1
    out = bytearray()
    append = out.append
    acc = 0
    nbits = 0
    code_size = min_code_size + 1
    grow_at = 1 << code_size
    next_code = end_code + 1
    table: dict[int, int] = {}
    get = table.get

    acc |= clear_code << nbits
    nbits += code_size
    while nbits >= 8:
        append(acc & 0xFF)
        acc >>= 8
        nbits -= 8

    if data:
        prev = data[0]
        for b in data[1:]:
            key = (prev << 8) | b
            nxt = get(key)
            if nxt is not None:
                prev = nxt
                continue
            acc |= prev << nbits
            nbits += code_size
            while nbits >= 8:
                append(acc & 0xFF)
                acc >>= 8
                nbits -= 8
            if next_code < _MAX_CODE:
                table[key] = next_code
                # width grows once the just-assigned index fills the range
                if next_code == grow_at:
                    code_size += 1
                    grow_at <<= 1
                next_code += 1
            else:
                acc |= clear_code << nbits
                nbits += code_size
                while nbits >= 8:
                    append(acc & 0xFF)
                    acc >>= 8
                    nbits -= 8
                table.clear()
                get = table.get
                code_size = min_code_size + 1
                grow_at = 1 << code_size
                next_code = end_code + 1
            prev = b
        acc |= prev << nbits
        nbits += code_size
        while nbits >= 8:
            append(acc & 0xFF)
            acc >>= 8
            nbits -= 8

    acc |= end_code << nbits
    nbits += code_size
    while nbits >= 8:
        append(acc & 0xFF)
        acc >>= 8
        nbits -= 8
    if nbits:
        append(acc & 0xFF)
    return bytes(out)


def _lzw_decode(blob: bytes, min_code_size: int, max_pixels: int) -> bytes:
    clear_code = 1 << min_code_size
    end_code = clear_code + 1
    roots = [bytes([i]) for i in range(clear_code)]

    acc = 0
    nbits = 0
    pos = 0
    n = len(blob)

    code_size = min_code_size + 1
    strings = roots + [b"", b""]
    prev = -1
    out = bytearray()

    while True:
        while nbits < code_size:
            if pos >= n:
                raise TruncatedStream("LZW data ended without an end-of-information code")
            acc |= blob[pos] << nbits
            pos += 1
            nbits += 8
        code = acc & ((1 << code_size) - 1)
        acc >>= code_size
        nbits -= code_size

        if code == clear_code:
            code_size = min_code_size + 1
            strings = roots + [b"", b""]
            prev = -1
            continue
        if code == end_code:
            return bytes(out)

        if prev < 0:
            if code >= clear_code:
                raise GifError("corrupt LZW stream: first code after clear is not a literal")
            entry = strings[code]
        else:
            if code < len(strings) and code != end_code:
                entry = strings[code]
            elif code == len(strings):
                entry = strings[prev] + strings[prev][:1]
            else:
                raise GifError(f"corrupt LZW stream: code {code} out of range")
            if len(strings) < _MAX_CODE:
                strings.append(strings[prev] + entry[:1])
                if len(strings) == (1 << code_size) and code_size < 12:
                    code_size += 1
        out += entry
        if len(out) > max_pixels:
            raise GifError("corrupt LZW stream: more pixels than the frame holds")
        prev = code


def _sub_blocks(payload: bytes) -> bytes:
    out = bytearray()
    for i in range(0, len(payload), 255):
        chunk = payload[i:i + 255]
        out.append(len(chunk))
        out += chunk
    out.append(0)
    return bytes(out)


def encode_gif(anim: GifAnimation) -> bytes:
    """Serialize to GIF89a bytes. Output is deterministic for equal input."""
    out = bytearray(b"GIF89a")
    out += struct.pack("<HH", anim.width, anim.height)
    # global color table present, 8 bits/channel, 256 entries
    out += b"\xf7\x00\x00"
    out += anim.palette.tobytes()
    out += _NETSCAPE
    gce = b"\x21\xf9\x04\x00" + struct.pack("<H", anim.delay_cs) + b"\x00\x00"
    descriptor = b"\x2c" + struct.pack("<HHHH", 0, 0, anim.width, anim.height) + b"\x00"
    for frame in anim.frames:
        out += gce
        out += descriptor
        out.append(8)
        out += _sub_blocks(_lzw_encode(frame.tobytes()))
    out.append(0x3B)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedStream(f"needed {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def byte(self) -> int:
        return self.take(1)[0]

    def sub_block_stream(self) -> bytes:
        out = bytearray()
        while True:
            size = self.byte()
            if size == 0:
                return bytes(out)
            out += self.take(size)


def decode_gif(data: bytes) -> GifAnimation:
    """Decode GIF89a bytes produced by this profile.

    Local color tables, interlacing, partial frames and finite loop counts
    raise UnsupportedFeature; premature end of data raises TruncatedStream;
    anything that is not GIF89a at all raises BadMagic. Per-frame delays are
    collapsed to the first frame's value (the encoder only writes uniform
    delays); a delay of 0 reads back as the floor value 1.
    """
    if len(data) >= 6 and data[:6] == b"GIF87a":
        raise BadMagic("GIF87a carries no animation extensions")
    if len(data) < 6 or data[:6] != b"GIF89a":
        raise BadMagic("not a GIF89a stream")
    r = _Reader(data)
    r.pos = 6
    width, height = struct.unpack("<HH", r.take(4))
    flags = r.byte()
    r.take(2)  # background index, aspect ratio
    if not flags & 0x80:
        raise UnsupportedFeature("no global color table")
    gct_len = 2 << (flags & 0x07)
    gct = np.frombuffer(r.take(3 * gct_len), dtype=np.uint8).reshape(gct_len, 3)
    palette = np.zeros((256, 3), dtype=np.uint8)
    palette[:gct_len] = gct

    frames: list[np.ndarray] = []
    delay_cs: int | None = None
    while True:
        block = r.byte()
        if block == 0x3B:
            break
        if block == 0x21:
            label = r.byte()
            if label == 0xF9:
                gce = r.sub_block_stream()
                if len(gce) >= 3 and delay_cs is None:
                    delay_cs = int.from_bytes(gce[1:3], "little")
            elif label == 0xFF:
                app = r.sub_block_stream()
                if app[:11] == b"NETSCAPE2.0" and len(app) >= 14:
                    loops = int.from_bytes(app[12:14], "little")
                    if loops != 0:
                        raise UnsupportedFeature(f"finite loop count {loops}")
            else:
                r.sub_block_stream()
        elif block == 0x2C:
            left, top, w, h = struct.unpack("<HHHH", r.take(8))
            img_flags = r.byte()
            if img_flags & 0x80:
                raise UnsupportedFeature("local color table")
            if img_flags & 0x40:
                raise UnsupportedFeature("interlaced image")
            if (left, top) != (0, 0) or (w, h) != (width, height):
                raise UnsupportedFeature("partial-frame image")
            mcs = r.byte()
            if not 2 <= mcs <= 8:
                raise UnsupportedFeature(f"LZW minimum code size {mcs}")
            pixels = _lzw_decode(r.sub_block_stream(), mcs, w * h)
            if len(pixels) < w * h:
                raise TruncatedStream("image data ended before the frame was full")
            frames.append(np.frombuffer(pixels, dtype=np.uint8).reshape(h, w))
        else:
            raise UnsupportedFeature(f"unknown block 0x{block:02x}")

    if not frames:
        raise UnsupportedFeature("no image data")
    return GifAnimation(width=width, height=height, frames=frames,
                        palette=palette, delay_cs=max(1, delay_cs or 1))


def sequence_to_gif(seq: VolumeSequence, plane: SlicePlane,
                    delay_cs: int | None = None) -> GifAnimation:
    """Slice every frame of the sequence along one plane and package the
    result as a looping grayscale animation. The delay defaults to the
    sequence frame period (rounded to centiseconds, floored at 1)."""
    if delay_cs is None:
        delay_cs = max(1, round(seq.frame_period_ms / 10))
    frames = [slice_frame(f, plane).pixels for f in seq.frames]
    return GifAnimation(width=plane.width_px, height=plane.height_px,
                        frames=frames, palette=grayscale_palette(),
                        delay_cs=delay_cs)
