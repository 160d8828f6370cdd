"""Plane resampling of voxel frames.

A slice plane lives in volume space (mm): an origin plus two orthonormal
in-plane directions u, v. Pixel (i, j) samples the volume at
origin + i*pixel_mm*u + j*pixel_mm*v with trilinear interpolation, clamps
to [0, 255] and rounds nearest-even. Anything outside the voxel-center
bounding box reads as 0, the usual black surround of an ultrasound fan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .volume import VolumeFrame

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class SlicePlane:
    origin: tuple[float, float, float]
    u: tuple[float, float, float]
    v: tuple[float, float, float]
    width_px: int
    height_px: int
    pixel_mm: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "u", tuple(float(c) for c in self.u))
        object.__setattr__(self, "v", tuple(float(c) for c in self.v))
        u = np.array(self.u)
        v = np.array(self.v)
        if abs(np.linalg.norm(u) - 1.0) > _ORTHO_TOL or abs(np.linalg.norm(v) - 1.0) > _ORTHO_TOL:
            raise ValueError("u and v must be unit vectors")
        if abs(float(u @ v)) > _ORTHO_TOL:
            raise ValueError("u and v must be orthogonal")
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("plane raster must be at least 1x1")
        if self.pixel_mm <= 0:
            raise ValueError("pixel_mm must be positive")

    @property
    def normal(self) -> tuple[float, float, float]:
        n = np.cross(self.u, self.v)
        return (float(n[0]), float(n[1]), float(n[2]))


def make_plane(origin, u, v, width_px: int, height_px: int, pixel_mm: float) -> SlicePlane:
    """Build a plane from rough direction vectors: u is normalized, v is
    re-orthogonalized against u (Gram-Schmidt) and normalized."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ValueError("u must be nonzero")
    u = u / nu
    v = v - (v @ u) * u
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("v must be independent of u")
    v = v / nv
    return SlicePlane(origin=tuple(origin), u=tuple(u), v=tuple(v),
                      width_px=width_px, height_px=height_px, pixel_mm=pixel_mm)


@dataclass
class SliceImage:
    """Row-major 8-bit image; ``pixels`` has shape (height, width)."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width):
            raise ValueError("pixel buffer does not match width x height")

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, SliceImage):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.pixels, other.pixels
        )


def _sample_grid(frame: VolumeFrame, px: np.ndarray, py: np.ndarray,
                 pz: np.ndarray) -> np.ndarray:
    """Trilinear interpolation at arbitrary mm points (vectorized).
    Out-of-bounds points come back exactly 0."""
    nx, ny, nz = frame.dims
    sx, sy, sz = frame.spacing
    ox, oy, oz = frame.origin
    qx = (np.asarray(px, dtype=np.float64) - ox) / sx
    qy = (np.asarray(py, dtype=np.float64) - oy) / sy
    qz = (np.asarray(pz, dtype=np.float64) - oz) / sz

    inside = (
        (qx >= 0.0) & (qx <= nx - 1)
        & (qy >= 0.0) & (qy <= ny - 1)
        & (qz >= 0.0) & (qz <= nz - 1)
    )
    # clamp before indexing so out-of-range points gather something valid
    qx = np.clip(qx, 0.0, nx - 1)
    qy = np.clip(qy, 0.0, ny - 1)
    qz = np.clip(qz, 0.0, nz - 1)

    ix0 = np.floor(qx).astype(np.intp)
    iy0 = np.floor(qy).astype(np.intp)
    iz0 = np.floor(qz).astype(np.intp)
    fx = qx - ix0
    fy = qy - iy0
    fz = qz - iz0
    ix1 = np.minimum(ix0 + 1, nx - 1)
    iy1 = np.minimum(iy0 + 1, ny - 1)
    iz1 = np.minimum(iz0 + 1, nz - 1)

    vox = frame.voxels
    c000 = vox[iz0, iy0, ix0].astype(np.float64)
    c100 = vox[iz0, iy0, ix1].astype(np.float64)
    c010 = vox[iz0, iy1, ix0].astype(np.float64)
    c110 = vox[iz0, iy1, ix1].astype(np.float64)
    c001 = vox[iz1, iy0, ix0].astype(np.float64)
    c101 = vox[iz1, iy0, ix1].astype(np.float64)
    c011 = vox[iz1, iy1, ix0].astype(np.float64)
    c111 = vox[iz1, iy1, ix1].astype(np.float64)

    lo = (c000 * (1 - fx) + c100 * fx) * (1 - fy) + (c010 * (1 - fx) + c110 * fx) * fy
    hi = (c001 * (1 - fx) + c101 * fx) * (1 - fy) + (c011 * (1 - fx) + c111 * fx) * fy
    out = lo * (1 - fz) + hi * fz
    return np.where(inside, out, 0.0)


def sample_trilinear(frame: VolumeFrame, p) -> float:
    """Interpolated intensity at mm point p (0 outside the volume)."""
    px, py, pz = (float(c) for c in p)
    return float(_sample_grid(frame, np.array([px]), np.array([py]), np.array([pz]))[0])


def slice_frame(frame: VolumeFrame, plane: SlicePlane) -> SliceImage:
    """Resample the frame along the plane into an 8-bit image."""
    w, h = plane.width_px, plane.height_px
    i = np.arange(w, dtype=np.float64)[None, :]
    j = np.arange(h, dtype=np.float64)[:, None]
    mm = plane.pixel_mm
    ox, oy, oz = plane.origin
    ux, uy, uz = plane.u
    vx, vy, vz = plane.v
    px = ox + mm * (i * ux + j * vx)
    py = oy + mm * (i * uy + j * vy)
    pz = oz + mm * (i * uz + j * vz)
    vals = _sample_grid(frame, px, py, pz)
    pixels = np.rint(np.clip(vals, 0.0, 255.0)).astype(np.uint8)
    return SliceImage(width=w, height=h, pixels=pixels)


def tilted_plane(base: SlicePlane, tilt_deg: float) -> SlicePlane:
    """Rotate v (and with it the plane normal) about u through the plane
    origin; u itself stays put. Positive angles follow the right-hand rule
    around u."""
    if not math.isfinite(tilt_deg):
        raise ValueError("tilt angle must be finite")
    rad = math.radians(tilt_deg)
    u = np.array(base.u)
    v = np.array(base.v)
    v2 = v * math.cos(rad) + np.cross(u, v) * math.sin(rad)
    v2 = v2 / np.linalg.norm(v2)
    return SlicePlane(origin=base.origin, u=base.u, v=tuple(v2),
                      width_px=base.width_px, height_px=base.height_px,
                      pixel_mm=base.pixel_mm)


def write_pgm(img: SliceImage) -> bytes:
    """Binary PGM (P5, maxval 255)."""
    return f"P5\n{img.width} {img.height}\n255\n".encode("ascii") + img.tobytes()
