"""Reference implementations for the numeric contracts, written the slow
and obvious way on purpose. Tests compare the real code against these;
none of this is imported by the package itself.
"""

from __future__ import annotations

import math

import numpy as np


def trilinear_oracle(voxels: np.ndarray,
                     spacing: tuple[float, float, float],
                     origin: tuple[float, float, float],
                     point: tuple[float, float, float]) -> float:
    """Explicit 8-corner weighted sum. voxels is indexed [z, y, x]; voxel
    centers sit at origin + index * spacing; anything outside the center
    bounding box reads as 0."""
    nz, ny, nx = voxels.shape
    q = [(point[i] - origin[i]) / spacing[i] for i in range(3)]
    qx, qy, qz = q
    if not (0.0 <= qx <= nx - 1 and 0.0 <= qy <= ny - 1 and 0.0 <= qz <= nz - 1):
        return 0.0
    x0, y0, z0 = int(math.floor(qx)), int(math.floor(qy)), int(math.floor(qz))
    fx, fy, fz = qx - x0, qy - y0, qz - z0
    total = 0.0
    for dz in (0, 1):
        for dy in (0, 1):
            for dx in (0, 1):
                xi = min(x0 + dx, nx - 1)
                yi = min(y0 + dy, ny - 1)
                zi = min(z0 + dz, nz - 1)
                w = ((fx if dx else 1.0 - fx)
                     * (fy if dy else 1.0 - fy)
                     * (fz if dz else 1.0 - fz))
                total += w * float(voxels[zi, yi, xi])
    return total


def nrrd_frame_oracle(payload: bytes, nt: int, nx: int, ny: int, nz: int,
                      t: int) -> np.ndarray:
    """Pull frame t out of a raw uint8 payload by index arithmetic alone:
    frames are consecutive blocks, x varies fastest, then y, then z.
    Returns a [z, y, x] array."""
    frame = np.zeros((nz, ny, nx), dtype=np.uint8)
    per_frame = nx * ny * nz
    base = t * per_frame
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                frame[z, y, x] = payload[base + z * nx * ny + y * nx + x]
    return frame


def wrap_oracle(x: float) -> float:
    """Wrap into (-180, 180] by repeated 360 shifts."""
    while x > 180.0:
        x -= 360.0
    while x <= -180.0:
        x += 360.0
    return x
