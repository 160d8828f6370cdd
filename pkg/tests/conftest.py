import numpy as np
import pytest

from echosim.telemetry import ProbeSample, contact_hall, format_line
from echosim.volume import VolumeFrame, VolumeSequence


def random_sequence(rng: np.random.RandomState,
                    max_dim: int = 16, max_nt: int = 8) -> VolumeSequence:
    nx = int(rng.randint(1, max_dim + 1))
    ny = int(rng.randint(1, max_dim + 1))
    nz = int(rng.randint(1, max_dim + 1))
    nt = int(rng.randint(1, max_nt + 1))
    spacing = tuple(float(s) for s in rng.uniform(0.2, 3.0, size=3))
    origin = tuple(float(o) for o in rng.uniform(-10.0, 10.0, size=3))
    frames = [
        VolumeFrame(spacing=spacing, origin=origin,
                    voxels=rng.randint(0, 256, size=(nz, ny, nx)).astype(np.uint8))
        for _ in range(nt)
    ]
    return VolumeSequence(frames=frames,
                          frame_period_ms=float(rng.uniform(10.0, 200.0)))


def hall_for(contact_index: int | None) -> tuple[int, int, int, int, int]:
    """Five hall counts with at most one sensor in contact."""
    return tuple(contact_hall(i == contact_index) for i in range(5))


def script_lines(phases, rate_hz: float = 50.0, start_seq: int = 0) -> list[str]:
    """Wire lines from (duration_ms, yaw, pitch, contact_index|None) phases."""
    lines = []
    seq = start_seq
    for duration_ms, yaw, pitch, contact in phases:
        for _ in range(int(round(duration_ms * rate_hz / 1000.0))):
            lines.append(format_line(ProbeSample(
                seq=seq, yaw_deg=yaw, pitch_deg=pitch, roll_deg=0.0,
                hall_raw=hall_for(contact))))
            seq += 1
    return lines


@pytest.fixture
def rng() -> np.random.RandomState:
    return np.random.RandomState(20260822)
