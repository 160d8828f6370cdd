"""Probe telemetry: wire protocol, calibration, contact thresholding.

One sample per line:

    T,<seq>,<yaw>,<pitch>,<roll>,<h1>,<h2>,<h3>,<h4>,<h5>\\n

Angles are degrees with two decimals in canonical form (the parser takes
any finite decimal), hall channels are raw 10-bit ADC counts. The device
never timestamps; consumers know the nominal sample rate (50 Hz default)
and watch the sequence counter for gaps. Contact detection is bipolar
around the ADC midpoint because the magnet can present either pole.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator

DEFAULT_RATE_HZ = 50.0
DEFAULT_WINDOW_S = 20.0
DEFAULT_STILLNESS_TOL_DEG = 1.0
HALL_BASELINE = 512
HALL_DELTA = 100


class TelemetryError(Exception):
    pass


class MalformedLine(TelemetryError):
    """Line does not match the wire grammar."""


class NotStill(TelemetryError):
    """Probe moved during the calibration window."""


class InsufficientSamples(TelemetryError):
    """Calibration window held fewer than two samples."""


@dataclass(frozen=True)
class ProbeSample:
    seq: int
    yaw_deg: float
    pitch_deg: float
    roll_deg: float
    hall_raw: tuple[int, int, int, int, int]


@dataclass(frozen=True)
class Calibration:
    yaw_off: float = 0.0
    pitch_off: float = 0.0
    roll_off: float = 0.0
    window_s: float = DEFAULT_WINDOW_S


@dataclass(frozen=True)
class ProbePose:
    yaw_deg: float
    pitch_deg: float
    roll_deg: float
    contacts: tuple[bool, bool, bool, bool, bool]


IDENTITY_CALIBRATION = Calibration()


def wrap_deg(x: float) -> float:
    """Wrap any finite angle into (-180, 180]."""
    w = x % 360.0
    if w > 180.0:
        w -= 360.0
    return w


def parse_line(line: str | bytes) -> ProbeSample:
    """Parse one wire line; trailing whitespace is tolerated. Everything
    that does not fit the grammar raises MalformedLine, nothing else."""
    if isinstance(line, (bytes, bytearray)):
        line = bytes(line).decode("latin-1")
    text = line.rstrip()
    parts = text.split(",")
    if len(parts) != 10 or parts[0] != "T":
        raise MalformedLine(f"bad field layout: {text[:60]!r}")
    try:
        seq = int(parts[1])
        angles = [float(p) for p in parts[2:5]]
        hall = [int(p) for p in parts[5:10]]
    except ValueError as exc:
        raise MalformedLine(f"non-numeric field: {text[:60]!r}") from exc
    if seq < 0:
        raise MalformedLine(f"negative seq: {seq}")
    if not all(math.isfinite(a) for a in angles):
        raise MalformedLine(f"non-finite angle: {text[:60]!r}")
    if not all(0 <= h <= 1023 for h in hall):
        raise MalformedLine(f"hall value outside 10-bit range: {text[:60]!r}")
    return ProbeSample(seq=seq, yaw_deg=angles[0], pitch_deg=angles[1],
                       roll_deg=angles[2], hall_raw=tuple(hall))


def format_line(s: ProbeSample) -> str:
    """Canonical wire form, newline included."""
    return (
        f"T,{s.seq},{s.yaw_deg:.2f},{s.pitch_deg:.2f},{s.roll_deg:.2f},"
        f"{s.hall_raw[0]},{s.hall_raw[1]},{s.hall_raw[2]},{s.hall_raw[3]},{s.hall_raw[4]}\n"
    )


def samples_from_lines(lines: Iterable[str | bytes],
                       skip_malformed: bool = False) -> Iterator[ProbeSample]:
    """Parse a line stream (file, serial port, whatever). Blank lines are
    ignored; malformed ones raise unless skip_malformed asks otherwise."""
    for line in lines:
        stripped = line.strip() if isinstance(line, str) else bytes(line).strip()
        if not stripped:
            continue
        try:
            yield parse_line(line)
        except MalformedLine:
            if not skip_malformed:
                raise


def monitor_gaps(samples: Iterable[ProbeSample]) -> Iterator[tuple[ProbeSample, int]]:
    """Yield (sample, dropped) where dropped counts seq values skipped
    since the previous sample."""
    last: int | None = None
    for s in samples:
        dropped = 0 if last is None else max(0, s.seq - last - 1)
        last = s.seq
        yield s, dropped


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def calibrate(samples: Iterable[ProbeSample],
              window_s: float = DEFAULT_WINDOW_S,
              stillness_tol_deg: float = DEFAULT_STILLNESS_TOL_DEG,
              sample_rate_hz: float = DEFAULT_RATE_HZ) -> Calibration:
    """Average the orientation over a still window to get per-axis offsets.

    The window length in samples comes from the nominal rate, since the wire
    carries no timestamps. Raises NotStill when any axis wanders beyond
    stillness_tol_deg (standard deviation), InsufficientSamples below two.
    """
    count = max(2, int(round(window_s * sample_rate_hz)))
    window = list(islice(iter(samples), count))
    if len(window) < 2:
        raise InsufficientSamples(f"got {len(window)} samples, need at least 2")
    offsets = []
    for axis in ("yaw_deg", "pitch_deg", "roll_deg"):
        mean, std = _mean_std([getattr(s, axis) for s in window])
        if std > stillness_tol_deg:
            raise NotStill(f"{axis} moved during calibration (std {std:.2f} deg)")
        offsets.append(mean)
    return Calibration(yaw_off=offsets[0], pitch_off=offsets[1], roll_off=offsets[2],
                       window_s=window_s)


def to_pose(s: ProbeSample, cal: Calibration = IDENTITY_CALIBRATION,
            baseline: int = HALL_BASELINE, delta: int = HALL_DELTA) -> ProbePose:
    """Apply calibration offsets, wrap the angles, threshold the contacts."""
    return ProbePose(
        yaw_deg=wrap_deg(s.yaw_deg - cal.yaw_off),
        pitch_deg=wrap_deg(s.pitch_deg - cal.pitch_off),
        roll_deg=wrap_deg(s.roll_deg - cal.roll_off),
        contacts=tuple(abs(h - baseline) >= delta for h in s.hall_raw),
    )


def contact_hall(active: bool) -> int:
    """A hall count that thresholds to the given contact state."""
    return HALL_BASELINE + 311 if active else HALL_BASELINE


def scripted_device(script: list[tuple[float, ProbeSample]],
                    rate_hz: float = DEFAULT_RATE_HZ,
                    start_seq: int = 0) -> Iterator[ProbeSample]:
    """Emit samples following (duration_ms, template) steps at a fixed rate.

    Each step contributes round(duration_ms * rate / 1000) samples, so
    concatenated scripts produce concatenated streams. The template's seq
    is ignored; emission numbers samples consecutively from start_seq.
    """
    if not script:
        raise ValueError("empty script")
    seq = start_seq
    for duration_ms, template in script:
        n = int(round(duration_ms * rate_hz / 1000.0))
        for _ in range(n):
            yield ProbeSample(seq=seq, yaw_deg=template.yaw_deg,
                              pitch_deg=template.pitch_deg,
                              roll_deg=template.roll_deg,
                              hall_raw=template.hall_raw)
            seq += 1


def load_script(path: str | Path) -> list[tuple[float, ProbeSample]]:
    """Script file: a JSON list of steps, each
    {"duration_ms": .., "yaw": .., "pitch": .., "roll": .., "hall": [5 ints]};
    roll defaults to 0 and hall to all-baseline."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise ValueError("script must be a JSON list of steps")
    steps: list[tuple[float, ProbeSample]] = []
    for i, step in enumerate(raw):
        if not isinstance(step, dict):
            raise ValueError(f"step {i} is not an object")
        try:
            duration = float(step["duration_ms"])
            yaw = float(step["yaw"])
            pitch = float(step["pitch"])
            roll = float(step.get("roll", 0.0))
            hall = [int(h) for h in step.get("hall", [HALL_BASELINE] * 5)]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"step {i} malformed: {exc}") from exc
        if duration <= 0:
            raise ValueError(f"step {i}: duration_ms must be positive")
        if len(hall) != 5 or not all(0 <= h <= 1023 for h in hall):
            raise ValueError(f"step {i}: hall needs five 10-bit values")
        steps.append((duration, ProbeSample(seq=0, yaw_deg=yaw, pitch_deg=pitch,
                                            roll_deg=roll, hall_raw=tuple(hall))))
    if not steps:
        raise ValueError("script has no steps")
    return steps
