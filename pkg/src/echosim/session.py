"""The training state machine.

A session targets one acoustic window and variant. Progress is staged:
1/3 for resting the probe on the right sensor (and only that one), 2/3 for
aligning the notch with the window's clock direction, 3/3 for holding the
target tilt. The displayed stage ratchets within an attempt; completion
additionally needs every predicate to hold for an uninterrupted dwell.

Tilt is the magnitude of calibrated pitch: the manikin lies supine and
calibration happens probe-vertical, so pitch measures angulation away from
the skin normal and its sign (which way the tail leans) is not graded.

Feedback is a small set of machine-checkable codes. Stage advances append
one event per stage crossed. Wrong-sensor contact fires once per episode.
Tilt coaching (TILT_UNDERSHOT / TILT_OVERSHOT) compares the held tilt with
the target band - the Table values for a Tilt target, the +/-tol band for a
Normal one - and only fires after the mis-tilt has been held a full dwell,
so passing through low tilt on the way to the target stays silent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .telemetry import Calibration, ProbePose, ProbeSample, to_pose, wrap_deg

DEFAULT_TOL_DEG = 5.0
DEFAULT_DWELL_MS = 500.0


class View(str, Enum):
    APICAL = "Apical"
    PLAX = "PLAX"
    PSAX = "PSAX"
    SUBCOSTAL = "Subcostal"
    SUPRASTERNAL = "Suprasternal"


class Variant(str, Enum):
    NORMAL = "Normal"
    TILT = "Tilt"


class TiltClass(str, Enum):
    NORMAL_VIEW = "NormalView"
    UNDERSHOT = "Undershot"
    TILT_VIEW = "TiltView"
    OVERSHOT = "Overshot"


class FeedbackCode(str, Enum):
    WRONG_LOCATION = "WRONG_LOCATION"
    LOCATION_OK = "LOCATION_OK"
    NOTCH_OK = "NOTCH_OK"
    TILT_UNDERSHOT = "TILT_UNDERSHOT"
    TILT_OVERSHOT = "TILT_OVERSHOT"
    VIEW_ACQUIRED = "VIEW_ACQUIRED"


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class ViewSpec:
    view: View
    variant: Variant
    notch_clock: int
    tilt_lo_deg: float
    tilt_hi_deg: float
    sensor_index: int

    def __post_init__(self) -> None:
        if not 1 <= self.notch_clock <= 12:
            raise OutOfRange(f"notch_clock {self.notch_clock} outside 1..12")
        if not self.tilt_lo_deg < self.tilt_hi_deg:
            raise ValueError("tilt_lo_deg must be below tilt_hi_deg")
        if not 0 <= self.sensor_index <= 4:
            raise OutOfRange(f"sensor_index {self.sensor_index} outside 0..4")


def _table(view: View, clock: int, lo: float, hi: float, sensor: int):
    return {
        (view, variant): ViewSpec(view=view, variant=variant, notch_clock=clock,
                                  tilt_lo_deg=lo, tilt_hi_deg=hi, sensor_index=sensor)
        for variant in Variant
    }


# The five standard windows: notch clock direction, tilt band, sensor slot.
DEFAULT_SPECS: dict[tuple[View, Variant], ViewSpec] = {
    **_table(View.APICAL, 3, 5.0, 10.0, 0),
    **_table(View.PLAX, 11, 5.0, 10.0, 1),
    **_table(View.PSAX, 1, 5.0, 10.0, 2),
    **_table(View.SUBCOSTAL, 3, 40.0, 45.0, 3),
    **_table(View.SUPRASTERNAL, 1, 5.0, 10.0, 4),
}

DEFAULT_SENSORS: dict[View, int] = {
    view: DEFAULT_SPECS[(view, Variant.TILT)].sensor_index for view in View
}


def view_spec(view: View | str, variant: Variant | str) -> ViewSpec:
    return DEFAULT_SPECS[(View(view), Variant(variant))]


def load_view_specs(path: str | Path) -> dict[tuple[View, Variant], ViewSpec]:
    """Read a spec table from JSON: a list of objects with the ViewSpec
    field names. Entries replace the built-in defaults per (view, variant)."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise ValueError("view spec file must be a JSON list")
    table = dict(DEFAULT_SPECS)
    for i, row in enumerate(raw):
        try:
            spec = ViewSpec(view=View(row["view"]), variant=Variant(row["variant"]),
                            notch_clock=int(row["notch_clock"]),
                            tilt_lo_deg=float(row["tilt_lo_deg"]),
                            tilt_hi_deg=float(row["tilt_hi_deg"]),
                            sensor_index=int(row["sensor_index"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"view spec row {i} malformed: {exc}") from exc
        table[(spec.view, spec.variant)] = spec
    return table


@dataclass(frozen=True)
class QuizItem:
    id: str
    prompt: str
    options: tuple[str, ...]
    answer_index: int
    explanation: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "options", tuple(self.options))
        if not 0 <= self.answer_index < len(self.options):
            raise OutOfRange("answer_index outside options")


@dataclass(frozen=True)
class FeedbackEvent:
    t_ms: float
    code: FeedbackCode


@dataclass
class SessionState:
    target: ViewSpec
    level: int = 2
    stage: int = 0
    live_stage: int = 0
    dwell_ms_accum: float = 0.0
    tilt_class: Optional[TiltClass] = None
    completed: bool = False
    feedback: list[FeedbackEvent] = field(default_factory=list)
    elapsed_ms: float = 0.0
    # edge/debounce bookkeeping, reset with each attempt
    wrong_location_active: bool = False
    guidance_code: Optional[FeedbackCode] = None
    guidance_ms: float = 0.0
    guidance_fired: bool = False


def new_session(target: ViewSpec, level: int = 2) -> SessionState:
    return SessionState(target=target, level=level)


def clock_to_deg(hour: int) -> float:
    """Clock hour to yaw degrees, clockwise from 12 o'clock = 0."""
    if isinstance(hour, bool) or not isinstance(hour, int):
        raise OutOfRange(f"clock hour must be an integer, got {hour!r}")
    if not 1 <= hour <= 12:
        raise OutOfRange(f"clock hour {hour} outside 1..12")
    return float((hour % 12) * 30)


def location_ok(pose: ProbePose, spec: ViewSpec) -> bool:
    """True only when the target sensor, and no other, reports contact."""
    return pose.contacts[spec.sensor_index] and sum(pose.contacts) == 1


def notch_ok(pose: ProbePose, spec: ViewSpec, tol_deg: float = DEFAULT_TOL_DEG) -> bool:
    return abs(wrap_deg(pose.yaw_deg - clock_to_deg(spec.notch_clock))) <= tol_deg


def classify_tilt(tilt_deg: float, spec: ViewSpec,
                  tol_deg: float = DEFAULT_TOL_DEG) -> TiltClass:
    """Partition tilt magnitude into the four display classes. The sign of
    the input is discarded, which keeps the partition total."""
    m = abs(tilt_deg)
    if m <= tol_deg:
        return TiltClass.NORMAL_VIEW
    if spec.tilt_lo_deg <= m <= spec.tilt_hi_deg:
        return TiltClass.TILT_VIEW
    if m < spec.tilt_lo_deg:
        return TiltClass.UNDERSHOT
    return TiltClass.OVERSHOT


def _target_band(spec: ViewSpec, tol_deg: float) -> tuple[float, float]:
    if spec.variant is Variant.TILT:
        return spec.tilt_lo_deg, spec.tilt_hi_deg
    return 0.0, tol_deg


def step(state: SessionState, pose: ProbePose, dt_ms: float,
         dwell_ms: float = DEFAULT_DWELL_MS,
         tol_deg: float = DEFAULT_TOL_DEG) -> SessionState:
    """Advance the session by one pose sample spanning dt_ms.

    Mutates and returns the given state (single writer). Predicates are
    conjunctive in order: a correct tilt with no contact is still stage 0.
    """
    spec = state.target
    state.elapsed_ms += dt_ms
    t = state.elapsed_ms

    loc = location_ok(pose, spec)
    notch = loc and notch_ok(pose, spec, tol_deg)
    tilt = abs(pose.pitch_deg)
    cls = classify_tilt(tilt, spec, tol_deg)
    wanted = TiltClass.TILT_VIEW if spec.variant is Variant.TILT else TiltClass.NORMAL_VIEW
    live = 3 if (notch and cls is wanted) else 2 if notch else 1 if loc else 0

    state.live_stage = live
    state.tilt_class = cls

    wrong = any(pose.contacts) and not loc
    if wrong and not state.wrong_location_active:
        state.feedback.append(FeedbackEvent(t, FeedbackCode.WRONG_LOCATION))
    state.wrong_location_active = wrong

    if live > state.stage:
        for s in range(state.stage + 1, live + 1):
            code = (FeedbackCode.LOCATION_OK, FeedbackCode.NOTCH_OK,
                    FeedbackCode.VIEW_ACQUIRED)[s - 1]
            state.feedback.append(FeedbackEvent(t, code))
        state.stage = live

    # tilt coaching: only meaningful once location and notch hold
    if notch:
        band_lo, band_hi = _target_band(spec, tol_deg)
        if tilt < band_lo:
            code = FeedbackCode.TILT_UNDERSHOT
        elif tilt > band_hi:
            code = FeedbackCode.TILT_OVERSHOT
        else:
            code = None
        if code is not state.guidance_code:
            state.guidance_code = code
            state.guidance_ms = 0.0
            state.guidance_fired = False
        if code is not None:
            state.guidance_ms += dt_ms
            if not state.guidance_fired and state.guidance_ms >= dwell_ms:
                state.feedback.append(FeedbackEvent(t, code))
                state.guidance_fired = True
    else:
        state.guidance_code = None
        state.guidance_ms = 0.0
        state.guidance_fired = False

    if live == 3:
        state.dwell_ms_accum += dt_ms
        if state.dwell_ms_accum >= dwell_ms:
            state.completed = True
    else:
        state.dwell_ms_accum = 0.0

    return state


def reset_attempt(state: SessionState) -> SessionState:
    """Start the attempt over; the feedback log stays (append-only)."""
    state.stage = 0
    state.live_stage = 0
    state.dwell_ms_accum = 0.0
    state.tilt_class = None
    state.completed = False
    state.wrong_location_active = False
    state.guidance_code = None
    state.guidance_ms = 0.0
    state.guidance_fired = False
    return state


def select_visualization(state: SessionState, pose: ProbePose,
                         tol_deg: float = DEFAULT_TOL_DEG
                         ) -> Optional[tuple[View, TiltClass]]:
    """Asset key for the current pose, or None while location or notch are
    wrong (nothing renders until the probe is placed and aligned)."""
    spec = state.target
    if not (location_ok(pose, spec) and notch_ok(pose, spec, tol_deg)):
        return None
    return spec.view, classify_tilt(abs(pose.pitch_deg), spec, tol_deg)


def check_answer(item: QuizItem, choice: int) -> tuple[bool, str]:
    if not 0 <= choice < len(item.options):
        raise OutOfRange(f"choice {choice} outside options")
    return choice == item.answer_index, item.explanation


def drive_session(state: SessionState, samples: Iterable[ProbeSample],
                  rate_hz: float = 50.0,
                  dwell_ms: float = DEFAULT_DWELL_MS,
                  cal: Calibration | None = None,
                  tol_deg: float = DEFAULT_TOL_DEG) -> SessionState:
    """Feed a finite sample stream through the state machine at a nominal
    rate (dt = 1/rate per sample). Deterministic: no wall clock involved."""
    dt_ms = 1000.0 / rate_hz
    calibration = cal if cal is not None else Calibration()
    for sample in samples:
        step(state, to_pose(sample, calibration), dt_ms, dwell_ms, tol_deg)
    return state
