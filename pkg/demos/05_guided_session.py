"""
A guided acquisition, step by step
==================================

The trainer state machine watches the pose stream and scores three
stages: right pad, notch aligned, correct tilt held. This drives one
scripted attempt at the Apical window and prints everything the
learner would see.
"""

from echosim.session import (
    Variant,
    View,
    clock_to_deg,
    new_session,
    select_visualization,
    step,
    view_spec,
)
from echosim.telemetry import ProbePose

spec = view_spec(View.APICAL, Variant.TILT)
print(f"target: {spec.view.value} ({spec.variant.value}), "
      f"notch at {spec.notch_clock} o'clock, "
      f"tilt {spec.tilt_lo_deg:.0f}..{spec.tilt_hi_deg:.0f} deg, "
      f"pad {spec.sensor_index}")

yaw = clock_to_deg(spec.notch_clock)
NO_PAD = (False,) * 5
PAD = tuple(i == spec.sensor_index for i in range(5))


def phase(duration_ms, yaw_deg, pitch_deg, contacts):
    n = int(duration_ms / 20)
    return [ProbePose(yaw_deg, pitch_deg, 0.0, contacts)] * n


# searching -> on the pad -> notch found -> tilted onto target
poses = (phase(200, 0.0, 0.0, NO_PAD)
         + phase(200, yaw - 40.0, 0.0, PAD)
         + phase(200, yaw, 0.0, PAD)
         + phase(700, yaw, 7.5, PAD))

state = new_session(spec)
for pose in poses:
    before = len(state.feedback)
    state = step(state, pose, dt_ms=20.0)
    for event in state.feedback[before:]:
        print(f"  {event.t_ms:7.1f} ms  {event.code.value}")

print(f"\nfinal: stage {state.stage}/3, completed={state.completed}, "
      f"class={state.tilt_class.value if state.tilt_class else None}")

# What the screen shows is gated on the same state: no contact, no image.
from echosim.assets import key_name

shown = select_visualization(state, poses[-1])
print(f"visualization while held on target: {key_name(shown)}")
lifted = select_visualization(state, ProbePose(yaw, 7.5, 0.0, NO_PAD))
print(f"visualization after lifting the probe: {lifted}")
