"""
Probe telemetry: parsing, calibration, pose
===========================================

The probe streams one comma-separated line per sample. This demo
fabricates a stream with a deliberate mounting bias, calibrates it
away, and turns raw samples into poses.
"""

from echosim.telemetry import (
    ProbeSample,
    calibrate,
    contact_hall,
    format_line,
    parse_line,
    scripted_device,
    to_pose,
)

# One line, by hand. Angles in degrees, five hall values in ADC counts.
sample = parse_line(b"T,0,12.50,-3.00,0.75,512,512,823,512,512\n")
print(f"parsed: seq={sample.seq} yaw={sample.yaw_deg} hall={sample.hall_raw}")
print(f"canonical form: {format_line(sample)!r}")

# A scripted device replays (duration_ms, template) phases at a fixed
# sample rate, just like the hardware would emit them.
off = contact_hall(False)
on = contact_hall(True)
script = [
    (2000.0, ProbeSample(0, 10.0, -3.0, 1.0, (off,) * 5)),   # still, in hand
    (500.0, ProbeSample(0, 100.0, 4.0, 1.0, (on, off, off, off, off))),
]
stream = scripted_device(script, rate_hz=50.0)

# Calibration watches the still lead-in and learns the mounting bias.
# The same iterator keeps going afterwards; nothing is replayed twice.
cal = calibrate(stream, window_s=2.0, sample_rate_hz=50.0)
print(f"\noffsets learned: yaw={cal.yaw_off:.2f} pitch={cal.pitch_off:.2f} "
      f"roll={cal.roll_off:.2f}")

# Poses downstream of calibration are bias-free, and the hall channels
# collapse to per-pad booleans.
for s in stream:
    pose = to_pose(s, cal)
    print(f"pose: yaw={pose.yaw_deg:+6.1f} pitch={pose.pitch_deg:+5.1f} "
          f"contacts={pose.contacts}")
    break
