"""
Building the animated asset library
===================================

Every view/class pair the trainer can show is pre-rendered to an
animated GIF so a browser needs nothing but an <img> tag.
"""

import pathlib
import tempfile

from echosim.assets import key_name, synthetic_library
from echosim.gifcodec import decode_gif
from echosim.session import TiltClass, View

root = pathlib.Path(tempfile.mkdtemp(prefix="echosim_assets_"))

# synthetic_library fabricates loops for every view and tilt class and
# runs the full build; with a recorded study you would call build_assets
# with real sequences instead.
manifest = synthetic_library(root, nt=6, n=24, size_px=64)

print(f"library at {root}")
print(f"entries: {len(manifest.entries)}")
for key in sorted(manifest.entries, key=key_name)[:4]:
    print(" ", key_name(key))
print("  ...")

# Each entry is a decodable GIF whose frames match the source loop.
anim = decode_gif((root / "Apical_TiltView.gif").read_bytes())
print(f"\nApical/TiltView: {len(anim.frames)} frames of "
      f"{anim.width}x{anim.height}, {anim.delay_cs * 10} ms/frame")

# The manifest also carries the slice planes and sensor layout, so a
# service can answer geometry questions without reopening any volume.
plane = manifest.planes[View.APICAL]
print(f"Apical plane: {plane.width_px}x{plane.height_px} px "
      f"at {plane.pixel_mm} mm")
print(f"sensor pads: { {v.value: i for v, i in manifest.sensors.items()} }")

# Classes without dedicated footage fall back to the nearest recorded
# one rather than leaving the screen dark.
shown = manifest.resolve(View.APICAL, TiltClass.UNDERSHOT)
print(f"Undershot resolves to: {key_name(shown)}")
