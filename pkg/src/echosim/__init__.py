"""echosim: a headless 4D-ultrasound training engine.

Ingests NRRD volume sequences, slices them along arbitrary planes, packages
the slices as looping grayscale GIFs, consumes probe telemetry (real or
scripted), and runs the gamified echo-training session over a small network
service. The browser UI in frontend/ talks to that service; everything in
this package runs without it.
"""

__version__ = "0.1.0"

from .volume import (  # noqa: E402,F401
    VolumeFrame,
    VolumeSequence,
    load_frame_directory,
    parse_nrrd,
    read_nrrd,
    write_nrrd,
)
from .slicer import (  # noqa: E402,F401
    SliceImage,
    SlicePlane,
    make_plane,
    sample_trilinear,
    slice_frame,
    tilted_plane,
    write_pgm,
)
from .gifcodec import (  # noqa: E402,F401
    GifAnimation,
    decode_gif,
    encode_gif,
    sequence_to_gif,
)
from .telemetry import (  # noqa: E402,F401
    Calibration,
    ProbePose,
    ProbeSample,
    calibrate,
    format_line,
    parse_line,
    to_pose,
    wrap_deg,
)
from .session import (  # noqa: E402,F401
    FeedbackCode,
    SessionState,
    TiltClass,
    Variant,
    View,
    ViewSpec,
    classify_tilt,
    clock_to_deg,
    new_session,
    select_visualization,
    step,
    view_spec,
)
from .assets import (  # noqa: E402,F401
    AssetManifest,
    build_assets,
    load_manifest,
    synthetic_library,
)
from .quizbank import QuizBank, default_bank  # noqa: E402,F401
from .service import SessionService, serve  # noqa: E402,F401
