"""3D multi-object tracking by pointmap association across sliding windows."""

from .assoc import (
    Assignment,
    CostConfig,
    MatchPair,
    SpatialIndex,
    build_index,
    hungarian,
    mutual_nearest_neighbors,
    object_cost,
    point_match,
    robust_centroid,
)
from .errors import (
    AssociationError,
    ConfigError,
    EstimationError,
    PointmotError,
    SequenceFormatError,
    TransformError,
)
from .geometry import (
    AlignConfig,
    AlignmentResult,
    Transform4,
    apply_transform,
    compose,
    estimate_alignment,
    estimate_alignment_iterative,
    invert,
)
from .interchange import (
    BBox2D,
    Detection,
    PointMap,
    SegMask,
    Sequence,
    SequenceManifest,
    load_sequence,
    mask_pixels,
    save_sequence,
)
from .metrics import EvalConfig, EvalReport, clear_counts, evaluate, hota, idf1, match_frames
from .motfile import TrackRow, TrackTable, read_track_file, write_track_file
from .simulator import (
    GroundTruth,
    ObjectSpec,
    SceneConfig,
    generate,
    make_scene_config,
    perfect_tracktable,
    save_scene,
)
from .tracker import (
    Diagnostics,
    ObjectObservation,
    TrackBuffer,
    TrackerConfig,
    WindowSpec,
    align_window,
    init_window,
    lift_objects,
    plan_windows,
    propagate_ids,
    track_sequence,
)

__version__ = "0.1.0"
