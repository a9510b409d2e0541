"""Sliding-window 3D tracking: lifting, alignment, ID propagation, memory.

Windows of W frames slide by S = W - T so consecutive windows share T
frames. The first window defines the global coordinate frame; every later
window is aligned into it by estimating a 4x4 transform from mutual
nearest-neighbor correspondences between the previous window's overlap
observations (already global) and the current window's newly lifted
points. Identities live in a bounded memory buffer keyed by track id;
objects missing longer than the memory horizon are evicted and re-enter
with fresh ids.

Overlap frames are emitted by the earlier window, so the stored pointmap
window groups must match the emission partition of the planned windows
(single-group sequences are exempt: there is only one gauge and alignment
is skipped).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .assoc import CostConfig, mutual_nearest_neighbors, point_match, robust_centroid
from .errors import ConfigError, SequenceFormatError
from .geometry import (
    AlignConfig,
    Transform4,
    apply_transform,
    estimate_alignment,
    estimate_alignment_iterative,
)
from .interchange import BBox2D, Detection, PointMap, Sequence, mask_pixel_indices
from .motfile import TrackRow, TrackTable

CLOSED_FORM = "closed_form"
ITERATIVE = "iterative"


@dataclass(frozen=True)
class WindowSpec:
    """W consecutive frames per window, consecutive windows share T."""

    window: int = 10
    overlap: int = 5

    @property
    def step(self) -> int:
        return self.window - self.overlap

    def validate(self) -> None:
        if not (1 <= self.overlap < self.window):
            raise ConfigError(
                f"window spec needs 1 <= overlap < window, got W={self.window} T={self.overlap}"
            )


@dataclass
class ObjectObservation:
    """One detection lifted into 3D (window-local until aligned)."""

    frame: int
    detection_index: int
    bbox: BBox2D
    label: str
    confidence: float
    points: np.ndarray  # (P, 3) float64
    centroid: np.ndarray  # (3,) per-coordinate median of points

    def transformed(self, t: Transform4) -> "ObjectObservation":
        pts = apply_transform(t, self.points)
        return replace(self, points=pts, centroid=robust_centroid(pts))


def lift_objects(
    detections: list[Detection],
    pointmap: PointMap,
    image_dims: tuple[int, int] | None = None,
) -> tuple[list[ObjectObservation], int]:
    """Lift detections through the pointmap; returns (observations, dropped).

    Each observation's points are exactly the pointmap values at its
    mask's valid pixels; detections whose masks hit zero valid pixels are
    dropped and counted. Masks at the nominal ``image_dims`` are scaled
    onto a lower-resolution pointmap by nearest-pixel indexing (the
    manifest's explicit pointmap_dims case); any other dims combination is
    a dimension mismatch.
    """
    observations = []
    dropped = 0
    pm_dims = pointmap.dims
    for k, det in enumerate(detections):
        if det.mask.dims == pm_dims:
            idx = mask_pixel_indices(det.mask)
        elif image_dims is not None and det.mask.dims == tuple(image_dims):
            idx = _scaled_indices(det.mask, pm_dims)
        else:
            raise SequenceFormatError(
                f"mask dims {det.mask.dims} do not match pointmap dims {pm_dims}",
                frame=det.frame,
            )
        pts, valid = pointmap.gather(idx)
        pts = pts[valid]
        if len(pts) == 0:
            dropped += 1
            continue
        observations.append(
            ObjectObservation(
                frame=det.frame,
                detection_index=k,
                bbox=det.bbox,
                label=det.label,
                confidence=det.confidence,
                points=pts,
                centroid=robust_centroid(pts),
            )
        )
    return observations, dropped


def _scaled_indices(mask, pm_dims: tuple[int, int]) -> np.ndarray:
    # pointmap resolution differs from the image: nearest-pixel index scaling
    mh, mw = mask.dims
    ph, pw = pm_dims
    idx = mask_pixel_indices(mask)
    rows = (idx // mw) * ph // mh
    cols = (idx % mw) * pw // mw
    return np.unique(rows * pw + cols)


def plan_windows(n_frames: int, spec: WindowSpec) -> list[tuple[int, int]]:
    """Inclusive frame ranges; first starts at 1, consecutive share T frames."""
    spec.validate()
    if n_frames < 1:
        raise ConfigError(f"sequences must have at least 1 frame, got {n_frames}")
    if n_frames <= spec.window:
        return [(1, n_frames)]
    starts = [1]
    while starts[-1] + spec.window - 1 < n_frames:
        starts.append(starts[-1] + spec.step)
    windows = [(s, min(s + spec.window - 1, n_frames)) for s in starts]
    # construction guarantees the tail is at least T+1 frames long
    assert windows[-1][1] - windows[-1][0] + 1 >= spec.overlap + 1
    return windows


def emission_partition(windows: list[tuple[int, int]], overlap: int) -> list[tuple[int, int]]:
    """Frames emitted per window: the full first window, then each tail."""
    parts = [windows[0]]
    for s, e in windows[1:]:
        parts.append((s + overlap, e))
    return parts


@dataclass
class BufferEntry:
    track_id: int
    last_seen: int
    centroid: np.ndarray
    label: str

    @property
    def points(self) -> np.ndarray:
        return self.centroid[None, :]


class TrackBuffer:
    """Bounded memory of recently seen identities.

    An entry's age is the number of frames missed (current - last_seen - 1);
    entries older than the horizon are evicted before each matching step,
    so an object absent for g frames keeps its id iff g <= memory_frames.
    """

    def __init__(self, memory_frames: int):
        if memory_frames < 0:
            raise ConfigError("memory horizon must be >= 0 frames")
        self.memory_frames = memory_frames
        self.entries: dict[int, BufferEntry] = {}
        self._next_id = 1

    def evict(self, frame: int) -> None:
        dead = [
            tid
            for tid, e in self.entries.items()
            if frame - e.last_seen - 1 > self.memory_frames
        ]
        for tid in dead:
            del self.entries[tid]

    def live(self) -> list[BufferEntry]:
        return [self.entries[tid] for tid in sorted(self.entries)]

    def refresh(self, tid: int, frame: int, centroid: np.ndarray) -> None:
        e = self.entries[tid]
        e.last_seen = frame
        e.centroid = 0.5 * np.asarray(centroid, dtype=np.float64) + 0.5 * e.centroid

    def spawn(self, frame: int, centroid: np.ndarray, label: str) -> int:
        tid = self._next_id
        self._next_id += 1
        self.entries[tid] = BufferEntry(
            tid, frame, np.asarray(centroid, dtype=np.float64).copy(), label
        )
        return tid


def _match_frame(
    buffer: TrackBuffer,
    observations: list[ObjectObservation],
    frame: int,
    gate: float,
    cost: CostConfig,
) -> list[TrackRow]:
    buffer.evict(frame)
    live = buffer.live()
    assignment = point_match(live, observations, gate, cost)
    tid_of: dict[int, int] = {}
    for pair in assignment.pairs:
        tid = live[pair.index_a].track_id
        buffer.refresh(tid, frame, observations[pair.index_b].centroid)
        tid_of[pair.index_b] = tid
    for j in assignment.unmatched_b:
        obs = observations[j]
        tid_of[j] = buffer.spawn(frame, obs.centroid, obs.label)
    rows = []
    for j, obs in enumerate(observations):
        rows.append(
            TrackRow(
                frame=frame,
                track_id=tid_of[j],
                bbox=obs.bbox,
                conf=obs.confidence,
                x=float(obs.centroid[0]),
                y=float(obs.centroid[1]),
                z=float(obs.centroid[2]),
                label=obs.label,
            )
        )
    return rows


def init_window(
    observations_by_frame: dict[int, list[ObjectObservation]],
    gate: float,
    cost: CostConfig | None = None,
    memory_frames: int = 30,
) -> tuple[list[TrackRow], TrackBuffer]:
    """Seed identities inside the first window.

    First-frame objects receive fresh sequential ids; every later frame is
    matched against the buffer, inheriting on a hit and spawning otherwise.
    """
    cost = cost or CostConfig()
    buffer = TrackBuffer(memory_frames)
    rows: list[TrackRow] = []
    for frame in sorted(observations_by_frame):
        rows.extend(_match_frame(buffer, observations_by_frame[frame], frame, gate, cost))
    return rows, buffer


def propagate_ids(
    observations_by_frame: dict[int, list[ObjectObservation]],
    buffer: TrackBuffer,
    gate: float,
    cost: CostConfig | None = None,
) -> list[TrackRow]:
    """Match aligned (global-frame) observations into the live buffer.

    Callers pass only frames not already emitted by the previous window;
    overlap frames contribute id continuity through the buffer state the
    previous window left behind.
    """
    cost = cost or CostConfig()
    rows: list[TrackRow] = []
    for frame in sorted(observations_by_frame):
        rows.extend(_match_frame(buffer, observations_by_frame[frame], frame, gate, cost))
    return rows


@dataclass
class AlignOutcome:
    transform: Transform4
    status: str  # "estimated", "identity_fallback", "same_gauge", "first_window"
    matched_points: int = 0
    mean_residual: float = 0.0
    degenerate: bool = False


def align_window(
    prev_obs_by_frame: dict[int, list[ObjectObservation]],
    cur_obs_by_frame: dict[int, list[ObjectObservation]],
    overlap_frames,
    config: AlignConfig | None = None,
    estimator: str = CLOSED_FORM,
    nn_max_dist: float = np.inf,
) -> AlignOutcome:
    """Estimate the transform taking current-window coordinates global.

    Pools the previous window's lifted points over the overlap frames
    (already global) against the current window's local-frame points,
    keeps mutual nearest-neighbor pairs, and solves the least-squares
    alignment. Too few correspondences degrade to the identity transform
    with a warning status.
    """
    config = config or AlignConfig()
    overlap = set(overlap_frames)
    prev_pool = [
        obs.points
        for f, obs_list in sorted(prev_obs_by_frame.items())
        if f in overlap
        for obs in obs_list
    ]
    cur_pool = [
        obs.points
        for _, obs_list in sorted(cur_obs_by_frame.items())
        for obs in obs_list
    ]
    if not prev_pool or not cur_pool:
        return AlignOutcome(Transform4.identity(), "identity_fallback")
    prev_pts = np.vstack(prev_pool)
    cur_pts = np.vstack(cur_pool)
    pairs = mutual_nearest_neighbors(prev_pts, cur_pts, nn_max_dist)
    min_support = 4 if config.family == "affine" else 5
    if len(pairs) < min_support:
        return AlignOutcome(
            Transform4.identity(), "identity_fallback", matched_points=len(pairs)
        )
    src = cur_pts[[p.index_b for p in pairs]]
    dst = prev_pts[[p.index_a for p in pairs]]
    if estimator == ITERATIVE:
        result = estimate_alignment_iterative(src, dst, config)
    else:
        result = estimate_alignment(src, dst, config)
    return AlignOutcome(
        transform=result.transform,
        status="estimated",
        matched_points=result.matched_count,
        mean_residual=result.mean_residual,
        degenerate=result.degenerate,
    )


@dataclass
class TrackerConfig:
    window: WindowSpec = field(default_factory=WindowSpec)
    memory_frames: int = 30
    gate: float = 0.5
    cost: CostConfig = field(default_factory=CostConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    align_estimator: str = CLOSED_FORM
    align_nn_max_dist: float = np.inf


@dataclass
class Diagnostics:
    dropped_detections: int = 0
    windows: list[dict] = field(default_factory=list)

    @property
    def fallback_count(self) -> int:
        return sum(1 for w in self.windows if w["alignment"] == "identity_fallback")

    def to_json(self) -> dict:
        return {
            "dropped_detections": self.dropped_detections,
            "fallback_count": self.fallback_count,
            "windows": self.windows,
        }


def track_sequence(seq: Sequence, config: TrackerConfig | None = None) -> tuple[TrackTable, Diagnostics]:
    """Run the full pipeline over a loaded sequence.

    plan_windows -> lift per frame -> seed ids in the first window -> for
    every later window: align into the global frame, then propagate ids
    over its newly emitted frames. Output rows are sorted by (frame, id)
    with all coordinates in the first window's frame.
    """
    config = config or TrackerConfig()
    n = seq.manifest.frame_count
    windows = plan_windows(n, config.window)
    emission = emission_partition(windows, config.window.overlap)

    groups = seq.manifest.window_groups
    single_gauge = len(groups) == 1
    if not single_gauge and list(groups) != [tuple(p) for p in emission]:
        raise SequenceFormatError(
            "sequence window grouping "
            f"{list(groups)} does not match the window spec's emission partition "
            f"{emission}; pass matching --window-size/--overlap"
        )

    diag = Diagnostics()
    observations: dict[int, list[ObjectObservation]] = {}
    for f in seq.frame_ids():
        obs, dropped = lift_objects(
            seq.detections(f), seq.pointmap(f), seq.manifest.image_dims
        )
        observations[f] = obs
        diag.dropped_detections += dropped

    rows: list[TrackRow] = []
    global_obs: dict[int, list[ObjectObservation]] = {}

    first = {f: observations[f] for f in range(windows[0][0], windows[0][1] + 1)}
    seg, buffer = init_window(first, config.gate, config.cost, config.memory_frames)
    rows.extend(seg)
    global_obs.update(first)
    diag.windows.append(
        {
            "range": list(windows[0]),
            "alignment": "first_window",
            "matched_points": 0,
            "mean_residual": 0.0,
        }
    )

    for wi in range(1, len(windows)):
        s, e = windows[wi]
        overlap_frames = range(s, s + config.window.overlap)
        new_frames = range(emission[wi][0], emission[wi][1] + 1)
        cur_local = {f: observations[f] for f in new_frames}

        if single_gauge:
            outcome = AlignOutcome(Transform4.identity(), "same_gauge")
        else:
            outcome = align_window(
                global_obs,
                cur_local,
                overlap_frames,
                config.align,
                config.align_estimator,
                config.align_nn_max_dist,
            )
        diag.windows.append(
            {
                "range": [s, e],
                "alignment": outcome.status,
                "matched_points": outcome.matched_points,
                "mean_residual": outcome.mean_residual,
            }
        )

        aligned = {
            f: [obs.transformed(outcome.transform) for obs in obs_list]
            for f, obs_list in cur_local.items()
        }
        rows.extend(propagate_ids(aligned, buffer, config.gate, config.cost))
        global_obs.update(aligned)

    return TrackTable(rows), diag
