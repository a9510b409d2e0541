"""Deterministic synthetic ego-scene generator with ground truth.

Stands in for the detector/segmenter/3D-estimation stack: it writes full
interchange sequences plus MOT-style ground-truth rows, so the tracking
engine can be verified end to end against known identities.

Geometry model: objects are point markers with a spherical footprint. A
visible object projects to a pixel disk (its detection mask); every mask
pixel of the pointmap carries the object's center coordinate, so the
robust centroid of a lifted object equals the true center exactly at
sigma = 0. Background pixels carry camera-ray/ground-plane intersections
(invalid where the ray never lands, i.e. sky). Pointmaps of each window
group are expressed in a window-local frame: the world composed with a
per-group random rigid drift; the first group is the world anchor.
Occlusion between disks resolves by depth: the nearest object owns a
pixel, and a detection's mask is its owned (visible) pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import Transform4, apply_transform, rotation_about_axis
from .interchange import (
    BBox2D,
    Detection,
    PointMap,
    SegMask,
    Sequence,
    SequenceManifest,
)
from .motfile import TrackRow, TrackTable
from .tracker import WindowSpec, emission_partition, plan_windows

NEAR_PLANE = 0.05
MAX_RANGE = 200.0


@dataclass
class ObjectSpec:
    position: tuple[float, float, float]
    radius: float
    label: str
    # inclusive frame intervals during which the object may be detected;
    # None means always
    visible: list[tuple[int, int]] | None = None

    def scheduled(self, frame: int) -> bool:
        if self.visible is None:
            return True
        return any(a <= frame <= b for a, b in self.visible)


@dataclass
class SceneConfig:
    name: str = "scene"
    frame_count: int = 20
    image_dims: tuple[int, int] = (96, 128)
    objects: list[ObjectSpec] = field(default_factory=list)
    camera: dict = field(default_factory=lambda: {"kind": "orbit"})
    noise_sigma: float = 0.0
    drift_rotation_deg: float = 10.0
    drift_translation: float = 0.2
    window: WindowSpec = field(default_factory=WindowSpec)
    seed: int = 0
    focal: float | None = None

    def validate(self) -> None:
        if self.frame_count < 1:
            raise ConfigError("frame_count must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        for o in self.objects:
            if o.radius <= 0:
                raise ConfigError(f"object radius must be positive, got {o.radius}")
            for a, b in o.visible or []:
                if not (1 <= a <= b <= self.frame_count):
                    raise ConfigError(
                        f"visibility interval [{a}, {b}] outside 1..{self.frame_count}"
                    )


@dataclass
class GtEntry:
    object_id: int
    bbox: BBox2D
    mask: SegMask
    center_world: np.ndarray
    label: str = ""


@dataclass
class GroundTruth:
    """Per frame: the visible objects with stable ids and world centers."""

    frames: dict[int, list[GtEntry]]

    def object_ids(self) -> list[int]:
        return sorted({e.object_id for ents in self.frames.values() for e in ents})


def perfect_tracktable(gt: GroundTruth) -> TrackTable:
    """The oracle prediction: ground-truth ids, boxes and world centers."""
    rows = []
    for frame, entries in sorted(gt.frames.items()):
        for e in entries:
            c = e.center_world
            rows.append(
                TrackRow(
                    frame, e.object_id, e.bbox, 1.0,
                    float(c[0]), float(c[1]), float(c[2]), e.label,
                )
            )
    return TrackTable(rows)


# -- camera trajectories ------------------------------------------------

def lookat_pose(position, target) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera rotation (rows: right, down, forward) and position.

    World is z-up; the camera may not look straight up or down.
    """
    c = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - c
    norm = np.linalg.norm(forward)
    if norm < 1e-9:
        raise ConfigError("camera position and target coincide")
    forward = forward / norm
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-9:
        raise ConfigError("camera looking straight along the world up axis")
    right = right / rnorm
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    return rot, c


def camera_orbit(
    n_frames: int,
    center=(0.0, 0.0, 0.8),
    radius: float = 4.0,
    height: float = 1.6,
    start_deg: float = 0.0,
    sweep_deg: float = 60.0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    poses = []
    center = np.asarray(center, dtype=np.float64)
    for i in range(n_frames):
        frac = i / max(1, n_frames - 1)
        ang = math.radians(start_deg + frac * sweep_deg)
        pos = np.array(
            [center[0] + radius * math.cos(ang), center[1] + radius * math.sin(ang), height]
        )
        poses.append(lookat_pose(pos, center))
    return poses


def camera_dolly(
    n_frames: int, start=(4.0, -1.0, 1.5), end=(2.5, 1.0, 1.5), target=(0.0, 0.0, 0.8)
) -> list[tuple[np.ndarray, np.ndarray]]:
    a = np.asarray(start, dtype=np.float64)
    b = np.asarray(end, dtype=np.float64)
    poses = []
    for i in range(n_frames):
        frac = i / max(1, n_frames - 1)
        poses.append(lookat_pose(a + frac * (b - a), target))
    return poses


def camera_handshake(
    base: list[tuple[np.ndarray, np.ndarray]],
    rng: np.random.Generator,
    magnitude: float = 0.05,
    smoothing: int = 3,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Jitter the positions of a base trajectory with a smoothed random walk."""
    n = len(base)
    steps = rng.normal(scale=magnitude, size=(n, 3))
    walk = np.cumsum(steps, axis=0)
    kernel = np.ones(smoothing) / smoothing
    smooth = np.stack([np.convolve(walk[:, k], kernel, mode="same") for k in range(3)], axis=1)
    centers = []
    for (rot, pos), jitter in zip(base, smooth):
        # retarget at the original look-at point, approximated by a point
        # a few meters along the optical axis
        target = pos + rot[2] * 4.0
        centers.append(lookat_pose(pos + jitter, target))
    return centers


def build_camera(config: SceneConfig, rng: np.random.Generator):
    spec = dict(config.camera)
    kind = spec.pop("kind", "orbit")
    n = config.frame_count
    if kind == "orbit":
        poses = camera_orbit(n, **spec)
    elif kind == "dolly":
        poses = camera_dolly(n, **spec)
    elif kind == "handshake":
        magnitude = spec.pop("magnitude", 0.05)
        poses = camera_handshake(camera_orbit(n, **spec), rng, magnitude=magnitude)
    else:
        raise ConfigError(f"unknown camera kind {kind!r}")
    return poses


# -- generation ---------------------------------------------------------

def _random_drift(
    rng: np.random.Generator, max_rot_deg: float, max_trans: float, center: np.ndarray
) -> Transform4:
    """Rigid gauge drift: rotation about the scene center plus a bounded shift."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = math.radians(rng.uniform(0.0, max_rot_deg))
    rot = rotation_about_axis(axis, angle)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    trans = direction * rng.uniform(0.0, max_trans)
    return Transform4.from_rotation_translation(rot, center - rot @ center + trans)


def _ground_pointmap(rot: np.ndarray, pos: np.ndarray, dims, focal: float) -> tuple[np.ndarray, np.ndarray]:
    h, w = dims
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    dirs_cam = np.stack(
        [(cols - cx) / focal, (rows - cy) / focal, np.ones_like(cols, dtype=np.float64)],
        axis=-1,
    )
    dirs_world = dirs_cam @ rot  # rows of rot are the camera axes
    dz = dirs_world[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -pos[2] / dz
    valid = (np.abs(dz) > 1e-9) & (t > NEAR_PLANE) & (t < MAX_RANGE)
    pts = pos[None, None, :] + t[..., None] * dirs_world
    pts[~valid] = 0.0
    return pts, valid


def generate(config: SceneConfig) -> tuple[Sequence, GroundTruth, list[Transform4]]:
    """Render a scene into an in-memory interchange sequence.

    Returns the sequence, its ground truth, and the per-window drift
    transforms actually injected (index 0 is always the identity).
    """
    config.validate()
    h, w = config.image_dims
    focal = config.focal or 0.9 * min(h, w)
    n = config.frame_count

    root_ss = np.random.SeedSequence(config.seed)
    drift_ss, noise_ss, cam_ss = root_ss.spawn(3)
    cam_rng = np.random.default_rng(cam_ss)
    poses = build_camera(config, cam_rng)
    if len(poses) != n:
        raise ConfigError(f"camera produced {len(poses)} poses for {n} frames")

    windows = plan_windows(n, config.window)
    groups = emission_partition(windows, config.window.overlap)
    drift_rng = np.random.default_rng(drift_ss)
    scene_center = (
        np.mean([o.position for o in config.objects], axis=0)
        if config.objects
        else np.zeros(3)
    )
    drifts = [Transform4.identity()]
    for _ in range(1, len(groups)):
        drifts.append(
            _random_drift(
                drift_rng,
                config.drift_rotation_deg,
                config.drift_translation,
                scene_center,
            )
        )
    group_of_frame = {}
    for gi, (a, b) in enumerate(groups):
        for f in range(a, b + 1):
            group_of_frame[f] = gi

    noise_children = noise_ss.spawn(n)
    centers = np.array([o.position for o in config.objects], dtype=np.float64).reshape(-1, 3)

    detections: dict[int, list[Detection]] = {}
    pointmaps: dict[int, PointMap] = {}
    gt_frames: dict[int, list[GtEntry]] = {}
    ever_visible = [False] * len(config.objects)

    for f in range(1, n + 1):
        rot, pos = poses[f - 1]
        world_pts, valid = _ground_pointmap(rot, pos, (h, w), focal)

        # project scheduled objects, nearest first
        projected = []
        for oid, obj in enumerate(config.objects):
            if not obj.scheduled(f):
                continue
            cam = rot @ (centers[oid] - pos)
            if cam[2] <= NEAR_PLANE:
                continue
            col = (w - 1) / 2.0 + focal * cam[0] / cam[2]
            row = (h - 1) / 2.0 + focal * cam[1] / cam[2]
            u0, v0 = int(round(row)), int(round(col))
            if not (0 <= u0 < h and 0 <= v0 < w):
                continue
            r_px = focal * obj.radius / cam[2]
            projected.append((cam[2], oid, u0, v0, r_px))
        projected.sort()

        owner = np.full((h, w), -1, dtype=np.int64)
        disks = {}
        for depth, oid, u0, v0, r_px in projected:
            rad = max(1, int(math.floor(r_px)))
            uu, vv = np.meshgrid(
                np.arange(max(0, u0 - rad), min(h, u0 + rad + 1)),
                np.arange(max(0, v0 - rad), min(w, v0 + rad + 1)),
                indexing="ij",
            )
            inside = (uu - u0) ** 2 + (vv - v0) ** 2 <= rad * rad
            disks[oid] = (uu[inside], vv[inside])
        # nearest first: later (farther) objects only claim unowned pixels
        for depth, oid, u0, v0, r_px in projected:
            uu, vv = disks[oid]
            free = owner[uu, vv] == -1
            owner[uu[free], vv[free]] = oid

        frame_dets = []
        frame_gt = []
        for depth, oid, u0, v0, r_px in projected:
            owned = owner == oid
            if not owned.any():
                continue
            ever_visible[oid] = True
            rows_idx, cols_idx = np.nonzero(owned)
            bbox = BBox2D(
                float(cols_idx.min()),
                float(rows_idx.min()),
                float(cols_idx.max() - cols_idx.min() + 1),
                float(rows_idx.max() - rows_idx.min() + 1),
            )
            mask = SegMask.from_bitmap(owned)
            world_pts[owned] = centers[oid]
            valid[owned] = True
            frame_dets.append(
                Detection(
                    frame=f,
                    bbox=bbox,
                    mask=mask,
                    label=config.objects[oid].label,
                    confidence=1.0,
                )
            )
            frame_gt.append(
                GtEntry(oid + 1, bbox, mask, centers[oid].copy(), config.objects[oid].label)
            )

        drift = drifts[group_of_frame[f]]
        local = apply_transform(drift, world_pts.reshape(-1, 3)).reshape(h, w, 3)
        if config.noise_sigma > 0:
            frame_rng = np.random.default_rng(noise_children[f - 1])
            local = local + frame_rng.normal(scale=config.noise_sigma, size=local.shape)
        local[~valid] = 0.0

        detections[f] = frame_dets
        pointmaps[f] = PointMap(local.astype(np.float32), valid)
        gt_frames[f] = frame_gt

    for oid, obj in enumerate(config.objects):
        if config.objects and not ever_visible[oid]:
            raise ConfigError(
                f"object {oid} ({obj.label!r}) is never visible: behind the camera "
                "or outside the image for all frames"
            )

    manifest = SequenceManifest(
        name=config.name,
        frame_count=n,
        image_dims=(h, w),
        window_groups=tuple((a, b) for a, b in groups),
    )
    manifest.validate()
    seq = Sequence(manifest, detections=detections, pointmaps=pointmaps)
    return seq, GroundTruth(gt_frames), drifts


def save_scene(seq: Sequence, gt: GroundTruth, out_dir) -> None:
    """Write the sequence directory plus MOT-style gt.txt rows."""
    from pathlib import Path

    from .interchange import save_sequence
    from .motfile import write_track_file

    out = Path(out_dir)
    save_sequence(seq, out)
    write_track_file(perfect_tracktable(gt), out / "gt.txt")


def make_scene_config(
    n_objects: int = 3,
    n_frames: int = 20,
    seed: int = 0,
    min_separation: float = 1.0,
    image_dims: tuple[int, int] = (96, 128),
    window: WindowSpec | None = None,
    noise_sigma: float = 0.0,
    drift_rotation_deg: float = 10.0,
    drift_translation: float = 0.2,
    camera: dict | None = None,
    name: str = "scene",
) -> SceneConfig:
    """Random well-separated scene; objects sit in a disc the camera orbits.

    Positions snap to a 1/64 grid so world coordinates are exactly
    representable in the stored float32 pointmaps.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5CEE)))
    positions: list[np.ndarray] = []
    attempts = 0
    while len(positions) < n_objects:
        cand = np.array(
            [rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(0.3, 1.4)]
        )
        cand = np.round(cand * 64.0) / 64.0
        if all(np.linalg.norm(cand - p) >= min_separation for p in positions):
            positions.append(cand)
        attempts += 1
        if attempts > 20000:
            raise ConfigError(
                f"cannot place {n_objects} objects {min_separation} apart in the scene volume"
            )
    labels = ["mug", "plant", "chair", "lamp", "book", "bottle", "box", "shoe"]
    objects = [
        ObjectSpec(tuple(p), radius=float(rng.uniform(0.18, 0.3)), label=labels[i % len(labels)])
        for i, p in enumerate(positions)
    ]
    return SceneConfig(
        name=name,
        frame_count=n_frames,
        image_dims=image_dims,
        objects=objects,
        camera=camera or {"kind": "orbit", "radius": 4.0, "height": 1.8, "sweep_deg": 50.0},
        noise_sigma=noise_sigma,
        drift_rotation_deg=drift_rotation_deg,
        drift_translation=drift_translation,
        window=window or WindowSpec(),
        seed=seed,
    )
