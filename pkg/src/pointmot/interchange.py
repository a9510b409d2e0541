"""Shared data model and the on-disk sequence format.

A sequence directory looks like::

    manifest.json
    frames/000001/detections.json
    frames/000001/pointmap.bin      # float32 little-endian, H*W*3 row-major
    frames/000001/valid.bin         # uint8 {0,1}, H*W row-major

The manifest records image dims, the frame list and the pointmap window
grouping: which consecutive frame ranges share a window-local coordinate
frame. Groups partition 1..N; every frame has exactly one pointmap blob.
All loaded objects are immutable after load and safe to share across
workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SequenceFormatError

FRAME_DIR_FMT = "{:06d}"


@dataclass(frozen=True)
class BBox2D:
    """Axis-aligned box in pixels, (left, top, width, height)."""

    left: float
    top: float
    width: float
    height: float

    def clamped(self, dims: tuple[int, int]) -> "BBox2D":
        """Clamp to an (H, W) image; raises if nothing remains."""
        h, w = dims
        left = min(max(self.left, 0.0), float(w))
        top = min(max(self.top, 0.0), float(h))
        right = min(max(self.left + self.width, 0.0), float(w))
        bottom = min(max(self.top + self.height, 0.0), float(h))
        if right - left <= 0 or bottom - top <= 0:
            raise SequenceFormatError(
                f"box {self.as_tuple()} lies outside a {w}x{h} image"
            )
        return BBox2D(left, top, right - left, bottom - top)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.width, self.height)

    def validate(self, dims: tuple[int, int]) -> None:
        if not (self.width > 0 and self.height > 0):
            raise SequenceFormatError(f"non-positive box size {self.as_tuple()}")
        self.clamped(dims)


class SegMask:
    """Run-length encoded foreground pixel set over an H x W grid.

    Runs are (start, length) pairs over row-major linear indices, sorted
    and non-overlapping.
    """

    def __init__(self, dims: tuple[int, int], runs):
        self.dims = (int(dims[0]), int(dims[1]))
        arr = np.asarray(runs, dtype=np.int64).reshape(-1, 2)
        self.runs = arr
        self._validate()

    def _validate(self) -> None:
        h, w = self.dims
        total = h * w
        prev_end = -1
        for start, length in self.runs:
            if length <= 0:
                raise SequenceFormatError(f"non-positive run length {length}")
            if start <= prev_end:
                raise SequenceFormatError("runs out of order or overlapping")
            if start < 0 or start + length > total:
                raise SequenceFormatError(
                    f"run ({start},{length}) outside {h}x{w} grid"
                )
            prev_end = start + length - 1

    @classmethod
    def from_bitmap(cls, bitmap: np.ndarray) -> "SegMask":
        """Encode a boolean H x W array."""
        bitmap = np.asarray(bitmap, dtype=bool)
        flat = bitmap.ravel()
        # run boundaries via flank comparison
        padded = np.concatenate(([False], flat, [False]))
        changes = np.flatnonzero(padded[1:] != padded[:-1])
        starts = changes[0::2]
        ends = changes[1::2]
        runs = np.stack([starts, ends - starts], axis=1)
        return cls(bitmap.shape, runs)

    def to_bitmap(self) -> np.ndarray:
        flat = np.zeros(self.dims[0] * self.dims[1], dtype=bool)
        for start, length in self.runs:
            flat[start : start + length] = True
        return flat.reshape(self.dims)

    def pixel_count(self) -> int:
        return int(self.runs[:, 1].sum()) if len(self.runs) else 0

    def to_json(self) -> dict:
        return {"size": list(self.dims), "runs": self.runs.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "SegMask":
        return cls(tuple(obj["size"]), obj.get("runs", []))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SegMask)
            and self.dims == other.dims
            and np.array_equal(self.runs, other.runs)
        )


def mask_pixels(mask: SegMask) -> list[tuple[int, int]]:
    """Foreground pixels as (row, col) pairs in row-major order."""
    w = mask.dims[1]
    out: list[tuple[int, int]] = []
    for start, length in mask.runs:
        for lin in range(start, start + length):
            out.append((lin // w, lin % w))
    return out


def mask_pixel_indices(mask: SegMask) -> np.ndarray:
    """Row-major linear indices of foreground pixels (vectorized form)."""
    if len(mask.runs) == 0:
        return np.empty(0, dtype=np.int64)
    parts = [np.arange(s, s + n, dtype=np.int64) for s, n in mask.runs]
    return np.concatenate(parts)


class PointMap:
    """Per-pixel 3D coordinates aligned one-to-one with an image frame.

    ``coords`` is float32 (H, W, 3); ``valid`` marks pixels whose
    coordinates are meaningful. Lifting a pixel returns exactly the stored
    coordinate.
    """

    def __init__(self, coords: np.ndarray, valid: np.ndarray):
        coords = np.asarray(coords, dtype=np.float32)
        valid = np.asarray(valid, dtype=bool)
        if coords.ndim != 3 or coords.shape[2] != 3:
            raise SequenceFormatError(f"pointmap shape {coords.shape} is not (H, W, 3)")
        if valid.shape != coords.shape[:2]:
            raise SequenceFormatError(
                f"validity shape {valid.shape} does not match pointmap {coords.shape[:2]}"
            )
        if not np.all(np.isfinite(coords[valid])):
            raise SequenceFormatError("non-finite coordinates at valid pixels")
        self.coords = coords
        self.valid = valid

    @property
    def dims(self) -> tuple[int, int]:
        return self.coords.shape[:2]

    def lift(self, row: int, col: int) -> np.ndarray:
        return self.coords[row, col]

    def gather(self, linear_indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Points and validity for row-major linear pixel indices.

        Returns float64 copies (exact widening of the stored float32).
        """
        flat = self.coords.reshape(-1, 3)
        vflat = self.valid.ravel()
        return flat[linear_indices].astype(np.float64), vflat[linear_indices]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PointMap)
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.valid, other.valid)
        )


@dataclass(frozen=True)
class Detection:
    """One detected object in one frame."""

    frame: int
    bbox: BBox2D
    mask: SegMask
    label: str
    confidence: float

    def validate(self, dims: tuple[int, int]) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise SequenceFormatError(
                f"confidence {self.confidence} outside [0, 1]", frame=self.frame
            )
        if self.mask.dims != tuple(dims):
            raise SequenceFormatError(
                f"mask dims {self.mask.dims} do not match frame dims {tuple(dims)}",
                frame=self.frame,
            )
        self.bbox.validate(dims)

    def to_json(self) -> dict:
        return {
            "bbox": list(self.bbox.as_tuple()),
            "mask": self.mask.to_json(),
            "label": self.label,
            "confidence": self.confidence,
        }

    @classmethod
    def from_json(cls, frame: int, obj: dict) -> "Detection":
        return cls(
            frame=frame,
            bbox=BBox2D(*obj["bbox"]),
            mask=SegMask.from_json(obj["mask"]),
            label=str(obj["label"]),
            confidence=float(obj["confidence"]),
        )


@dataclass(frozen=True)
class SequenceManifest:
    """Validated description of a stored sequence."""

    name: str
    frame_count: int
    image_dims: tuple[int, int]
    window_groups: tuple[tuple[int, int], ...]
    pointmap_dims: tuple[int, int] | None = None

    def group_of(self, frame: int) -> int:
        for gi, (start, end) in enumerate(self.window_groups):
            if start <= frame <= end:
                return gi
        raise SequenceFormatError(f"frame {frame} not covered by any window group")

    def validate(self) -> None:
        n = self.frame_count
        if n < 1:
            raise SequenceFormatError(f"sequences must have N >= 1, got {n}")
        if not self.window_groups:
            raise SequenceFormatError("manifest has no window groups")
        expect_start = 1
        for start, end in self.window_groups:
            if start != expect_start or end < start:
                raise SequenceFormatError(
                    f"window groups must partition 1..{n}; bad range [{start}, {end}]"
                )
            expect_start = end + 1
        if expect_start != n + 1:
            raise SequenceFormatError(
                f"window groups cover 1..{expect_start - 1}, expected 1..{n}"
            )


class Sequence:
    """A manifest plus lazily loadable per-frame data.

    Either backed by a directory (``root``) or fully in memory (both dicts
    populated). Loaded frames are cached; all data is read-only.
    """

    def __init__(
        self,
        manifest: SequenceManifest,
        root: Path | None = None,
        detections: dict[int, list[Detection]] | None = None,
        pointmaps: dict[int, PointMap] | None = None,
    ):
        self.manifest = manifest
        self.root = Path(root) if root is not None else None
        self._detections = dict(detections) if detections else {}
        self._pointmaps = dict(pointmaps) if pointmaps else {}

    def frame_ids(self) -> range:
        return range(1, self.manifest.frame_count + 1)

    def _frame_dir(self, frame: int) -> Path:
        assert self.root is not None
        return self.root / "frames" / FRAME_DIR_FMT.format(frame)

    def detections(self, frame: int) -> list[Detection]:
        if frame not in self._detections:
            path = self._frame_dir(frame) / "detections.json"
            self._detections[frame] = _read_detections(path, frame, self.manifest)
        return self._detections[frame]

    def pointmap(self, frame: int) -> PointMap:
        if frame not in self._pointmaps:
            d = self._frame_dir(frame)
            self._pointmaps[frame] = _read_pointmap(
                d / "pointmap.bin", d / "valid.bin", frame, self.manifest
            )
        return self._pointmaps[frame]


def _read_detections(path: Path, frame: int, manifest: SequenceManifest) -> list[Detection]:
    if not path.is_file():
        raise SequenceFormatError("missing detections file", frame=frame, path=path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SequenceFormatError(f"malformed JSON: {e}", frame=frame, path=path)
    if obj.get("frame") != frame:
        raise SequenceFormatError(
            f"detections record is for frame {obj.get('frame')}", frame=frame, path=path
        )
    dets = []
    for k, rec in enumerate(obj.get("detections", [])):
        try:
            det = Detection.from_json(frame, rec)
            det.validate(manifest.image_dims)
        except SequenceFormatError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise SequenceFormatError(
                f"malformed detection record #{k}: {e}", frame=frame, path=path
            )
        dets.append(det)
    return dets


def _read_pointmap(pm_path: Path, valid_path: Path, frame: int, manifest: SequenceManifest) -> PointMap:
    h, w = manifest.pointmap_dims or manifest.image_dims
    if not pm_path.is_file():
        raise SequenceFormatError("missing pointmap blob", frame=frame, path=pm_path)
    if not valid_path.is_file():
        raise SequenceFormatError("missing validity blob", frame=frame, path=valid_path)
    coords = np.fromfile(pm_path, dtype="<f4")
    if coords.size != h * w * 3:
        raise SequenceFormatError(
            f"pointmap blob holds {coords.size} floats, expected {h * w * 3}",
            frame=frame,
            path=pm_path,
        )
    valid = np.fromfile(valid_path, dtype=np.uint8)
    if valid.size != h * w:
        raise SequenceFormatError(
            f"validity blob holds {valid.size} bytes, expected {h * w}",
            frame=frame,
            path=valid_path,
        )
    try:
        return PointMap(coords.reshape(h, w, 3), valid.reshape(h, w).astype(bool))
    except SequenceFormatError as e:
        raise SequenceFormatError(str(e), frame=frame, path=pm_path)


def load_sequence(root_path) -> Sequence:
    """Open and validate a sequence directory.

    The manifest and all invariants it can express are checked eagerly;
    per-frame blobs are validated on first access. Raises
    SequenceFormatError naming the frame and path on any violation.
    """
    root = Path(root_path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise SequenceFormatError("missing manifest.json", path=manifest_path)
    try:
        obj = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise SequenceFormatError(f"malformed manifest: {e}", path=manifest_path)

    try:
        frames = obj["frames"]
        manifest = SequenceManifest(
            name=str(obj["name"]),
            frame_count=int(obj["frame_count"]),
            image_dims=tuple(obj["image_dims"]),
            window_groups=tuple(tuple(g) for g in obj["window_groups"]),
            pointmap_dims=tuple(obj["pointmap_dims"]) if obj.get("pointmap_dims") else None,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SequenceFormatError(f"malformed manifest: {e}", path=manifest_path)
    manifest.validate()

    if len(frames) != manifest.frame_count:
        raise SequenceFormatError(
            f"frame list has {len(frames)} entries, expected {manifest.frame_count}",
            path=manifest_path,
        )
    seen = set()
    prev = 0
    for rec in frames:
        idx = int(rec["index"])
        if idx in seen or idx <= prev:
            raise SequenceFormatError(
                f"frame ids must be strictly increasing, got {idx} after {prev}",
                path=manifest_path,
            )
        seen.add(idx)
        prev = idx
    if prev != manifest.frame_count or min(seen) != 1:
        raise SequenceFormatError(
            "frame ids must be exactly 1..N", path=manifest_path
        )

    seq = Sequence(manifest, root=root)
    # existence check up front so errors name the frame before any tracking runs
    for f in seq.frame_ids():
        d = seq._frame_dir(f)
        for name in ("detections.json", "pointmap.bin", "valid.bin"):
            if not (d / name).is_file():
                raise SequenceFormatError(f"missing {name}", frame=f, path=d / name)
    return seq


def save_sequence(seq: Sequence, root_path) -> None:
    """Write a sequence directory; load_sequence(save_sequence(x)) == x.

    Coordinates round-trip bit-exactly (raw float32 blobs).
    """
    seq.manifest.validate()
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    manifest_obj = {
        "name": seq.manifest.name,
        "frame_count": seq.manifest.frame_count,
        "image_dims": list(seq.manifest.image_dims),
        "window_groups": [list(g) for g in seq.manifest.window_groups],
        "frames": [
            {"index": f, "dir": f"frames/{FRAME_DIR_FMT.format(f)}"}
            for f in seq.frame_ids()
        ],
    }
    if seq.manifest.pointmap_dims is not None:
        manifest_obj["pointmap_dims"] = list(seq.manifest.pointmap_dims)
    (root / "manifest.json").write_text(json.dumps(manifest_obj, indent=1) + "\n")

    for f in seq.frame_ids():
        d = root / "frames" / FRAME_DIR_FMT.format(f)
        d.mkdir(parents=True, exist_ok=True)
        dets = seq.detections(f)
        rec = {"frame": f, "detections": [det.to_json() for det in dets]}
        (d / "detections.json").write_text(json.dumps(rec, indent=1) + "\n")
        pm = seq.pointmap(f)
        pm.coords.astype("<f4").tofile(d / "pointmap.bin")
        pm.valid.astype(np.uint8).tofile(d / "valid.bin")
