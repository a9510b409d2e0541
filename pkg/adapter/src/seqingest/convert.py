"""Model outputs -> sequence directory.

Inputs are saved files from the detection/segmentation/3D stacks:

  - per-frame detection JSON (glob), each::

        {"detections": [{"bbox": [l, t, w, h], "label": "...",
                         "score": 0.93,
                         "mask_rle": {"size": [H, W], "runs": [[s, n], ...]}
                         | "mask_npy": "relative/path.npy"}]}

  - per-frame pointmap .npy arrays of shape (H, W, 3), float32
    (float64 inputs are cast);
  - optional per-frame validity .npy arrays (H, W), bool or {0,1}.

Frames pair up by sorted glob order. Detections under the confidence
floor are dropped and counted.
"""

from __future__ import annotations

import glob
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import (
    IngestError,
    check_runs,
    plan_window_partition,
    rle_encode,
    write_frame,
    write_manifest,
)


@dataclass
class AdapterConfig:
    detections: str  # glob for per-frame detection JSON files
    pointmaps: str  # glob for per-frame pointmap .npy files
    valids: str | None = None  # optional glob for validity .npy files
    confidence_floor: float = 0.0
    window: dict = field(default_factory=lambda: {"mode": "fixed", "size": 10, "overlap": 5})
    name: str = "ingested"

    @classmethod
    def from_json(cls, obj: dict, base: Path) -> "AdapterConfig":
        def resolve(pattern):
            if pattern is None:
                return None
            p = Path(pattern)
            return str(p if p.is_absolute() else base / p)

        window = dict(obj.get("window", {"mode": "fixed", "size": 10, "overlap": 5}))
        if window.get("mode") == "file" and "path" in window:
            window["path"] = resolve(window["path"])
        cfg = cls(
            detections=resolve(obj["detections"]),
            pointmaps=resolve(obj["pointmaps"]),
            valids=resolve(obj.get("valids")),
            confidence_floor=float(obj.get("confidence_floor", 0.0)),
            window=window,
            name=str(obj.get("name", "ingested")),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not (0.0 <= self.confidence_floor <= 1.0):
            raise IngestError(
                f"confidence floor {self.confidence_floor} outside [0, 1]"
            )
        mode = self.window.get("mode")
        if mode not in ("fixed", "single", "file"):
            raise IngestError(f"unknown window grouping mode {mode!r}")


@dataclass
class ConvertStats:
    frames: int = 0
    detections: int = 0
    dropped_low_confidence: int = 0


def _expand(pattern: str, what: str) -> list[Path]:
    paths = sorted(Path(p) for p in glob.glob(pattern))
    if not paths:
        raise IngestError(f"no {what} matched pattern {pattern!r}")
    return paths


def _load_array(path: Path, frame: int) -> np.ndarray:
    try:
        return np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise IngestError(f"unreadable array: {e}", frame=frame, path=path)


def _mask_runs(det: dict, dims, det_path: Path, frame: int) -> list[list[int]]:
    if "mask_rle" in det:
        rle = det["mask_rle"]
        if tuple(rle.get("size", ())) != tuple(dims):
            raise IngestError(
                f"mask size {rle.get('size')} does not match frame dims {list(dims)}",
                frame=frame,
                path=det_path,
            )
        runs = rle.get("runs", [])
        problem = check_runs(runs, dims)
        if problem:
            raise IngestError(f"bad mask run-length data: {problem}", frame=frame, path=det_path)
        return [list(map(int, r)) for r in runs]
    if "mask_npy" in det:
        mask_path = det_path.parent / det["mask_npy"]
        bitmap = _load_array(mask_path, frame)
        if bitmap.shape != tuple(dims):
            raise IngestError(
                f"mask array shape {bitmap.shape} does not match frame dims {list(dims)}",
                frame=frame,
                path=mask_path,
            )
        return rle_encode(bitmap.astype(bool))
    raise IngestError("detection carries neither mask_rle nor mask_npy", frame=frame, path=det_path)


def convert(config: AdapterConfig, out_dir) -> ConvertStats:
    """Write a sequence directory the engine loads with zero validation errors."""
    config.validate()
    det_paths = _expand(config.detections, "detection files")
    pm_paths = _expand(config.pointmaps, "pointmap arrays")
    if len(det_paths) != len(pm_paths):
        raise IngestError(
            f"{len(det_paths)} detection files but {len(pm_paths)} pointmaps"
        )
    valid_paths = None
    if config.valids:
        valid_paths = _expand(config.valids, "validity arrays")
        if len(valid_paths) != len(det_paths):
            raise IngestError(
                f"{len(valid_paths)} validity arrays but {len(det_paths)} frames"
            )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(det_paths)
    stats = ConvertStats(frames=n)
    dims = None

    for frame, (det_path, pm_path) in enumerate(zip(det_paths, pm_paths), start=1):
        coords = _load_array(pm_path, frame)
        if coords.ndim != 3 or coords.shape[2] != 3:
            raise IngestError(
                f"pointmap shape {coords.shape} is not (H, W, 3)", frame=frame, path=pm_path
            )
        if coords.dtype != np.float32:
            coords = coords.astype(np.float32)
        if dims is None:
            dims = coords.shape[:2]
        elif coords.shape[:2] != dims:
            raise IngestError(
                f"pointmap dims {coords.shape[:2]} differ from first frame {dims}",
                frame=frame,
                path=pm_path,
            )

        if valid_paths is not None:
            valid = _load_array(valid_paths[frame - 1], frame)
            if valid.shape != dims:
                raise IngestError(
                    f"validity shape {valid.shape} does not match {dims}",
                    frame=frame,
                    path=valid_paths[frame - 1],
                )
            valid = valid.astype(bool)
        else:
            valid = np.isfinite(coords).all(axis=2)
        coords = coords.copy()
        coords[~valid] = 0.0

        try:
            rec = json.loads(det_path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise IngestError(f"unreadable detections: {e}", frame=frame, path=det_path)
        out_dets = []
        for det in rec.get("detections", []):
            score = float(det.get("score", det.get("confidence", 1.0)))
            if score < config.confidence_floor:
                stats.dropped_low_confidence += 1
                continue
            runs = _mask_runs(det, dims, det_path, frame)
            out_dets.append(
                {
                    "bbox": [float(v) for v in det["bbox"]],
                    "mask": {"size": list(dims), "runs": runs},
                    "label": str(det.get("label", "object")),
                    "confidence": min(1.0, max(0.0, score)),
                }
            )
            stats.detections += 1
        write_frame(out, frame, out_dets, coords, valid)

    groups = _window_groups(config, n)
    write_manifest(out, config.name, n, dims, groups)
    return stats


def _window_groups(config: AdapterConfig, n_frames: int) -> list[list[int]]:
    mode = config.window.get("mode", "fixed")
    if mode == "single":
        return [[1, n_frames]]
    if mode == "file":
        path = Path(config.window["path"])
        groups = json.loads(path.read_text())
        return [[int(a), int(b)] for a, b in groups]
    return plan_window_partition(
        n_frames, int(config.window.get("size", 10)), int(config.window.get("overlap", 5))
    )
