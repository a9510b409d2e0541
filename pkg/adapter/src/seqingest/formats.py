"""The tracking engine's sequence directory schema, re-implemented here.

This tool runs where the engine may not be installed (e.g. next to the
model inference stack), so the small boundary codecs are duplicated by
design rather than imported:

    manifest.json                      {name, frame_count, image_dims,
                                        window_groups, frames}
    frames/<idx:06d>/detections.json   {frame, detections: [{bbox, mask,
                                        label, confidence}]}
    frames/<idx:06d>/pointmap.bin      float32 LE, H*W*3 row-major
    frames/<idx:06d>/valid.bin         uint8 {0,1}, H*W row-major

Masks are run-length encoded over row-major linear pixel indices as
sorted, non-overlapping (start, length) pairs. Window groups partition
1..N; frames of one group share a window-local coordinate frame.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FRAME_DIR_FMT = "{:06d}"


class IngestError(Exception):
    def __init__(self, message: str, *, frame: int | None = None, path=None):
        self.frame = frame
        self.path = path
        prefix = ""
        if frame is not None:
            prefix += f"frame {frame}: "
        if path is not None:
            prefix += f"{path}: "
        super().__init__(prefix + message)


def rle_encode(bitmap: np.ndarray) -> list[list[int]]:
    flat = np.asarray(bitmap, dtype=bool).ravel()
    padded = np.concatenate(([False], flat, [False]))
    changes = np.flatnonzero(padded[1:] != padded[:-1])
    starts = changes[0::2]
    ends = changes[1::2]
    return [[int(s), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(runs, dims) -> np.ndarray:
    h, w = dims
    flat = np.zeros(h * w, dtype=bool)
    for start, length in runs:
        flat[start : start + length] = True
    return flat.reshape(h, w)


def check_runs(runs, dims) -> str | None:
    """None when well-formed, else a description of the defect."""
    h, w = dims
    total = h * w
    prev_end = -1
    for run in runs:
        if len(run) != 2:
            return f"run {run} is not a (start, length) pair"
        start, length = run
        if length <= 0:
            return f"non-positive run length {length}"
        if start <= prev_end:
            return "runs out of order or overlapping"
        if start < 0 or start + length > total:
            return f"run ({start},{length}) outside {h}x{w} grid"
        prev_end = start + length - 1
    return None


def plan_window_partition(n_frames: int, window: int, overlap: int) -> list[list[int]]:
    """The engine's window grouping: full first window, then each tail."""
    if not (1 <= overlap < window):
        raise IngestError(f"need 1 <= overlap < window, got W={window} T={overlap}")
    if n_frames <= window:
        return [[1, n_frames]]
    step = window - overlap
    starts = [1]
    while starts[-1] + window - 1 < n_frames:
        starts.append(starts[-1] + step)
    parts = [[1, window]]
    for s in starts[1:]:
        parts.append([s + overlap, min(s + window - 1, n_frames)])
    return parts


def frame_dir(root: Path, frame: int) -> Path:
    return Path(root) / "frames" / FRAME_DIR_FMT.format(frame)


def write_manifest(root: Path, name: str, n_frames: int, image_dims, groups) -> None:
    obj = {
        "name": name,
        "frame_count": n_frames,
        "image_dims": list(image_dims),
        "window_groups": [list(g) for g in groups],
        "frames": [
            {"index": f, "dir": f"frames/{FRAME_DIR_FMT.format(f)}"}
            for f in range(1, n_frames + 1)
        ],
    }
    (Path(root) / "manifest.json").write_text(json.dumps(obj, indent=1) + "\n")


def write_frame(root: Path, frame: int, detections: list[dict], coords: np.ndarray,
                valid: np.ndarray) -> None:
    d = frame_dir(root, frame)
    d.mkdir(parents=True, exist_ok=True)
    rec = {"frame": frame, "detections": detections}
    (d / "detections.json").write_text(json.dumps(rec, indent=1) + "\n")
    np.ascontiguousarray(coords, dtype="<f4").tofile(d / "pointmap.bin")
    np.ascontiguousarray(valid, dtype=np.uint8).tofile(d / "valid.bin")
