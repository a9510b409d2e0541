"""Sequence directory -> model-output layout (the reverse of convert).

Produces the file shapes convert() consumes: per-frame detection JSON
(with RLE masks), pointmap .npy arrays and validity .npy arrays, plus an
adapter config pointing at them. Coordinates are copied bit-exactly
(float32 in, float32 out), so convert(export(dir)) reproduces dir's
coordinate data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .formats import FRAME_DIR_FMT, IngestError


def export(seq_dir, out_dir) -> dict:
    """Returns the adapter config (also written as config.json)."""
    root = Path(seq_dir)
    out = Path(out_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise IngestError("missing manifest.json", path=manifest_path)
    manifest = json.loads(manifest_path.read_text())
    n = int(manifest["frame_count"])
    h, w = (int(v) for v in manifest["image_dims"])
    out.mkdir(parents=True, exist_ok=True)

    for f in range(1, n + 1):
        d = root / "frames" / FRAME_DIR_FMT.format(f)
        rec = json.loads((d / "detections.json").read_text())
        dets = []
        for det in rec.get("detections", []):
            dets.append(
                {
                    "bbox": det["bbox"],
                    "label": det["label"],
                    "score": det["confidence"],
                    "mask_rle": {"size": det["mask"]["size"], "runs": det["mask"]["runs"]},
                }
            )
        (out / f"dets_{f:06d}.json").write_text(
            json.dumps({"detections": dets}, indent=1) + "\n"
        )
        coords = np.fromfile(d / "pointmap.bin", dtype="<f4")
        if coords.size != h * w * 3:
            raise IngestError(
                f"pointmap blob holds {coords.size} floats, expected {h * w * 3}",
                frame=f,
                path=d / "pointmap.bin",
            )
        np.save(out / f"pointmap_{f:06d}.npy", coords.reshape(h, w, 3))
        valid = np.fromfile(d / "valid.bin", dtype=np.uint8)
        if valid.size != h * w:
            raise IngestError(
                f"validity blob holds {valid.size} bytes, expected {h * w}",
                frame=f,
                path=d / "valid.bin",
            )
        np.save(out / f"valid_{f:06d}.npy", valid.reshape(h, w).astype(bool))

    groups_path = out / "window_groups.json"
    groups_path.write_text(json.dumps(manifest["window_groups"]) + "\n")
    config = {
        "name": manifest.get("name", "exported"),
        "detections": "dets_*.json",
        "pointmaps": "pointmap_*.npy",
        "valids": "valid_*.npy",
        "confidence_floor": 0.0,
        "window": {"mode": "file", "path": "window_groups.json"},
    }
    (out / "config.json").write_text(json.dumps(config, indent=1) + "\n")
    return config
