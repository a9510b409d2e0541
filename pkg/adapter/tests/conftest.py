import json

import numpy as np
import pytest


def write_two_frame_fixture(root, dims=(12, 16)):
    """Synthetic saved model outputs: two frames, two objects each."""
    h, w = dims
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(7)
    for f in (1, 2):
        coords = rng.normal(size=(h, w, 3)).astype(np.float32)
        coords[0, 0] = np.nan  # a dropout pixel; validity must mask it
        valid = np.ones((h, w), dtype=bool)
        valid[0, 0] = False
        np.save(root / f"pointmap_{f:06d}.npy", coords)
        np.save(root / f"valid_{f:06d}.npy", valid)

        mask_a = np.zeros((h, w), dtype=bool)
        mask_a[2:5, 3:7] = True
        mask_b = np.zeros((h, w), dtype=bool)
        mask_b[7:10, 9:14] = True
        np.save(root / f"mask_b_{f:06d}.npy", mask_b)
        dets = [
            {
                "bbox": [3.0, 2.0, 4.0, 3.0],
                "label": "cup",
                "score": 0.9,
                "mask_rle": {
                    "size": [h, w],
                    "runs": [[r * w + 3, 4] for r in range(2, 5)],
                },
            },
            {
                "bbox": [9.0, 7.0, 5.0, 3.0],
                "label": "plant",
                "score": 0.75,
                "mask_npy": f"mask_b_{f:06d}.npy",
            },
            {
                "bbox": [1.0, 1.0, 2.0, 2.0],
                "label": "ghost",
                "score": 0.05,
                "mask_rle": {"size": [h, w], "runs": [[w + 1, 2]]},
            },
        ]
        (root / f"dets_{f:06d}.json").write_text(json.dumps({"detections": dets}))
    config = {
        "name": "fixture",
        "detections": "dets_*.json",
        "pointmaps": "pointmap_*.npy",
        "valids": "valid_*.npy",
        "confidence_floor": 0.25,
        "window": {"mode": "fixed", "size": 10, "overlap": 5},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    return config_path


@pytest.fixture
def fixture_dir(tmp_path):
    write_two_frame_fixture(tmp_path / "model_out")
    return tmp_path / "model_out"
