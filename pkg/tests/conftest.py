import numpy as np
import pytest

from pointmot.assoc import robust_centroid
from pointmot.interchange import BBox2D
from pointmot.tracker import ObjectObservation


def make_observation(frame, points, label="obj", det_index=0):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return ObjectObservation(
        frame=frame,
        detection_index=det_index,
        bbox=BBox2D(0, 0, 4, 4),
        label=label,
        confidence=1.0,
        points=pts,
        centroid=robust_centroid(pts),
    )


def gt_to_pred_ids(table, gt):
    """Per gt object: the (frame, predicted id) series at its position."""
    series = {}
    for frame, entries in sorted(gt.frames.items()):
        rows = table.by_frame(frame)
        for e in entries:
            best = min(
                rows,
                key=lambda r: (r.x - e.center_world[0]) ** 2
                + (r.y - e.center_world[1]) ** 2
                + (r.z - e.center_world[2]) ** 2,
                default=None,
            )
            if best is not None:
                series.setdefault(e.object_id, []).append((frame, best.track_id))
    return series


def count_switches(series):
    switches = 0
    for pairs in series.values():
        ids = [tid for _, tid in pairs]
        switches += sum(1 for a, b in zip(ids, ids[1:]) if a != b)
    return switches


@pytest.fixture
def obs_factory():
    return make_observation
