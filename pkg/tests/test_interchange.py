import json

import numpy as np
import pytest

from pointmot.errors import SequenceFormatError
from pointmot.interchange import (
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


def naive_decode(mask: SegMask) -> list[tuple[int, int]]:
    # independent per-pixel decoder used as the oracle
    h, w = mask.dims
    bitmap = np.zeros(h * w, dtype=bool)
    for start, length in mask.runs:
        for k in range(start, start + length):
            bitmap[k] = True
    return [(i // w, i % w) for i in range(h * w) if bitmap[i]]


def make_pointmap(h, w, seed=0, invalid_frac=0.0):
    rng = np.random.default_rng(seed)
    coords = rng.normal(size=(h, w, 3)).astype(np.float32)
    valid = rng.random((h, w)) >= invalid_frac
    coords[~valid] = 0.0
    return PointMap(coords, valid)


def tiny_sequence(n_frames=3, dims=(6, 8), groups=None):
    h, w = dims
    groups = groups or tuple((i, i) for i in range(1, n_frames + 1))
    manifest = SequenceManifest("tiny", n_frames, dims, tuple(groups))
    dets = {}
    pms = {}
    for f in range(1, n_frames + 1):
        bitmap = np.zeros(dims, dtype=bool)
        bitmap[1:3, 2:5] = True
        dets[f] = [
            Detection(f, BBox2D(2, 1, 3, 2), SegMask.from_bitmap(bitmap), "cup", 0.9)
        ]
        pms[f] = make_pointmap(h, w, seed=f)
    return Sequence(manifest, detections=dets, pointmaps=pms)


class TestSegMask:
    def test_empty_mask_pixels(self):
        mask = SegMask((4, 4), [])
        assert mask_pixels(mask) == []

    def test_full_2x2(self):
        mask = SegMask.from_bitmap(np.ones((2, 2), dtype=bool))
        assert mask_pixels(mask) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_random_masks_match_naive_decoder(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            h, w = rng.integers(1, 12, size=2)
            bitmap = rng.random((h, w)) < rng.uniform(0.0, 0.9)
            mask = SegMask.from_bitmap(bitmap)
            pix = mask_pixels(mask)
            assert len(pix) == int(bitmap.sum())
            assert pix == naive_decode(mask)

    def test_encode_decode_inverse(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            bitmap = rng.random((7, 5)) < 0.4
            mask = SegMask.from_bitmap(bitmap)
            assert np.array_equal(mask.to_bitmap(), bitmap)
            again = SegMask(mask.dims, mask.runs)
            assert again == mask

    def test_rejects_overlapping_runs(self):
        with pytest.raises(SequenceFormatError):
            SegMask((2, 4), [(0, 3), (2, 2)])

    def test_rejects_run_outside_grid(self):
        with pytest.raises(SequenceFormatError):
            SegMask((2, 2), [(3, 2)])

    def test_rejects_nonpositive_length(self):
        with pytest.raises(SequenceFormatError):
            SegMask((2, 2), [(0, 0)])


class TestPointMap:
    def test_lift_is_identity_on_storage(self):
        pm = make_pointmap(5, 4, seed=1)
        for row in range(5):
            for col in range(4):
                assert np.array_equal(pm.lift(row, col), pm.coords[row, col])

    def test_rejects_nonfinite_valid_pixels(self):
        coords = np.zeros((2, 2, 3), dtype=np.float32)
        coords[0, 0, 0] = np.nan
        with pytest.raises(SequenceFormatError):
            PointMap(coords, np.ones((2, 2), dtype=bool))

    def test_nonfinite_invalid_pixels_allowed(self):
        coords = np.zeros((2, 2, 3), dtype=np.float32)
        coords[0, 0, 0] = np.inf
        valid = np.ones((2, 2), dtype=bool)
        valid[0, 0] = False
        PointMap(coords, valid)

    def test_dims_mismatch_rejected(self):
        with pytest.raises(SequenceFormatError):
            PointMap(np.zeros((2, 2, 3)), np.ones((3, 2), dtype=bool))


class TestBBox:
    def test_validate_within_bounds(self):
        BBox2D(1, 1, 2, 2).validate((4, 4))

    def test_rejects_zero_size(self):
        with pytest.raises(SequenceFormatError):
            BBox2D(0, 0, 0, 2).validate((4, 4))

    def test_rejects_fully_outside(self):
        with pytest.raises(SequenceFormatError):
            BBox2D(10, 10, 2, 2).validate((4, 4))

    def test_clamps_partial_overlap(self):
        b = BBox2D(-1, -1, 3, 3).clamped((4, 4))
        assert b.as_tuple() == (0, 0, 2, 2)


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        seq = tiny_sequence()
        save_sequence(seq, tmp_path / "seq")
        loaded = load_sequence(tmp_path / "seq")
        assert loaded.manifest == seq.manifest
        for f in seq.frame_ids():
            assert loaded.detections(f) == seq.detections(f)
            assert loaded.pointmap(f) == seq.pointmap(f)

    def test_three_frame_directory(self, tmp_path):
        seq = tiny_sequence(n_frames=3)
        save_sequence(seq, tmp_path / "seq")
        loaded = load_sequence(tmp_path / "seq")
        assert loaded.manifest.frame_count == 3
        assert len(loaded.manifest.window_groups) == 3

    def test_one_frame_single_group(self, tmp_path):
        seq = tiny_sequence(n_frames=1, groups=((1, 1),))
        save_sequence(seq, tmp_path / "seq")
        loaded = load_sequence(tmp_path / "seq")
        assert loaded.manifest.window_groups == ((1, 1),)

    def test_empty_sequence_rejected(self):
        with pytest.raises(SequenceFormatError):
            SequenceManifest("x", 0, (4, 4), ()).validate()

    def test_missing_pointmap_names_frame(self, tmp_path):
        seq = tiny_sequence()
        save_sequence(seq, tmp_path / "seq")
        (tmp_path / "seq" / "frames" / "000002" / "pointmap.bin").unlink()
        with pytest.raises(SequenceFormatError) as err:
            load_sequence(tmp_path / "seq")
        assert err.value.frame == 2

    def test_truncated_pointmap_rejected(self, tmp_path):
        seq = tiny_sequence()
        save_sequence(seq, tmp_path / "seq")
        blob = tmp_path / "seq" / "frames" / "000001" / "pointmap.bin"
        blob.write_bytes(blob.read_bytes()[:-8])
        loaded = load_sequence(tmp_path / "seq")
        with pytest.raises(SequenceFormatError) as err:
            loaded.pointmap(1)
        assert err.value.frame == 1

    def test_malformed_runs_rejected(self, tmp_path):
        seq = tiny_sequence()
        save_sequence(seq, tmp_path / "seq")
        det_path = tmp_path / "seq" / "frames" / "000001" / "detections.json"
        obj = json.loads(det_path.read_text())
        obj["detections"][0]["mask"]["runs"] = [[0, 5], [2, 3]]
        det_path.write_text(json.dumps(obj))
        loaded = load_sequence(tmp_path / "seq")
        with pytest.raises(SequenceFormatError):
            loaded.detections(1)

    def test_nonmonotone_frame_ids_rejected(self, tmp_path):
        seq = tiny_sequence()
        save_sequence(seq, tmp_path / "seq")
        man_path = tmp_path / "seq" / "manifest.json"
        obj = json.loads(man_path.read_text())
        obj["frames"][1]["index"] = 1
        man_path.write_text(json.dumps(obj))
        with pytest.raises(SequenceFormatError):
            load_sequence(tmp_path / "seq")

    def test_groups_must_partition(self):
        with pytest.raises(SequenceFormatError):
            SequenceManifest("x", 3, (4, 4), ((1, 2), (2, 3))).validate()
        with pytest.raises(SequenceFormatError):
            SequenceManifest("x", 3, (4, 4), ((1, 1), (3, 3))).validate()

    def test_pointmap_resolution_metadata(self, tmp_path):
        # pointmap at half the image resolution, declared in the manifest
        manifest = SequenceManifest(
            "scaled", 1, (8, 8), ((1, 1),), pointmap_dims=(4, 4)
        )
        coords = np.arange(4 * 4 * 3, dtype=np.float32).reshape(4, 4, 3)
        pm = PointMap(coords, np.ones((4, 4), dtype=bool))
        bitmap = np.zeros((8, 8), dtype=bool)
        bitmap[2:4, 2:4] = True
        det = Detection(1, BBox2D(2, 2, 2, 2), SegMask.from_bitmap(bitmap), "cup", 1.0)
        seq = Sequence(manifest, detections={1: [det]}, pointmaps={1: pm})
        save_sequence(seq, tmp_path / "seq")
        loaded = load_sequence(tmp_path / "seq")
        assert loaded.manifest.pointmap_dims == (4, 4)
        assert loaded.pointmap(1) == pm
        from pointmot.tracker import lift_objects

        obs, _ = lift_objects(loaded.detections(1), loaded.pointmap(1), (8, 8))
        assert np.array_equal(obs[0].points, coords[1, 1][None, :])

    def test_confidence_out_of_range_rejected(self, tmp_path):
        seq = tiny_sequence(n_frames=1, groups=((1, 1),))
        save_sequence(seq, tmp_path / "seq")
        det_path = tmp_path / "seq" / "frames" / "000001" / "detections.json"
        obj = json.loads(det_path.read_text())
        obj["detections"][0]["confidence"] = 1.5
        det_path.write_text(json.dumps(obj))
        loaded = load_sequence(tmp_path / "seq")
        with pytest.raises(SequenceFormatError):
            loaded.detections(1)
