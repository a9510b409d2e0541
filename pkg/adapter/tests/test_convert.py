import json

import numpy as np
import pytest

from seqingest.cli import main
from seqingest.convert import AdapterConfig, convert
from seqingest.formats import IngestError, plan_window_partition, rle_decode, rle_encode
from seqingest.validate import validate


def load_config(path):
    return AdapterConfig.from_json(json.loads(path.read_text()), path.parent)


class TestRle:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            bitmap = rng.random((9, 7)) < 0.35
            assert np.array_equal(rle_decode(rle_encode(bitmap), (9, 7)), bitmap)


class TestWindowPartition:
    def test_matches_engine_arithmetic(self):
        assert plan_window_partition(20, 8, 4) == [[1, 8], [9, 12], [13, 16], [17, 20]]
        assert plan_window_partition(2, 10, 5) == [[1, 2]]
        assert plan_window_partition(60, 10, 5)[0] == [1, 10]

    def test_rejects_bad_spec(self):
        with pytest.raises(IngestError):
            plan_window_partition(10, 5, 5)


class TestConvert:
    def test_two_frame_fixture(self, fixture_dir, tmp_path):
        config = load_config(fixture_dir / "config.json")
        stats = convert(config, tmp_path / "seq")
        assert stats.frames == 2
        assert stats.detections == 4  # two kept per frame
        assert stats.dropped_low_confidence == 2  # the 0.05-score ghost per frame
        report = validate(tmp_path / "seq")
        assert report.ok, report.render()

    def test_wrong_dims_pointmap_reports_frame(self, fixture_dir, tmp_path):
        np.save(fixture_dir / "pointmap_000002.npy", np.zeros((5, 5, 3), dtype=np.float32))
        config = load_config(fixture_dir / "config.json")
        with pytest.raises(IngestError) as err:
            convert(config, tmp_path / "seq")
        assert err.value.frame == 2

    def test_wrong_dims_mask_rejected(self, fixture_dir, tmp_path):
        det_path = fixture_dir / "dets_000001.json"
        obj = json.loads(det_path.read_text())
        obj["detections"][0]["mask_rle"]["size"] = [5, 5]
        det_path.write_text(json.dumps(obj))
        config = load_config(fixture_dir / "config.json")
        with pytest.raises(IngestError) as err:
            convert(config, tmp_path / "seq")
        assert err.value.frame == 1

    def test_confidence_floor_bounds(self):
        with pytest.raises(IngestError):
            AdapterConfig(detections="x", pointmaps="y", confidence_floor=1.5).validate()

    def test_float64_input_cast(self, fixture_dir, tmp_path):
        arr = np.load(fixture_dir / "pointmap_000001.npy").astype(np.float64)
        np.save(fixture_dir / "pointmap_000001.npy", arr)
        config = load_config(fixture_dir / "config.json")
        convert(config, tmp_path / "seq")
        assert validate(tmp_path / "seq").ok

    def test_cli_convert_exit_codes(self, fixture_dir, tmp_path, capsys):
        code = main(
            ["convert", "--config", str(fixture_dir / "config.json"), "--out", str(tmp_path / "seq")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "2 frames" in out and "dropped" in out
        # data error propagates as exit 2
        np.save(fixture_dir / "pointmap_000001.npy", np.zeros((2, 2), dtype=np.float32))
        code = main(
            ["convert", "--config", str(fixture_dir / "config.json"), "--out", str(tmp_path / "seq2")]
        )
        assert code == 2

    def test_missing_inputs_data_error(self, tmp_path, capsys):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"detections": "none_*.json", "pointmaps": "none_*.npy"}))
        assert main(["convert", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 2

    def test_usage_error_exit_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["convert"])  # missing required flags
        assert exc.value.code == 1
