import hashlib
import json
import math

import pytest

from pointmot.cli import main
from pointmot.motfile import read_track_file


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def dir_digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def scene_json(tmp_path, **overrides):
    obj = {
        "name": "cli-scene",
        "frame_count": 30,
        "objects": [
            {"position": [0.5, 0.25, 0.75], "radius": 0.25, "label": "mug"},
            {"position": [-0.75, -0.5, 1.0], "radius": 0.25, "label": "plant"},
            {"position": [0.25, -1.0, 0.5], "radius": 0.2, "label": "chair"},
            {"position": [-0.5, 1.0, 0.5], "radius": 0.2, "label": "lamp"},
            {"position": [1.25, 1.0, 1.25], "radius": 0.2, "label": "book"},
        ],
        "camera": {"kind": "orbit", "radius": 4.0, "height": 1.8, "sweep_deg": 40.0},
        "noise_sigma": 0.0,
        "seed": 5,
    }
    obj.update(overrides)
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(obj))
    return path


class TestSimulate:
    def test_default_scene_written(self, tmp_path, capsys):
        code, out, err = run(
            ["simulate", "--out", str(tmp_path / "seq"), "--seed", "3"], capsys
        )
        assert code == 0
        assert (tmp_path / "seq" / "manifest.json").is_file()
        assert (tmp_path / "seq" / "gt.txt").is_file()
        assert "20 frames" in out and "3 objects" in out

    def test_seed_repeatability(self, tmp_path, capsys):
        for name in ("a", "b"):
            code, _, _ = run(
                ["simulate", "--out", str(tmp_path / name), "--seed", "11"], capsys
            )
            assert code == 0
        assert dir_digest(tmp_path / "a") == dir_digest(tmp_path / "b")

    def test_zero_objects_config(self, tmp_path, capsys):
        cfg = scene_json(tmp_path, objects=[], frame_count=6)
        code, out, _ = run(
            ["simulate", "--config", str(cfg), "--out", str(tmp_path / "seq")], capsys
        )
        assert code == 0
        assert "0 objects" in out

    def test_missing_config_is_data_error(self, tmp_path, capsys):
        code, _, err = run(
            ["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "s")],
            capsys,
        )
        assert code == 2


class TestTrack:
    def test_pipeline_zero_switches(self, tmp_path, capsys):
        cfg = scene_json(tmp_path)
        seq_dir = tmp_path / "seq"
        assert run(["simulate", "--config", str(cfg), "--out", str(seq_dir)], capsys)[0] == 0
        pred = tmp_path / "pred.txt"
        code, out, _ = run(["track", str(seq_dir), "--out", str(pred)], capsys)
        assert code == 0
        assert pred.is_file()
        assert (tmp_path / "pred.txt.diag.json").is_file()
        code, out, _ = run(["eval", str(seq_dir / "gt.txt"), str(pred)], capsys)
        assert code == 0
        scores = dict(
            line.split(" ", 1) for line in out.strip().splitlines() if " " in line
        )
        assert float(scores["HOTA"]) == pytest.approx(1.0, abs=1e-9)
        assert float(scores["IDF1"]) == pytest.approx(1.0, abs=1e-9)
        assert int(scores["Frag"]) == 0

    def test_memory_zero_disables_reid(self, tmp_path, capsys):
        cfg = scene_json(
            tmp_path,
            frame_count=20,
            objects=[
                {"position": [0.5, 0.25, 0.75], "radius": 0.25, "label": "mug",
                 "visible": [[1, 6], [12, 20]]},
                {"position": [-0.75, -0.5, 1.0], "radius": 0.25, "label": "plant"},
            ],
        )
        seq_dir = tmp_path / "seq"
        run(["simulate", "--config", str(cfg), "--out", str(seq_dir)], capsys)
        with_memory = tmp_path / "m30.txt"
        without = tmp_path / "m0.txt"
        run(["track", str(seq_dir), "--out", str(with_memory)], capsys)
        run(["track", str(seq_dir), "--out", str(without), "--memory-frames", "0"], capsys)
        assert len(read_track_file(with_memory).track_ids()) == 2
        assert len(read_track_file(without).track_ids()) == 3

    def test_overlap_equals_window_is_usage_error(self, tmp_path, capsys):
        code, _, err = run(
            [
                "track", str(tmp_path), "--out", str(tmp_path / "p.txt"),
                "--overlap", "10", "--window-size", "10",
            ],
            capsys,
        )
        assert code == 1

    def test_missing_sequence_is_data_error(self, tmp_path, capsys):
        code, _, _ = run(
            ["track", str(tmp_path / "missing"), "--out", str(tmp_path / "p.txt")],
            capsys,
        )
        assert code == 2

    def test_iterative_align_mode_matches_closed_form_ids(self, tmp_path, capsys):
        cfg = scene_json(tmp_path)
        seq_dir = tmp_path / "seq"
        run(["simulate", "--config", str(cfg), "--out", str(seq_dir)], capsys)
        closed = tmp_path / "closed.txt"
        iterative = tmp_path / "iter.txt"
        assert run(["track", str(seq_dir), "--out", str(closed)], capsys)[0] == 0
        assert run(
            ["track", str(seq_dir), "--out", str(iterative), "--align-mode", "iterative"],
            capsys,
        )[0] == 0
        ids_closed = [(r.frame, r.track_id) for r in read_track_file(closed).rows]
        ids_iter = [(r.frame, r.track_id) for r in read_track_file(iterative).rows]
        assert ids_closed == ids_iter


class TestEval:
    def test_gt_against_itself(self, tmp_path, capsys):
        cfg = scene_json(tmp_path)
        seq_dir = tmp_path / "seq"
        run(["simulate", "--config", str(cfg), "--out", str(seq_dir)], capsys)
        code, out, _ = run(
            ["eval", str(seq_dir / "gt.txt"), str(seq_dir / "gt.txt")], capsys
        )
        assert code == 0
        scores = dict(line.split(" ", 1) for line in out.strip().splitlines())
        assert float(scores["HOTA"]) == 1.0
        assert int(scores["Frag"]) == 0

    def test_split_fixture_value(self, tmp_path, capsys):
        gt = tmp_path / "gt.txt"
        pred = tmp_path / "pred.txt"
        gt.write_text(
            "".join(f"{f},1,0,0,10,10,1,0,0,0\n" for f in range(1, 11))
        )
        pred.write_text(
            "".join(f"{f},1,0,0,10,10,1,0,0,0\n" for f in range(1, 6))
            + "".join(f"{f},2,0,0,10,10,1,0,0,0\n" for f in range(6, 11))
        )
        code, out, _ = run(["eval", str(gt), str(pred), "--report", str(tmp_path / "r.json")], capsys)
        assert code == 0
        scores = dict(line.split(" ", 1) for line in out.strip().splitlines())
        assert float(scores["HOTA"]) == pytest.approx(math.sqrt(0.5), abs=1e-6)
        assert float(scores["IDF1"]) == pytest.approx(0.5, abs=1e-6)
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["HOTA"] == pytest.approx(math.sqrt(0.5), abs=1e-9)
        assert report["IDF1"] == pytest.approx(0.5, abs=1e-9)

    def test_dist3d_similarity_end_to_end(self, tmp_path, capsys):
        cfg = scene_json(tmp_path)
        seq_dir = tmp_path / "seq"
        run(["simulate", "--config", str(cfg), "--out", str(seq_dir)], capsys)
        pred = tmp_path / "pred.txt"
        run(["track", str(seq_dir), "--out", str(pred)], capsys)
        code, out, _ = run(
            ["eval", str(seq_dir / "gt.txt"), str(pred), "--similarity", "dist3d"],
            capsys,
        )
        assert code == 0
        scores = dict(line.split(" ", 1) for line in out.strip().splitlines())
        assert float(scores["HOTA"]) == pytest.approx(1.0, abs=1e-6)

    def test_alpha_steps_out_of_range_is_usage_error(self, tmp_path, capsys):
        gt = tmp_path / "gt.txt"
        gt.write_text("1,1,0,0,10,10,1,0,0,0\n")
        code, _, err = run(["eval", str(gt), str(gt), "--alpha-steps", "25"], capsys)
        assert code == 1

    def test_malformed_row_names_line(self, tmp_path, capsys):
        gt = tmp_path / "gt.txt"
        gt.write_text("1,1,0,0,10,10,1,0,0,0\nnot-a-row\n")
        code, _, err = run(["eval", str(gt), str(gt)], capsys)
        assert code == 2
        assert "line 2" in err

    def test_unknown_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--bogus"])
        assert exc.value.code == 1
