"""Adapter output feeds the tracking engine through its public surfaces:
the sequence directory format and the engine CLI as a subprocess."""

import json
import subprocess
import sys

from seqingest.convert import AdapterConfig, convert
from seqingest.validate import validate


class TestEndToEnd:
    def test_adapter_output_tracks_cleanly(self, fixture_dir, tmp_path):
        config = AdapterConfig.from_json(
            json.loads((fixture_dir / "config.json").read_text()), fixture_dir
        )
        seq = tmp_path / "seq"
        convert(config, seq)

        report = validate(seq)
        assert report.ok, report.render()

        pred = tmp_path / "pred.txt"
        proc = subprocess.run(
            [sys.executable, "-m", "pointmot.cli", "track", str(seq), "--out", str(pred)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert pred.is_file()
        lines = [l for l in pred.read_text().splitlines() if l.strip()]
        # two frames, two kept detections each
        assert len(lines) == 4
        frames = sorted({int(l.split(",")[0]) for l in lines})
        assert frames == [1, 2]
