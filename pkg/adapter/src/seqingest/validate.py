"""Invariant suite over a sequence directory.

Runs the same checks the engine's loader enforces and reports every
violation instead of stopping at the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import FRAME_DIR_FMT, check_runs


@dataclass
class Finding:
    message: str
    frame: int | None = None
    path: str | None = None

    def __str__(self) -> str:
        loc = ""
        if self.frame is not None:
            loc += f"frame {self.frame}: "
        if self.path:
            loc += f"{self.path}: "
        return loc + self.message


@dataclass
class ValidationReport:
    checks_run: int = 0
    failures: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, message, frame=None, path=None):
        self.failures.append(Finding(message, frame, str(path) if path else None))

    def check(self, condition, message, frame=None, path=None):
        self.checks_run += 1
        if not condition:
            self.fail(message, frame, path)
        return bool(condition)

    def render(self) -> str:
        lines = [
            f"checks run: {self.checks_run}",
            f"failures:   {len(self.failures)}",
        ]
        for f in self.failures:
            lines.append(f"  FAIL {f}")
        lines.append("RESULT " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines)


def validate(root_dir) -> ValidationReport:
    root = Path(root_dir)
    report = ValidationReport()
    manifest_path = root / "manifest.json"
    if not report.check(manifest_path.is_file(), "missing manifest.json", path=manifest_path):
        return report
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        report.fail(f"malformed manifest: {e}", path=manifest_path)
        return report

    required = ("name", "frame_count", "image_dims", "window_groups", "frames")
    for key in required:
        report.check(key in manifest, f"manifest missing key {key!r}", path=manifest_path)
    if report.failures:
        return report

    n = int(manifest["frame_count"])
    dims = tuple(manifest["image_dims"])
    report.check(n >= 1, f"frame_count must be >= 1, got {n}", path=manifest_path)
    report.check(
        len(dims) == 2 and all(int(d) > 0 for d in dims),
        f"bad image_dims {list(dims)}",
        path=manifest_path,
    )

    indices = [int(rec.get("index", -1)) for rec in manifest["frames"]]
    report.check(
        indices == list(range(1, n + 1)),
        "frame list must be exactly 1..N in order",
        path=manifest_path,
    )

    groups = [tuple(map(int, g)) for g in manifest["window_groups"]]
    expect = 1
    partitioned = bool(groups)
    for a, b in groups:
        if a != expect or b < a:
            partitioned = False
            break
        expect = b + 1
    partitioned = partitioned and expect == n + 1
    report.check(partitioned, f"window groups {groups} do not partition 1..{n}", path=manifest_path)

    h, w = (int(dims[0]), int(dims[1])) if len(dims) == 2 else (0, 0)
    for f in range(1, n + 1):
        d = root / "frames" / FRAME_DIR_FMT.format(f)
        det_path = d / "detections.json"
        pm_path = d / "pointmap.bin"
        valid_path = d / "valid.bin"
        if not report.check(det_path.is_file(), "missing detections.json", f, det_path):
            continue
        if not report.check(pm_path.is_file(), "missing pointmap.bin", f, pm_path):
            continue
        if not report.check(valid_path.is_file(), "missing valid.bin", f, valid_path):
            continue

        try:
            rec = json.loads(det_path.read_text())
        except json.JSONDecodeError as e:
            report.fail(f"malformed detections JSON: {e}", f, det_path)
            continue
        report.check(rec.get("frame") == f, f"detections record is for frame {rec.get('frame')}", f, det_path)
        for k, det in enumerate(rec.get("detections", [])):
            conf = det.get("confidence")
            report.check(
                isinstance(conf, (int, float)) and 0.0 <= conf <= 1.0,
                f"detection #{k}: confidence {conf} outside [0, 1]",
                f,
                det_path,
            )
            bbox = det.get("bbox", [])
            ok_box = (
                len(bbox) == 4
                and bbox[2] > 0
                and bbox[3] > 0
                and bbox[0] < w
                and bbox[1] < h
                and bbox[0] + bbox[2] > 0
                and bbox[1] + bbox[3] > 0
            )
            report.check(ok_box, f"detection #{k}: bad bbox {bbox}", f, det_path)
            mask = det.get("mask", {})
            size = tuple(mask.get("size", ()))
            report.check(
                size == (h, w),
                f"detection #{k}: mask dims {list(size)} do not match frame dims {[h, w]}",
                f,
                det_path,
            )
            problem = check_runs(mask.get("runs", []), (h, w))
            report.check(
                problem is None,
                f"detection #{k}: mask decode failure: {problem}",
                f,
                det_path,
            )

        coords = np.fromfile(pm_path, dtype="<f4")
        if report.check(
            coords.size == h * w * 3,
            f"pointmap blob holds {coords.size} floats, expected {h * w * 3}",
            f,
            pm_path,
        ):
            coords = coords.reshape(h, w, 3)
        else:
            coords = None
        valid = np.fromfile(valid_path, dtype=np.uint8)
        if report.check(
            valid.size == h * w,
            f"validity blob holds {valid.size} bytes, expected {h * w}",
            f,
            valid_path,
        ):
            valid = valid.reshape(h, w)
            report.check(
                bool(np.isin(valid, (0, 1)).all()),
                "validity bytes must be 0 or 1",
                f,
                valid_path,
            )
            if coords is not None:
                report.check(
                    bool(np.isfinite(coords[valid.astype(bool)]).all()),
                    "non-finite coordinates at valid pixels",
                    f,
                    pm_path,
                )
    return report
