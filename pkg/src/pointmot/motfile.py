"""MOTChallenge-style track rows and their text format.

One row per object per frame:

    frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z

Used for both ground-truth (conf = 1) and prediction files. Floats are
written with repr-level precision so scores reproduce exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import SequenceFormatError
from .interchange import BBox2D


@dataclass(frozen=True)
class TrackRow:
    frame: int
    track_id: int
    bbox: BBox2D
    conf: float
    x: float
    y: float
    z: float
    label: str = ""


class TrackTable:
    """Rows sorted by (frame, id); (frame, id) pairs are unique."""

    def __init__(self, rows: list[TrackRow]):
        self.rows = sorted(rows, key=lambda r: (r.frame, r.track_id))
        seen = set()
        for r in self.rows:
            key = (r.frame, r.track_id)
            if key in seen:
                raise SequenceFormatError(f"duplicate (frame, id) row {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, TrackTable) and self.rows == other.rows

    def frames(self) -> list[int]:
        return sorted({r.frame for r in self.rows})

    def track_ids(self) -> list[int]:
        return sorted({r.track_id for r in self.rows})

    def by_frame(self, frame: int) -> list[TrackRow]:
        return [r for r in self.rows if r.frame == frame]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_track_file(table: TrackTable, path) -> None:
    lines = []
    for r in table.rows:
        b = r.bbox
        lines.append(
            ",".join(
                [str(r.frame), str(r.track_id)]
                + [_fmt(v) for v in (b.left, b.top, b.width, b.height, r.conf, r.x, r.y, r.z)]
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_track_file(path) -> TrackTable:
    """Parse a track file; malformed rows are reported with line numbers."""
    p = Path(path)
    if not p.is_file():
        raise SequenceFormatError("missing track file", path=p)
    rows = []
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 10:
            raise SequenceFormatError(
                f"line {lineno}: expected 10 comma-separated fields, got {len(parts)}",
                path=p,
            )
        try:
            frame = int(parts[0])
            tid = int(parts[1])
            left, top, w, h, conf, x, y, z = (float(v) for v in parts[2:10])
        except ValueError as e:
            raise SequenceFormatError(f"line {lineno}: {e}", path=p)
        if frame < 1:
            raise SequenceFormatError(f"line {lineno}: frame ids start at 1", path=p)
        rows.append(
            TrackRow(frame, tid, BBox2D(left, top, w, h), conf, x, y, z)
        )
    return TrackTable(rows)
