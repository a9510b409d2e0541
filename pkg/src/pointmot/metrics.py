"""Tracking evaluation: HOTA (DetA/AssA), IDF1 and MT/ML/Frag.

Per localization threshold alpha, detections are matched per frame by a
Hungarian matching over pairs with similarity >= alpha, maximizing match
count first and the association-aware score (global alignment score times
similarity) second. DetA_a = TP/(TP+FN+FP); AssA_a averages, over TPs,
the Jaccard association score of each (gt id, pred id) combo;
HOTA_a = sqrt(DetA_a * AssA_a) and aggregates are means over alpha.

IDF1 follows the identity-measure convention: a single global bipartite
matching between gt ids and pred ids maximizes identity-consistent
detection matches (IDTP), with per-frame hits decided at a fixed
similarity threshold.

MT/ML use coverage of each gt trajectory under the per-frame matching at
the CLEAR threshold (mostly tracked >= 0.8, mostly lost <= 0.2); Frag
counts tracked-gap-tracked transitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError
from .motfile import TrackTable

IOU = "iou"
DIST3D = "dist3d"

_EPS = 1e-12


@dataclass
class EvalConfig:
    similarity: str = IOU
    dist3d_max: float = 1.0
    alphas: tuple[float, ...] = tuple(np.round(np.arange(0.05, 0.96, 0.05), 2))
    mt_threshold: float = 0.8
    ml_threshold: float = 0.2
    clear_sim_threshold: float = 0.5
    id_sim_threshold: float = 0.5

    def validate(self) -> None:
        if self.similarity not in (IOU, DIST3D):
            raise ConfigError(f"unknown similarity mode {self.similarity!r}")
        if not self.alphas:
            raise ConfigError("alpha set must be non-empty")
        if list(self.alphas) != sorted(self.alphas):
            raise ConfigError("alpha set must be sorted")
        for t in (*self.alphas, self.mt_threshold, self.ml_threshold,
                  self.clear_sim_threshold, self.id_sim_threshold):
            if not (0.0 < t < 1.0):
                raise ConfigError(f"thresholds must lie in (0, 1), got {t}")
        if self.dist3d_max <= 0:
            raise ConfigError("dist3d_max must be positive")


@dataclass
class EvalReport:
    hota: float
    deta: float
    assa: float
    idf1: float
    mt: int
    ml: int
    frag: int
    per_alpha: list[dict] = field(default_factory=list)
    vacuous: bool = False  # both tables empty: scores are 1.0 by definition

    def to_json(self) -> dict:
        return {
            "HOTA": self.hota,
            "DetA": self.deta,
            "AssA": self.assa,
            "IDF1": self.idf1,
            "MT": self.mt,
            "ML": self.ml,
            "Frag": self.frag,
            "vacuous": self.vacuous,
            "per_alpha": self.per_alpha,
        }


def box_iou(a, b) -> float:
    ax1, ay1 = a.left, a.top
    ax2, ay2 = a.left + a.width, a.top + a.height
    bx1, by1 = b.left, b.top
    bx2, by2 = b.left + b.width, b.top + b.height
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.width * a.height + b.width * b.height - inter
    return float(inter / union) if union > 0 else 0.0


class _EvalData:
    """Tables reindexed to dense id ranges with per-frame similarities."""

    def __init__(self, gt: TrackTable, pred: TrackTable, config: EvalConfig):
        self.gt_ids = gt.track_ids()
        self.pred_ids = pred.track_ids()
        gmap = {g: i for i, g in enumerate(self.gt_ids)}
        pmap = {p: i for i, p in enumerate(self.pred_ids)}
        self.n_gt = len(self.gt_ids)
        self.n_pred = len(self.pred_ids)
        frames = sorted(set(gt.frames()) | set(pred.frames()))
        self.frames = frames
        self.gt_by_frame = {}
        self.pred_by_frame = {}
        self.sim_by_frame = {}
        for f in frames:
            grows = gt.by_frame(f)
            prows = pred.by_frame(f)
            self.gt_by_frame[f] = ([gmap[r.track_id] for r in grows], grows)
            self.pred_by_frame[f] = ([pmap[r.track_id] for r in prows], prows)
            sim = np.zeros((len(grows), len(prows)))
            for i, gr in enumerate(grows):
                for j, pr in enumerate(prows):
                    if config.similarity == IOU:
                        sim[i, j] = box_iou(gr.bbox, pr.bbox)
                    else:
                        d = np.linalg.norm(
                            np.array([gr.x, gr.y, gr.z]) - np.array([pr.x, pr.y, pr.z])
                        )
                        sim[i, j] = max(0.0, 1.0 - d / config.dist3d_max)
            self.sim_by_frame[f] = sim
        self.gt_count = np.zeros(self.n_gt)
        self.pred_count = np.zeros(self.n_pred)
        for f in frames:
            for gi in self.gt_by_frame[f][0]:
                self.gt_count[gi] += 1
            for pi in self.pred_by_frame[f][0]:
                self.pred_count[pi] += 1

    def global_alignment(self) -> np.ndarray:
        """Jaccard alignment score between every gt id and pred id."""
        potential = np.zeros((self.n_gt, self.n_pred))
        for f in self.frames:
            gis = self.gt_by_frame[f][0]
            pis = self.pred_by_frame[f][0]
            sim = self.sim_by_frame[f]
            if not gis or not pis:
                continue
            denom = sim.sum(0)[None, :] + sim.sum(1)[:, None] - sim
            weight = np.where(denom > _EPS, sim / np.maximum(denom, _EPS), 0.0)
            potential[np.ix_(gis, pis)] += weight
        denom = self.gt_count[:, None] + self.pred_count[None, :] - potential
        return potential / np.maximum(denom, 1.0)


def _best_matching(score: np.ndarray, eligible: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-cardinality matching over eligible pairs, max score second."""
    if score.size == 0 or not eligible.any():
        return []
    offset = float(np.abs(score[eligible]).sum()) + 1.0
    padded = np.where(eligible, score + offset, 0.0)
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if eligible[i, j]]


def match_frames(gt: TrackTable, pred: TrackTable, config: EvalConfig, alpha: float) -> list[dict]:
    """Per-frame optimal matching at one localization threshold.

    Returns one record per frame: matched (gt id, pred id, similarity)
    triples plus false-positive / false-negative counts.
    """
    config.validate()
    data = _EvalData(gt, pred, config)
    ga = data.global_alignment()
    out = []
    for f in data.frames:
        gis, grows = data.gt_by_frame[f]
        pis, prows = data.pred_by_frame[f]
        sim = data.sim_by_frame[f]
        eligible = sim >= alpha - _EPS
        score = ga[np.ix_(gis, pis)] * sim if gis and pis else sim
        pairs = _best_matching(score, eligible)
        out.append(
            {
                "frame": f,
                "pairs": [
                    (grows[i].track_id, prows[j].track_id, float(sim[i, j])) for i, j in pairs
                ],
                "fn": len(gis) - len(pairs),
                "fp": len(pis) - len(pairs),
            }
        )
    return out


def hota(gt: TrackTable, pred: TrackTable, config: EvalConfig | None = None):
    """HOTA with its DetA/AssA components, averaged over the alpha set.

    Returns (hota, deta, assa, per_alpha, vacuous).
    """
    config = config or EvalConfig()
    config.validate()
    if len(gt) == 0 and len(pred) == 0:
        per = [
            {"alpha": float(a), "DetA": 1.0, "AssA": 1.0, "HOTA": 1.0}
            for a in config.alphas
        ]
        return 1.0, 1.0, 1.0, per, True

    data = _EvalData(gt, pred, config)
    ga = data.global_alignment()
    per_alpha = []
    for alpha in config.alphas:
        tp = fp = fn = 0
        matches = np.zeros((data.n_gt, data.n_pred))
        for f in data.frames:
            gis, _ = data.gt_by_frame[f]
            pis, _ = data.pred_by_frame[f]
            sim = data.sim_by_frame[f]
            eligible = sim >= alpha - _EPS
            score = ga[np.ix_(gis, pis)] * sim if gis and pis else sim
            pairs = _best_matching(score, eligible)
            tp += len(pairs)
            fn += len(gis) - len(pairs)
            fp += len(pis) - len(pairs)
            for i, j in pairs:
                matches[gis[i], pis[j]] += 1
        deta = tp / max(1, tp + fn + fp)
        if tp > 0:
            combo = matches / np.maximum(
                1.0, data.gt_count[:, None] + data.pred_count[None, :] - matches
            )
            assa = float((matches * combo).sum() / tp)
        else:
            assa = 0.0
        per_alpha.append(
            {
                "alpha": float(alpha),
                "DetA": float(deta),
                "AssA": assa,
                "HOTA": float(np.sqrt(deta * assa)),
            }
        )
    h = float(np.mean([r["HOTA"] for r in per_alpha]))
    d = float(np.mean([r["DetA"] for r in per_alpha]))
    a = float(np.mean([r["AssA"] for r in per_alpha]))
    return h, d, a, per_alpha, False


def idf1(gt: TrackTable, pred: TrackTable, config: EvalConfig | None = None) -> float:
    """Identity F1 under the optimal global id-to-id matching."""
    config = config or EvalConfig()
    config.validate()
    if len(gt) == 0 and len(pred) == 0:
        return 1.0
    if len(gt) == 0 or len(pred) == 0:
        return 0.0
    data = _EvalData(gt, pred, config)
    overlap = np.zeros((data.n_gt, data.n_pred))
    for f in data.frames:
        gis, _ = data.gt_by_frame[f]
        pis, _ = data.pred_by_frame[f]
        sim = data.sim_by_frame[f]
        for i, gi in enumerate(gis):
            for j, pi in enumerate(pis):
                if sim[i, j] >= config.id_sim_threshold - _EPS:
                    overlap[gi, pi] += 1
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    idtp = float(overlap[rows, cols].sum())
    total_gt = float(data.gt_count.sum())
    total_pred = float(data.pred_count.sum())
    return 2.0 * idtp / (total_gt + total_pred)


def clear_counts(gt: TrackTable, pred: TrackTable, config: EvalConfig | None = None) -> tuple[int, int, int]:
    """(MT, ML, Frag) from per-frame matching at the CLEAR threshold."""
    config = config or EvalConfig()
    config.validate()
    if len(gt) == 0:
        return 0, 0, 0
    data = _EvalData(gt, pred, config)
    matched: dict[int, list[bool]] = {gi: [] for gi in range(data.n_gt)}
    for f in data.frames:
        gis, _ = data.gt_by_frame[f]
        pis, _ = data.pred_by_frame[f]
        sim = data.sim_by_frame[f]
        eligible = sim >= config.clear_sim_threshold - _EPS
        pairs = _best_matching(sim, eligible)
        hit = {i for i, _ in pairs}
        for i, gi in enumerate(gis):
            matched[gi].append(i in hit)
    mt = ml = frag = 0
    for gi in range(data.n_gt):
        flags = matched[gi]
        if not flags:
            continue
        coverage = sum(flags) / len(flags)
        if coverage >= config.mt_threshold:
            mt += 1
        if coverage <= config.ml_threshold:
            ml += 1
        # count tracked -> untracked -> tracked transitions
        in_gap = False
        seen_track = False
        for flag in flags:
            if flag:
                if seen_track and in_gap:
                    frag += 1
                seen_track = True
                in_gap = False
            elif seen_track:
                in_gap = True
    return mt, ml, frag


def evaluate(gt: TrackTable, pred: TrackTable, config: EvalConfig | None = None) -> EvalReport:
    """Full report: HOTA family, IDF1 and the CLEAR counts."""
    config = config or EvalConfig()
    h, d, a, per_alpha, vacuous = hota(gt, pred, config)
    f1 = idf1(gt, pred, config)
    mt, ml, frag = clear_counts(gt, pred, config)
    return EvalReport(
        hota=h, deta=d, assa=a, idf1=f1, mt=mt, ml=ml, frag=frag,
        per_alpha=per_alpha, vacuous=vacuous,
    )
