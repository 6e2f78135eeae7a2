"""One Pass Evaluation (Success / Precision) and the score-vs-IoU diagnostic."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .errors import EmptyBatch, LengthMismatch
from .geom import Box7, center_distance, iou3d, wrap_angle

GRID_POINTS = 100
PRECISION_CAP = 2.0
# comparisons against thresholds allow this much round-off
THRESHOLD_ATOL = 1e-9
SPARSITY_EDGES = (0, 10, 20, 30, 40, 50)


def success_curve(ious, thresholds) -> np.ndarray:
    """Fraction of frames with IoU >= each threshold; zero-overlap frames never count."""
    ious = np.asarray(ious, dtype=np.float64)[:, None]
    hit = (ious >= np.asarray(thresholds)[None, :] - THRESHOLD_ATOL) & (ious > THRESHOLD_ATOL)
    return hit.mean(axis=0)


def precision_curve(errors, thresholds) -> np.ndarray:
    errors = np.asarray(errors, dtype=np.float64)[:, None]
    return (errors <= np.asarray(thresholds)[None, :] + THRESHOLD_ATOL).mean(axis=0)


def auc(curve: np.ndarray, thresholds: np.ndarray) -> float:
    """Trapezoidal area normalized by the threshold range, in percent."""
    span = thresholds[-1] - thresholds[0]
    return float(100.0 * np.trapezoid(curve, thresholds) / span)


@dataclass
class OpeReport:
    success: float
    precision: float
    per_frame: list[tuple[float, float]]
    sparsity_buckets: dict[str, "OpeReport"] = field(default_factory=dict)

    @property
    def frame_count(self) -> int:
        return len(self.per_frame)

    @property
    def ious(self) -> np.ndarray:
        return np.array([f[0] for f in self.per_frame])

    @property
    def center_errors(self) -> np.ndarray:
        return np.array([f[1] for f in self.per_frame])


def report_from_frames(per_frame, grid_points: int = GRID_POINTS,
                       precision_cap: float = PRECISION_CAP) -> OpeReport:
    per_frame = [(float(i), float(e)) for i, e in per_frame]
    if not per_frame:
        raise LengthMismatch("no frames to evaluate")
    ious = np.array([f[0] for f in per_frame])
    errs = np.array([f[1] for f in per_frame])
    iou_grid = np.linspace(0.0, 1.0, grid_points)
    err_grid = np.linspace(0.0, precision_cap, grid_points)
    return OpeReport(
        success=auc(success_curve(ious, iou_grid), iou_grid),
        precision=auc(precision_curve(errs, err_grid), err_grid),
        per_frame=per_frame,
    )


def ope(pred: list[Box7], gt: list[Box7], grid_points: int = GRID_POINTS,
        precision_cap: float = PRECISION_CAP) -> OpeReport:
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predicted boxes vs {len(gt)} ground-truth boxes")
    if not gt:
        raise LengthMismatch("need at least one frame")
    frames = [(iou3d(p, g), center_distance(p, g)) for p, g in zip(pred, gt)]
    return report_from_frames(frames, grid_points, precision_cap)


def merge_reports(reports: list[OpeReport], **kw) -> OpeReport:
    """Pool per-frame results, which frame-weights every sequence."""
    return report_from_frames([f for r in reports for f in r.per_frame], **kw)


def sparsity_label(count: int) -> str | None:
    for lo, hi in zip(SPARSITY_EDGES[:-1], SPARSITY_EDGES[1:]):
        if lo <= count < hi:
            return f"[{lo},{hi})"
    return None


def bucket_by_sparsity(reports: dict[str, OpeReport], first_counts: dict[str, int]) -> dict[str, OpeReport]:
    """Group sequences by the number of object points in their first frame."""
    groups: dict[str, list[OpeReport]] = {}
    for sid, rep in reports.items():
        label = sparsity_label(first_counts[sid])
        if label is not None:
            groups.setdefault(label, []).append(rep)
    return {k: merge_reports(v) for k, v in sorted(groups.items(), key=lambda kv: int(kv[0][1:].split(",")[0]))}


# -- score / quality alignment ----------------------------------------------------

@dataclass
class AlignmentResult:
    scores: np.ndarray
    ious: np.ndarray
    spearman: float
    selected_iou: float
    max_iou: float

    @property
    def gap(self) -> float:
        return self.max_iou - self.selected_iou

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.scores.tolist(), self.ious.tolist()))


def proposal_ious(out, seeds, gt: Box7) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 3)
    centers = seeds + np.asarray(out.d).reshape(-1, 3)
    thetas = wrap_angle(np.asarray(out.theta, dtype=np.float64).reshape(-1))
    return np.array([iou3d(gt.with_pose(c, th), gt) for c, th in zip(centers, thetas)])


def rank_correlation(scores, ious) -> float:
    """Spearman correlation with average ranks for ties; 0 if either side is constant."""
    scores, ious = np.asarray(scores), np.asarray(ious)
    if np.ptp(scores) == 0 or np.ptp(ious) == 0:
        return 0.0
    return float(spearmanr(scores, ious).statistic)


def alignment_diagnostic(out, seeds, gt: Box7, scores=None) -> AlignmentResult:
    """Compare proposal scores (default ``s * c``) against proposal IoU with ``gt``.

    Proposals are boxes of the gt size centred at ``p_i + d_i`` with yaw
    ``theta_i``; ``seeds`` and ``gt`` must share a frame.
    """
    if len(out.s) < 2:
        raise EmptyBatch("alignment needs at least two proposals")
    ious = proposal_ious(out, seeds, gt)
    scores = np.asarray(out.s * out.c if scores is None else scores, dtype=np.float64)
    best = int(np.argmax(scores))
    return AlignmentResult(
        scores=scores,
        ious=ious,
        spearman=rank_correlation(scores, ious),
        selected_iou=float(ious[best]),
        max_iou=float(ious.max()),
    )
