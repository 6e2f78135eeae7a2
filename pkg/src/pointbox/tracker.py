"""Frame-by-frame tracking: region construction, prediction, box assembly.

The head works in the frame of a reference box (the previous estimate), so
search points, seeds and predictions are canonical coordinates of that box.
Templates are kept in their own object frames.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

from .errors import EmptyBatch, EmptySearch, EmptyTemplate
from .evaluation import AlignmentResult, alignment_diagnostic
from .geom import Box7, contains, from_canonical, to_canonical, wrap_angle
from .head import FEAT_DIM, HeadOutput, SeedBatch, encode_features
from .labeling import center_aware_mask, classification_labels
from .losses import EPS
from .sampling import farthest_point_sample, make_rng, resample, resample_indices


class Predictor(Protocol):
    def predict(self, batch: SeedBatch) -> HeadOutput: ...


def crop(frame: np.ndarray, box: Box7, margin=0.0) -> np.ndarray:
    """Indices of ``frame`` points inside ``box`` enlarged by ``margin``."""
    frame = np.asarray(frame, dtype=np.float64).reshape(-1, 3)
    region = box.enlarged(margin) if np.any(np.asarray(margin) != 0) else box
    return np.flatnonzero(contains(frame, region))


def object_points(frame: np.ndarray, box: Box7) -> np.ndarray:
    """Points inside ``box``, expressed in the box frame."""
    frame = np.asarray(frame, dtype=np.float64).reshape(-1, 3)
    return to_canonical(frame[crop(frame, box)], box)


@dataclass
class TrackerState:
    first_gt: Box7
    prev_box: Box7
    first_points: np.ndarray
    prev_points: np.ndarray

    @classmethod
    def start(cls, frame0: np.ndarray, first_gt: Box7) -> "TrackerState":
        pts = object_points(frame0, first_gt)
        return cls(first_gt=first_gt, prev_box=first_gt, first_points=pts, prev_points=pts)

    def update(self, frame: np.ndarray, box: Box7) -> None:
        self.prev_box = box
        self.prev_points = object_points(frame, box)


def make_template(state: TrackerState, n_t: int, rng: np.random.Generator) -> np.ndarray:
    """Merge first-frame and previous-frame object points, resampled to ``n_t``."""
    first, prev = state.first_points, state.prev_points
    if len(first) == 0 and len(prev) == 0:
        raise EmptyTemplate("no object points in the first or previous box")
    if len(prev) == 0:
        merged = first
    elif len(first) == 0:
        merged = prev
    else:
        merged = np.concatenate([first, prev])
    return resample(merged, n_t, rng)


def make_search(frame: np.ndarray, prev_box: Box7, margin, n_s: int,
                rng: np.random.Generator, return_indices: bool = False):
    """Crop points inside ``prev_box`` grown by ``margin`` per extent, resampled to ``n_s``."""
    frame = np.asarray(frame, dtype=np.float64).reshape(-1, 3)
    idx = crop(frame, prev_box, margin)
    if len(idx) == 0:
        raise EmptySearch("search region contains no points")
    chosen = idx[resample_indices(len(idx), n_s, rng)]
    return (frame[chosen], chosen) if return_indices else frame[chosen]


def augment_boxes(gt: Box7, rng: np.random.Generator, shift_max: float = 0.3) -> Box7:
    """Jitter the center uniformly in [-shift_max, shift_max] per axis."""
    if shift_max < 0:
        raise ValueError("shift_max must be >= 0")
    if shift_max == 0:
        return gt
    shift = rng.uniform(-shift_max, shift_max, size=3)
    return gt.with_pose(gt.center + shift, gt.theta)


class Selection(NamedTuple):
    center: np.ndarray
    theta: float
    index: int
    score: float


def select_and_assemble(out: HeadOutput, seeds: np.ndarray, fuse: bool = True) -> Selection:
    """Pick the proposal maximizing ``s * c`` (``s`` alone when ``fuse`` is off)."""
    if len(out.s) == 0:
        raise EmptyBatch("no proposals to select from")
    scores = out.s * out.c if fuse else np.asarray(out.s)
    best = int(np.argmax(scores))
    center = np.asarray(seeds, dtype=np.float64).reshape(-1, 3)[best] + out.d[best]
    return Selection(center, wrap_angle(float(out.theta[best])), best, float(scores[best]))


def assemble_box(sel: Selection, ref_box: Box7, size_box: Box7) -> Box7:
    """Lift a reference-frame selection to a world box with ``size_box`` extents."""
    center = from_canonical(sel.center, ref_box)
    return size_box.with_pose(center, sel.theta + ref_box.theta)


def canonical_box(box: Box7, ref_box: Box7) -> Box7:
    return box.with_pose(to_canonical(box.center, ref_box), box.theta - ref_box.theta)


@dataclass
class TrackerConfig:
    n_t: int = 512
    n_s: int = 1024
    m_s: int = 128
    search_margin: tuple[float, float, float] = (2.0, 2.0, 2.0)
    feat_dim: int = FEAT_DIM
    fuse_classifier: bool = True
    mode: str = "long"
    seed: int = 0


@dataclass
class TrackResult:
    boxes: list[Box7]
    scores: list[float]
    empty_search: list[bool]
    alignment: list[AlignmentResult | None] = field(default_factory=list)


def prepare_region(frame, state: TrackerState, ref_box: Box7, cfg: TrackerConfig,
                   rng: np.random.Generator, frame_index: int | None = None) -> SeedBatch:
    template = make_template(state, cfg.n_t, rng)
    search = make_search(frame, ref_box, cfg.search_margin, cfg.n_s, rng)
    seeds = farthest_point_sample(search, cfg.m_s)
    return encode_features(search, ref_box, template, seeds, cfg.feat_dim, frame_index)


def track_sequence(frames: list[np.ndarray], first_gt: Box7, model: Predictor,
                   cfg: TrackerConfig = TrackerConfig(), gt_boxes: list[Box7] | None = None,
                   rng: np.random.Generator | None = None, diagnostics: bool = False) -> TrackResult:
    """Track from the first-frame box through every later frame.

    ``gt_boxes`` is only read in ``"short"`` mode (reference box = previous
    ground truth) and for the optional alignment diagnostics.
    """
    if not frames:
        raise EmptyBatch("need at least one frame")
    if cfg.mode not in ("long", "short"):
        raise ValueError(f"unknown tracking mode {cfg.mode!r}")
    if (cfg.mode == "short" or diagnostics) and gt_boxes is None:
        raise ValueError("gt_boxes required for short-term mode or diagnostics")
    rng = make_rng(cfg.seed) if rng is None else rng
    state = TrackerState.start(frames[0], first_gt)
    result = TrackResult(boxes=[first_gt], scores=[1.0], empty_search=[False], alignment=[None])
    for t in range(1, len(frames)):
        ref_box = gt_boxes[t - 1] if cfg.mode == "short" else state.prev_box
        try:
            batch = prepare_region(frames[t], state, ref_box, cfg, rng, frame_index=t)
        except EmptySearch:
            box = state.prev_box
            result.boxes.append(box)
            result.scores.append(0.0)
            result.empty_search.append(True)
            result.alignment.append(None)
            state.update(frames[t], box)
            continue
        out = model.predict(batch)
        sel = select_and_assemble(out, batch.coords, fuse=cfg.fuse_classifier)
        box = assemble_box(sel, ref_box, first_gt)
        result.boxes.append(box)
        result.scores.append(sel.score)
        result.empty_search.append(False)
        if diagnostics:
            scores = out.s * out.c if cfg.fuse_classifier else out.s
            result.alignment.append(
                alignment_diagnostic(out, batch.coords, canonical_box(gt_boxes[t], ref_box), scores))
        else:
            result.alignment.append(None)
        state.update(frames[t], box)
    return result


# -- reference predictors ------------------------------------------------------------

class BaselineHead:
    """No offsets and uniform scores: the first seed wins every frame."""

    def predict(self, batch: SeedBatch) -> HeadOutput:
        m = len(batch)
        return HeadOutput(d=np.zeros((m, 3)), theta=np.zeros(m),
                          s=np.full(m, 0.5), c=np.full(m, 0.5))


class OracleHead:
    """Predicts from ground truth: exact offsets, fg labels as class scores."""

    def __init__(self, gt_boxes: list[Box7]):
        self.gt_boxes = gt_boxes

    def predict(self, batch: SeedBatch) -> HeadOutput:
        gt = canonical_box(self.gt_boxes[batch.frame_index], batch.ref_box)
        d = gt.center - batch.coords
        cls = classification_labels(batch.coords, gt)
        cen = center_aware_mask(batch.coords + d, gt)
        m = len(batch)
        return HeadOutput(d=d, theta=np.full(m, gt.theta),
                          s=np.clip(cen, EPS, 1 - EPS), c=np.clip(cls, EPS, 1 - EPS))
