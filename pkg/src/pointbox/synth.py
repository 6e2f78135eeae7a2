"""Synthetic LiDAR-like sequences with known ground-truth boxes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptySearch
from .geom import Box7, contains, from_canonical
from .head import FEAT_DIM, SeedBatch, encode_features
from .labeling import classification_labels, target_offsets
from .sampling import farthest_point_sample, make_rng, resample
from .tracker import augment_boxes, canonical_box, make_search, object_points


@dataclass(frozen=True)
class SceneConfig:
    object_size: tuple[float, float, float] = (1.8, 1.6, 4.2)  # (w, h, l)
    # per-frame translation in the object's own frame (lateral, forward, up)
    translation: tuple[float, float, float] = (0.0, 0.25, 0.0)
    yaw_rate: float = 0.0
    init_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    init_theta: float = 0.0
    surface_points_per_frame: int = 200
    clutter_points_per_frame: int = 300
    clutter_radius: float = 6.0
    dropout_rate: float = 0.0
    noise_sigma: float = 0.02
    # object surface sits this far inside the gt box faces (annotation slack)
    surface_inset: float = 0.0
    frames: int = 20
    seed: int = 0

    def __post_init__(self):
        if min(self.object_size) <= 0:
            raise ValueError("object sizes must be positive")
        if self.surface_points_per_frame < 0 or self.clutter_points_per_frame < 0:
            raise ValueError("point counts must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= 2 * self.surface_inset < min(self.object_size):
            raise ValueError("surface_inset must be >= 0 and leave a non-empty surface")


@dataclass
class SyntheticSequence:
    frames: list[np.ndarray]
    boxes: list[Box7]
    object_tags: list[np.ndarray] | None  # True where a point came from the object surface
    config: SceneConfig | None = None

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def in_box_counts(self) -> list[int]:
        return [int(contains(f, b).sum()) for f, b in zip(self.frames, self.boxes)]


def box_trajectory(cfg: SceneConfig) -> list[Box7]:
    w, h, l = cfg.object_size
    center = np.array(cfg.init_center, dtype=np.float64)
    theta = cfg.init_theta
    boxes = []
    for _ in range(cfg.frames):
        boxes.append(Box7(*center, w, h, l, theta))
        theta += cfg.yaw_rate
        c, s = math.cos(theta), math.sin(theta)
        tx, ty, tz = cfg.translation
        center = center + np.array([c * tx - s * ty, s * tx + c * ty, tz])
    return boxes


def sample_surface(box: Box7, n: int, rng: np.random.Generator, inset: float = 0.0) -> np.ndarray:
    """Uniform samples on the five faces other than the bottom, in world coordinates."""
    hw, hh, hl = box.w / 2 - inset, box.h / 2 - inset, box.l / 2 - inset
    areas = np.array([hw * hl, hl * hh, hl * hh, hw * hh, hw * hh])
    face = rng.choice(5, size=n, p=areas / areas.sum())
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    q = np.empty((n, 3))
    # 0: top (+z), 1/2: -x/+x sides, 3/4: -y/+y ends
    sel = face == 0
    q[sel] = np.column_stack([u[sel, 0] * hw, u[sel, 1] * hl, np.full(sel.sum(), hh)])
    for k, sign in ((1, -1.0), (2, 1.0)):
        sel = face == k
        q[sel] = np.column_stack([np.full(sel.sum(), sign * hw), u[sel, 0] * hl, u[sel, 1] * hh])
    for k, sign in ((3, -1.0), (4, 1.0)):
        sel = face == k
        q[sel] = np.column_stack([u[sel, 0] * hw, np.full(sel.sum(), sign * hl), u[sel, 1] * hh])
    return from_canonical(q, box)


def sample_clutter(box: Box7, n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in a ground-plane annulus around the box, outside its footprint."""
    r_in = math.hypot(box.w, box.l) / 2
    r_out = max(radius, r_in)
    r = np.sqrt(rng.uniform(r_in ** 2, r_out ** 2, size=n))
    phi = rng.uniform(0.0, 2 * math.pi, size=n)
    z = rng.uniform(box.z - box.h / 2, box.z + box.h / 2, size=n)
    return np.column_stack([box.x + r * np.cos(phi), box.y + r * np.sin(phi), z])


def generate_sequence(cfg: SceneConfig) -> SyntheticSequence:
    rng = make_rng(cfg.seed)
    boxes = box_trajectory(cfg)
    frames, tags = [], []
    for box in boxes:
        obj = sample_surface(box, cfg.surface_points_per_frame, rng, cfg.surface_inset)
        if cfg.noise_sigma > 0:
            obj = obj + rng.normal(0.0, cfg.noise_sigma, size=obj.shape)
        keep = rng.uniform(size=len(obj)) >= cfg.dropout_rate
        obj = obj[keep]
        clutter = sample_clutter(box, cfg.clutter_points_per_frame, cfg.clutter_radius, rng)
        frames.append(np.concatenate([obj, clutter]))
        tags.append(np.concatenate([np.ones(len(obj), bool), np.zeros(len(clutter), bool)]))
    return SyntheticSequence(frames=frames, boxes=boxes, object_tags=tags, config=cfg)


def benchmark_configs(n: int, seed: int, frames: int = 20, **overrides) -> list[SceneConfig]:
    """A varied family of car-sized scenes drawn from one master seed."""
    rng = make_rng(seed)
    out = []
    for _ in range(n):
        cfg = SceneConfig(
            object_size=(rng.uniform(1.6, 2.0), rng.uniform(1.4, 1.8), rng.uniform(3.8, 4.8)),
            translation=(rng.uniform(-0.05, 0.05), rng.uniform(0.0, 0.3), 0.0),
            yaw_rate=rng.uniform(-0.02, 0.02),
            init_center=(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-1.0, 1.0)),
            init_theta=rng.uniform(-math.pi, math.pi),
            surface_points_per_frame=int(rng.integers(60, 300)),
            clutter_points_per_frame=int(rng.integers(150, 450)),
            clutter_radius=rng.uniform(4.5, 7.0),
            dropout_rate=rng.uniform(0.0, 0.5),
            noise_sigma=rng.uniform(0.0, 0.03),
            surface_inset=0.1,
            frames=frames,
            seed=int(rng.integers(0, 2 ** 63)),
        )
        out.append(replace(cfg, **overrides) if overrides else cfg)
    return out


# -- training pairs ----------------------------------------------------------------

@dataclass(frozen=True)
class PairConfig:
    n_t: int = 512
    n_s: int = 1024
    m_s: int = 128
    search_margin: tuple[float, float, float] = (2.0, 2.0, 2.0)
    shift_max: float = 0.3
    feat_dim: int = FEAT_DIM
    seed: int = 0


@dataclass
class TrainingSample:
    """One template/search pair in the frame of the jittered reference box."""

    batch: SeedBatch
    gt: Box7  # ground truth of frame t in the reference frame
    t: np.ndarray
    c_label: np.ndarray
    seed_tags: np.ndarray | None = field(default=None, repr=False)
    sequence_index: int = 0
    frame_index: int = 0


def make_pair(seq: SyntheticSequence, t: int, cfg: PairConfig, rng: np.random.Generator,
              sequence_index: int = 0) -> TrainingSample | None:
    """Template from frames 0 and t-1, search region around frame t's jittered box."""
    first_box = augment_boxes(seq.boxes[0], rng, cfg.shift_max)
    prev_box = augment_boxes(seq.boxes[t - 1], rng, cfg.shift_max)
    ref_box = augment_boxes(seq.boxes[t], rng, cfg.shift_max)
    parts = [p for p in (object_points(seq.frames[0], first_box),
                         object_points(seq.frames[t - 1], prev_box)) if len(p)]
    if not parts:
        return None
    template = resample(np.concatenate(parts), cfg.n_t, rng)
    try:
        search, idx = make_search(seq.frames[t], ref_box, cfg.search_margin, cfg.n_s, rng,
                                  return_indices=True)
    except EmptySearch:
        return None
    seeds = farthest_point_sample(search, cfg.m_s)
    batch = encode_features(search, ref_box, template, seeds, cfg.feat_dim, frame_index=t)
    batch.ref_box = ref_box
    gt = canonical_box(seq.boxes[t], ref_box)
    return TrainingSample(
        batch=batch,
        gt=gt,
        t=target_offsets(batch.coords, gt),
        c_label=classification_labels(batch.coords, gt),
        seed_tags=None if seq.object_tags is None else seq.object_tags[t][idx[seeds]],
        sequence_index=sequence_index,
        frame_index=t,
    )


def make_training_pairs(seqs: list[SyntheticSequence], cfg: PairConfig = PairConfig()) -> list[TrainingSample]:
    """Every (sequence, t >= 1) pair; pairs with empty regions are skipped."""
    rng = make_rng(cfg.seed)
    samples = []
    for si, seq in enumerate(seqs):
        for t in range(1, len(seq)):
            sample = make_pair(seq, t, cfg, rng, si)
            if sample is not None:
                samples.append(sample)
    return samples
