"""Per-seed supervision: regression offsets, center-ness labels, masks, fg labels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import BOUNDARY_ATOL, Box7, contains, face_distances


@dataclass
class TrainTargets:
    """Supervision bundle for one search region (or a stack of them).

    Per-seed arrays have shape ``(M,)`` / ``(M, 3)``, or ``(B, M)`` /
    ``(B, M, 3)`` once stacked; ``gt_theta`` and ``fg_count`` are then ``(B,)``.
    """

    t: np.ndarray
    s_label: np.ndarray
    c_label: np.ndarray
    mask: np.ndarray
    gt_theta: np.ndarray | float
    fg_count: np.ndarray | int

    @property
    def num_seeds(self) -> int:
        return self.s_label.shape[-1]


def target_offsets(seeds, gt: Box7) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 3)
    return gt.center - seeds


def centerness_labels(proposals, gt: Box7, tau: float) -> np.ndarray:
    """1 where the proposal lies in the gt box scaled by ``tau`` (gt yaw, closed)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 3)
    return contains(proposals, gt, scale=tau).astype(np.float64)


def classification_labels(seeds, gt: Box7) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 3)
    return contains(seeds, gt, scale=1.0).astype(np.float64)


def center_aware_mask(proposals, gt: Box7) -> np.ndarray:
    """Cube root of the three min/max face-distance ratios; 0 on or outside the box.

    Face distances within ``BOUNDARY_ATOL`` count as on the face, matching the
    closed membership of ``contains``.
    """
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 3)
    fd = face_distances(proposals, gt)
    pairs = ((fd.dl, fd.dr), (fd.dt, fd.db), (fd.df, fd.dk))
    inside = np.ones(len(proposals), dtype=bool)
    prod = np.ones(len(proposals))
    for a, b in pairs:
        inside &= (a > BOUNDARY_ATOL) & (b > BOUNDARY_ATOL)
        hi = np.maximum(a, b)
        prod *= np.where(inside, np.minimum(a, b) / np.where(hi > 0, hi, 1.0), 0.0)
    return np.where(inside, np.cbrt(np.clip(prod, 0.0, 1.0)), 0.0)


def build_targets(seeds, proposals, gt: Box7, tau: float) -> TrainTargets:
    """All targets for one region; ``proposals`` are seeds plus predicted offsets."""
    c_label = classification_labels(seeds, gt)
    return TrainTargets(
        t=target_offsets(seeds, gt),
        s_label=centerness_labels(proposals, gt, tau),
        c_label=c_label,
        mask=center_aware_mask(proposals, gt),
        gt_theta=gt.theta,
        fg_count=int(c_label.sum()),
    )


def stack_targets(items: list[TrainTargets]) -> TrainTargets:
    return TrainTargets(
        t=np.stack([it.t for it in items]),
        s_label=np.stack([it.s_label for it in items]),
        c_label=np.stack([it.c_label for it in items]),
        mask=np.stack([it.mask for it in items]),
        gt_theta=np.array([it.gt_theta for it in items], dtype=np.float64),
        fg_count=np.array([it.fg_count for it in items], dtype=np.int64),
    )
