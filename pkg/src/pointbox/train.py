"""Mini-batch training of the head with Adam and a step-decay schedule."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .head import PointBoxHead
from .labeling import TrainTargets, center_aware_mask, centerness_labels
from .losses import LossWeights, total_loss_graph
from .sampling import make_rng
from .synth import TrainingSample

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 160
    lr: float = 1e-3
    lr_decay: float = 0.2
    lr_decay_every: int = 40
    batch_size: int = 16
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    total: float
    offset: float
    orientation: float
    centerness: float
    classifier: float
    degenerate_regions: int
    positives: float = 0.0  # mean center-ness positives per region


def step_targets(samples: list[TrainingSample], d: np.ndarray, tau: float) -> TrainTargets:
    """Targets for a stack of regions given the current offsets ``d`` of shape (B, M, 3).

    Center-ness labels and masks follow the proposals, so they are recomputed
    every step; they enter the loss as constants.
    """
    s_label, mask = [], []
    for sample, d_b in zip(samples, d):
        proposals = sample.batch.coords + d_b
        s_label.append(centerness_labels(proposals, sample.gt, tau))
        mask.append(center_aware_mask(proposals, sample.gt))
    c_label = np.stack([s.c_label for s in samples])
    return TrainTargets(
        t=np.stack([s.t for s in samples]),
        s_label=np.stack(s_label),
        c_label=c_label,
        mask=np.stack(mask),
        gt_theta=np.array([s.gt.theta for s in samples]),
        fg_count=c_label.sum(axis=1).astype(np.int64),
    )


def forward_batch(head: PointBoxHead, samples: list[TrainingSample]):
    """Run the head over a stack of regions; returns (B, M, ...) output tensors."""
    b, m = len(samples), len(samples[0].batch)
    x = np.concatenate([s.batch.inputs() for s in samples])
    out = head.forward(x)
    return (ad.reshape(out["d"], (b, m, 3)), ad.reshape(out["theta"], (b, m)),
            ad.reshape(out["s"], (b, m)), ad.reshape(out["c"], (b, m)))


def batch_loss(head: PointBoxHead, samples: list[TrainingSample], weights: LossWeights):
    d, theta, s, c = forward_batch(head, samples)
    targets = step_targets(samples, d.value, weights.tau)
    total, terms = total_loss_graph(d, theta, s, c, targets, weights)
    return total, terms, targets


def train(head: PointBoxHead, samples: list[TrainingSample], cfg: TrainConfig,
          optimizer: ad.Adam | None = None) -> list[EpochLog]:
    """Train in place and return one log row per epoch."""
    if not samples and cfg.epochs > 0:
        raise ValueError("no training samples")
    rng = make_rng(cfg.seed)
    opt = optimizer or ad.Adam(head.params.values(), lr=cfg.lr)
    history = []
    for epoch in range(cfg.epochs):
        opt.lr = ad.step_decay_lr(epoch, cfg.lr, cfg.lr_decay, cfg.lr_decay_every)
        order = rng.permutation(len(samples))
        sums = np.zeros(5)
        degenerate = 0
        positives = 0.0
        for start in range(0, len(order), cfg.batch_size):
            chunk = [samples[i] for i in order[start:start + cfg.batch_size]]
            opt.zero_grad()
            total, terms, targets = batch_loss(head, chunk, cfg.weights)
            ad.backward(total)
            opt.step()
            sums += len(chunk) * np.array([total.value] + [float(t.value) for t in terms])
            degenerate += int(np.sum(np.asarray(targets.fg_count) == 0))
            positives += float(targets.s_label.sum())
        means = sums / len(samples)
        lam = cfg.weights.lambdas
        row = EpochLog(epoch, opt.lr, float(np.dot(lam, means[1:])), *means[1:].tolist(),
                       degenerate_regions=degenerate, positives=positives / len(samples))
        history.append(row)
        log.info("epoch %d lr %.2e loss %.4f (off %.4f ori %.4f cen %.4f cla %.4f)",
                 epoch, row.lr, row.total, row.offset, row.orientation, row.centerness, row.classifier)
    return history
