"""Training objectives of the one-stage head.

Two routes are provided for every term: plain numpy functions returning
values and hand-derived gradients with respect to the head outputs, and
:func:`total_loss_graph`, which composes the same terms from autodiff ops
so gradients flow back into the network parameters.

Inputs may describe one region (``(M,)`` arrays) or a stack of regions
(``(B, M)`` arrays). Each region is normalized on its own and the batch
value is the mean over regions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DegenerateBatch, LengthMismatch
from .geom import wrap_angle
from .labeling import TrainTargets

EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    alpha: float = 2.0
    beta: float = 1.0
    gamma: float = 2.0
    tau: float = 0.5
    wrap_orientation: bool = True
    # ablation switches: mask-free focal loss, classifier-free head
    use_mask: bool = True
    use_classifier: bool = True

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")

    @property
    def lambdas(self) -> tuple[float, float, float, float]:
        lam4 = self.lambda4 if self.use_classifier else 0.0
        return (self.lambda1, self.lambda2, self.lambda3, lam4)


@dataclass
class LossBreakdown:
    total: float
    offset: float
    orientation: float
    centerness: float
    classifier: float
    degenerate: bool = False

    def terms(self) -> tuple[float, float, float, float]:
        return (self.offset, self.orientation, self.centerness, self.classifier)


# -- shape helpers -------------------------------------------------------------

def _as2d(a, what: str, m: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if m is not None and a.shape[-1] != m:
        raise LengthMismatch(f"{what}: expected {m} seeds, got {a.shape[-1]}")
    return a


def _labels(targets: TrainTargets):
    s_lab = _as2d(targets.s_label, "s_label")
    m = s_lab.shape[-1]
    c_lab = _as2d(targets.c_label, "c_label", m)
    mask = _as2d(targets.mask, "mask", m)
    t = np.asarray(targets.t, dtype=np.float64)
    t = t[None] if t.ndim == 2 else t
    if t.shape[:2] != s_lab.shape:
        raise LengthMismatch(f"t has shape {t.shape}, labels {s_lab.shape}")
    return t, s_lab, c_lab, mask


def _fg_weights(c_lab: np.ndarray) -> tuple[np.ndarray, bool]:
    """Per-seed weight fg_i / (M'_b * B); zero rows for regions with M'_b = 0."""
    fg_count = c_lab.sum(axis=1, keepdims=True)
    degenerate = bool(np.any(fg_count == 0))
    w = c_lab / np.maximum(fg_count, 1.0) / c_lab.shape[0]
    return w, degenerate


def _d3(d, shape) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    d = d[None] if d.ndim == 2 else d
    if d.shape != shape:
        raise LengthMismatch(f"offsets have shape {d.shape}, expected {shape}")
    return d


def _gt_theta(targets: TrainTargets, b: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(targets.gt_theta, dtype=np.float64).reshape(-1, 1), (b, 1))


# -- individual terms ------------------------------------------------------------

def offset_loss(d, targets: TrainTargets, c_scores=None, *, weighted: bool = True) -> float:
    """Foreground squared offset error, each seed weighted by ``1 + c_i``.

    With ``weighted=False`` (or all ``c_i = 0``) this is the plain mean
    squared error over foreground seeds.
    """
    t, _, c_lab, _ = _labels(targets)
    d = _d3(d, t.shape)
    w, degenerate = _fg_weights(c_lab)
    if degenerate:
        warnings.warn("region without foreground seeds", DegenerateBatch, stacklevel=2)
    if weighted and c_scores is not None:
        w = w * (1.0 + _as2d(c_scores, "c_scores", c_lab.shape[1]))
    return float(np.sum(np.sum((d - t) ** 2, axis=-1) * w))


def orientation_loss(thetas, targets: TrainTargets, *, wrap: bool = True) -> float:
    _, _, c_lab, _ = _labels(targets)
    th = _as2d(thetas, "thetas", c_lab.shape[1])
    w, degenerate = _fg_weights(c_lab)
    if degenerate:
        warnings.warn("region without foreground seeds", DegenerateBatch, stacklevel=2)
    r = th - _gt_theta(targets, th.shape[0])
    if wrap:
        r = wrap_angle(r)
    return float(np.sum(r * r * w))


def cafl(s, s_label, mask, w: LossWeights = LossWeights()):
    """Center-aware focal loss, elementwise. Scores are clamped to [EPS, 1 - EPS]."""
    s = np.clip(np.asarray(s, dtype=np.float64), EPS, 1.0 - EPS)
    s_label = np.asarray(s_label, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    pos = -w.alpha * (1.0 - s) ** w.gamma * (1.0 + mask) * np.log(s)
    neg = -w.beta * s ** w.gamma * np.log(1.0 - s)
    out = np.where(s_label > 0.5, pos, neg)
    return float(out) if out.ndim == 0 else out


def centerness_loss(s, targets: TrainTargets, w: LossWeights = LossWeights()) -> float:
    _, s_lab, _, mask = _labels(targets)
    s = _as2d(s, "s", s_lab.shape[1])
    if not w.use_mask:
        mask = np.zeros_like(mask)
    return float(np.mean(np.mean(cafl(s, s_lab, mask, w), axis=1)))


def classifier_loss(c, targets: TrainTargets) -> float:
    _, _, c_lab, _ = _labels(targets)
    c = np.clip(_as2d(c, "c", c_lab.shape[1]), EPS, 1.0 - EPS)
    bce = -(c_lab * np.log(c) + (1.0 - c_lab) * np.log(1.0 - c))
    return float(np.mean(np.mean(bce, axis=1)))


def total_loss(outputs, targets: TrainTargets, w: LossWeights = LossWeights()) -> LossBreakdown:
    """Weighted sum of the four terms; ``outputs`` has fields d, theta, s, c."""
    _, _, c_lab, _ = _labels(targets)
    _, degenerate = _fg_weights(c_lab)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBatch)
        terms = (
            offset_loss(outputs.d, targets, outputs.c, weighted=w.use_classifier),
            orientation_loss(outputs.theta, targets, wrap=w.wrap_orientation),
            centerness_loss(outputs.s, targets, w),
            classifier_loss(outputs.c, targets),
        )
    lam = w.lambdas
    total = math.fsum(l * v for l, v in zip(lam, terms))
    return LossBreakdown(total, *terms, degenerate=degenerate)


# -- analytic gradients ----------------------------------------------------------------

def cafl_grad(s, s_label, mask, w: LossWeights = LossWeights()) -> np.ndarray:
    """d cafl / d s, zero where the clamp is active."""
    raw = np.asarray(s, dtype=np.float64)
    s = np.clip(raw, EPS, 1.0 - EPS)
    g = w.gamma
    ls, l1s = np.log(s), np.log(1.0 - s)
    pos = w.alpha * (1.0 + mask) * (g * (1.0 - s) ** (g - 1.0) * ls - (1.0 - s) ** g / s)
    neg = -w.beta * (g * s ** (g - 1.0) * l1s - s ** g / (1.0 - s))
    inside = (raw >= EPS) & (raw <= 1.0 - EPS)
    return np.where(np.asarray(s_label) > 0.5, pos, neg) * inside


def total_loss_grad(outputs, targets: TrainTargets, w: LossWeights = LossWeights()) -> dict:
    """Gradients of the total loss with respect to d, theta, s and c.

    The ``1 + c_i`` offset weight and the mask are treated as constants.
    """
    t, s_lab, c_lab, mask = _labels(targets)
    b, m = s_lab.shape
    lam1, lam2, lam3, lam4 = w.lambdas
    d = _d3(outputs.d, t.shape)
    c_raw = _as2d(outputs.c, "c", m)
    wf, _ = _fg_weights(c_lab)

    w_off = wf * (1.0 + c_raw) if w.use_classifier else wf
    g_d = lam1 * 2.0 * (d - t) * w_off[..., None]

    th = _as2d(outputs.theta, "theta", m)
    r = th - _gt_theta(targets, b)
    if w.wrap_orientation:
        r = wrap_angle(r)
    g_th = lam2 * 2.0 * r * wf

    s = _as2d(outputs.s, "s", m)
    mk = mask if w.use_mask else np.zeros_like(mask)
    g_s = lam3 * cafl_grad(s, s_lab, mk, w) / (m * b)

    c = np.clip(c_raw, EPS, 1.0 - EPS)
    inside = (c_raw >= EPS) & (c_raw <= 1.0 - EPS)
    g_c = lam4 * -(c_lab / c - (1.0 - c_lab) / (1.0 - c)) * inside / (m * b)

    squeeze = np.asarray(outputs.s).ndim == 1
    grads = {"d": g_d, "theta": g_th, "s": g_s, "c": g_c}
    if squeeze:
        grads = {k: v[0] for k, v in grads.items()}
    return grads


# -- autodiff composition ------------------------------------------------------------------

def total_loss_graph(d: ad.Tensor, theta: ad.Tensor, s: ad.Tensor, c: ad.Tensor,
                     targets: TrainTargets, w: LossWeights = LossWeights()):
    """Build the total loss from autodiff ops.

    ``d`` is ``(B, M, 3)``, the others ``(B, M)``. Returns the scalar loss
    tensor and the four term tensors.
    """
    t, s_lab, c_lab, mask = _labels(targets)
    b, m = s_lab.shape
    wf, _ = _fg_weights(c_lab)

    w_off = wf * (1.0 + ad.stop_gradient(c).value) if w.use_classifier else wf
    sq = ad.sum(ad.square(ad.sub(d, t)), axis=-1)
    l_off = ad.sum(ad.mul(sq, w_off))

    r = ad.sub(theta, _gt_theta(targets, b))
    if w.wrap_orientation:
        r = ad.sub(r, r.value - wrap_angle(r.value))
    l_ori = ad.sum(ad.mul(ad.square(r), wf))

    sc = ad.clamp(s, EPS, 1.0 - EPS)
    one_minus = ad.sub(1.0, sc)
    mk = mask if w.use_mask else np.zeros_like(mask)
    pos = ad.mul(ad.mul(ad.power(one_minus, w.gamma), ad.log(sc)), -w.alpha * (1.0 + mk) * s_lab)
    neg = ad.mul(ad.mul(ad.power(sc, w.gamma), ad.log(one_minus)), -w.beta * (1.0 - s_lab))
    l_cen = ad.mul(ad.sum(ad.add(pos, neg)), 1.0 / (m * b))

    cc = ad.clamp(c, EPS, 1.0 - EPS)
    bce = ad.add(ad.mul(ad.log(cc), c_lab), ad.mul(ad.log(ad.sub(1.0, cc)), 1.0 - c_lab))
    l_cla = ad.mul(ad.sum(bce), -1.0 / (m * b))

    lam1, lam2, lam3, lam4 = w.lambdas
    total = ad.add(ad.add(ad.mul(l_off, lam1), ad.mul(l_ori, lam2)),
                   ad.add(ad.mul(l_cen, lam3), ad.mul(l_cla, lam4)))
    return total, (l_off, l_ori, l_cen, l_cla)
