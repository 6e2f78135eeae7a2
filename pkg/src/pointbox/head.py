"""Seed feature encoder and the one-stage parallel predictor.

The encoder is a fixed geometric stand-in for a learned Siamese backbone:
it describes each seed by hand-made neighbourhood and template-matching
statistics, all measured in the reference box frame so that the features
are invariant to rigid motion of the scene together with that box.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import autodiff as ad
from .errors import EmptyTemplate, ShapeMismatch
from .geom import Box7, to_canonical
from .losses import EPS

FEAT_DIM = 16
DENSITY_RADII = (0.3, 0.6, 1.2)
CENTROID_RADIUS = 1.5
MATCH_RADIUS = 1.0
# slack around the reference box when gathering points for the shift cue
SHIFT_MARGIN = 0.5
SHIFT_ITERS = 2


@dataclass
class SeedBatch:
    """Seed coordinates (reference-box frame) and their feature vectors."""

    coords: np.ndarray
    feats: np.ndarray
    ref_box: Box7 | None = None
    frame_index: int | None = None

    def __post_init__(self):
        if len(self.coords) != len(self.feats):
            raise ShapeMismatch(f"{len(self.coords)} coords vs {len(self.feats)} feature rows")

    def __len__(self) -> int:
        return len(self.coords)

    def inputs(self) -> np.ndarray:
        return np.concatenate([self.feats, self.coords], axis=1)


@dataclass
class HeadOutput:
    d: np.ndarray
    theta: np.ndarray
    s: np.ndarray
    c: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    @property
    def score(self) -> np.ndarray:
        return self.s * self.c


def centroid_shift(q_all: np.ndarray, ref_box: Box7, template: np.ndarray,
                   margin: float = SHIFT_MARGIN, iters: int = SHIFT_ITERS) -> np.ndarray:
    """Translation that moves the template centroid onto the nearby search centroid.

    Search points are in the reference frame. The gathering window follows
    the running estimate; an empty window keeps the previous estimate.
    """
    half = np.array([ref_box.w, ref_box.l, ref_box.h]) / 2 + margin
    t_mean = template.mean(axis=0)
    shift = np.zeros(3)
    for _ in range(iters):
        inside = np.all(np.abs(q_all - t_mean - shift) <= half, axis=1)
        if not inside.any():
            break
        shift = q_all[inside].mean(axis=0) - t_mean
    return shift


def encode_features(search: np.ndarray, ref_box: Box7, template: np.ndarray,
                    seeds: np.ndarray, feat_dim: int = FEAT_DIM,
                    frame_index: int | None = None) -> SeedBatch:
    """Describe search-region seeds relative to ``ref_box``.

    ``search`` is in world coordinates. ``template`` is already expressed
    in its own object frame, so it is overlaid on ``ref_box`` directly.
    """
    template = np.asarray(template, dtype=np.float64).reshape(-1, 3)
    if len(template) == 0:
        raise EmptyTemplate("template has no points")
    q_all = to_canonical(np.asarray(search, dtype=np.float64).reshape(-1, 3), ref_box)
    q = q_all[np.asarray(seeds, dtype=np.int64)]

    d2 = np.maximum(np.sum(q ** 2, 1)[:, None] + np.sum(q_all ** 2, 1)[None, :]
                    - 2.0 * q @ q_all.T, 0.0)
    tree = cKDTree(template)
    nn_seed, _ = tree.query(q)
    nn_all, _ = tree.query(q_all)

    shift = centroid_shift(q_all, ref_box, template)
    nn_shifted, _ = tree.query(q - shift)

    cols = [q, np.linalg.norm(q - template.mean(axis=0), axis=1, keepdims=True)]
    for r in DENSITY_RADII:
        cols.append(np.log1p((d2 <= r * r).sum(axis=1, keepdims=True)))
    cols.append(nn_seed[:, None])
    nb = (d2 <= CENTROID_RADIUS ** 2).astype(np.float64)
    cols.append(nb @ q_all / nb.sum(axis=1, keepdims=True) - q)
    # region-level: identical for every seed of the region
    cols.append(np.broadcast_to(shift, q.shape))
    nb = (d2 <= MATCH_RADIUS ** 2).astype(np.float64)
    cols.append((nb @ nn_all / nb.sum(axis=1))[:, None])
    cols.append(nn_shifted[:, None])

    feats = np.concatenate(cols, axis=1)
    if feats.shape[1] < feat_dim:
        feats = np.pad(feats, ((0, 0), (0, feat_dim - feats.shape[1])))
    return SeedBatch(coords=q, feats=feats[:, :feat_dim], ref_box=ref_box, frame_index=frame_index)


# -- network ---------------------------------------------------------------

BRANCHES = (("offset", 3), ("theta", 1), ("centerness", 1), ("cls", 1))


def _kaiming_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class PointBoxHead:
    """Shared two-layer trunk feeding four parallel two-layer branches.

    Every layer acts on one seed at a time, so the head is a pointwise
    function of ``[f_i; p_i]``.
    """

    feat_dim: int = FEAT_DIM
    width: int = 256
    seed: int = 0
    zero_heads: bool = False
    params: dict[str, ad.Tensor] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.params:
            self.params = self._init_params()

    @property
    def in_dim(self) -> int:
        return self.feat_dim + 3

    def _init_params(self) -> dict[str, ad.Tensor]:
        rng = np.random.default_rng(self.seed)
        shapes = [("trunk.0", self.in_dim, self.width), ("trunk.1", self.width, self.width)]
        for name, out in BRANCHES:
            shapes += [(f"{name}.0", self.width, self.width), (f"{name}.1", self.width, out)]
        params = {}
        for name, fan_in, fan_out in shapes:
            w = _kaiming_uniform(rng, fan_in, fan_out)
            final = name.endswith(".1") and not name.startswith("trunk")
            if final and (self.zero_heads or name.split(".")[0] in ("offset", "theta")):
                w = np.zeros_like(w)
            params[f"{name}.weight"] = ad.Tensor(w, requires_grad=True, name=f"{name}.weight")
            params[f"{name}.bias"] = ad.Tensor(np.zeros(fan_out), requires_grad=True,
                                               name=f"{name}.bias")
        return params

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.params.values()))

    def _linear(self, x: ad.Tensor, name: str) -> ad.Tensor:
        return ad.add_bias(ad.matmul(x, self.params[f"{name}.weight"]), self.params[f"{name}.bias"])

    def forward(self, x) -> dict[str, ad.Tensor]:
        """Graph forward over ``(R, feat_dim + 3)`` rows."""
        x = ad.as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatch(f"expected (R, {self.in_dim}) inputs, got {x.shape}")
        h = ad.relu(self._linear(x, "trunk.0"))
        h = ad.relu(self._linear(h, "trunk.1"))
        out = {}
        for name, _ in BRANCHES:
            out[name] = self._linear(ad.relu(self._linear(h, f"{name}.0")), f"{name}.1")
        r = x.shape[0]
        return {
            "d": out["offset"],
            "theta": ad.reshape(out["theta"], (r,)),
            "s": ad.sigmoid(ad.reshape(out["centerness"], (r,))),
            "c": ad.sigmoid(ad.reshape(out["cls"], (r,))),
        }

    def predict(self, batch: SeedBatch) -> HeadOutput:
        out = self.forward(batch.inputs())
        return HeadOutput(
            d=out["d"].value,
            theta=out["theta"].value,
            s=np.clip(out["s"].value, EPS, 1.0 - EPS),
            c=np.clip(out["c"].value, EPS, 1.0 - EPS),
        )

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            if k not in state:
                raise ShapeMismatch(f"checkpoint lacks parameter {k}")
            if state[k].shape != p.value.shape:
                raise ShapeMismatch(f"{k}: checkpoint shape {state[k].shape} != {p.value.shape}")
            p.value = np.array(state[k], dtype=np.float64)
            p.zero_grad()
