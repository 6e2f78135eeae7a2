"""Oriented 3D box geometry.

Conventions: yaw ``theta`` is a right-handed rotation about +z (vertical).
In a box's canonical frame the width ``w`` runs along x, the length ``l``
along y and the height ``h`` along z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi
# closed-boundary slack for membership tests; absorbs round-off from the
# world <-> canonical round trip of points generated exactly on a face
BOUNDARY_ATOL = 1e-9


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    if np.ndim(a) == 0:
        return math.pi - (math.pi - float(a)) % TWO_PI
    a = np.asarray(a, dtype=np.float64)
    return math.pi - np.mod(math.pi - a, TWO_PI)


@dataclass(frozen=True)
class Box7:
    x: float
    y: float
    z: float
    w: float
    h: float
    l: float
    theta: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.y, self.z, self.w, self.h, self.l, self.theta)
        if not all(math.isfinite(float(v)) for v in vals):
            raise ValueError(f"non-finite box parameters: {vals}")
        if min(self.w, self.h, self.l) <= 0:
            raise ValueError(f"box sizes must be positive, got {(self.w, self.h, self.l)}")
        for name in ("x", "y", "z", "w", "h", "l"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @classmethod
    def from_array(cls, arr) -> "Box7":
        return cls(*[float(v) for v in np.asarray(arr, dtype=np.float64).reshape(7)])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w, self.h, self.l, self.theta])

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def size(self) -> np.ndarray:
        """Extents along the canonical (x, y, z) axes, i.e. (w, l, h)."""
        return np.array([self.w, self.l, self.h])

    @property
    def volume(self) -> float:
        return self.w * self.h * self.l

    def with_pose(self, center, theta: float) -> "Box7":
        cx, cy, cz = (float(v) for v in center)
        return Box7(cx, cy, cz, self.w, self.h, self.l, theta)

    def scaled(self, scale: float) -> "Box7":
        return Box7(self.x, self.y, self.z, self.w * scale, self.h * scale, self.l * scale, self.theta)

    def enlarged(self, margin) -> "Box7":
        """Add ``margin`` to each extent; ``margin`` is a scalar or a (w, h, l) triple."""
        mw, mh, ml = np.broadcast_to(np.asarray(margin, dtype=np.float64), (3,))
        return Box7(self.x, self.y, self.z, self.w + mw, self.h + mh, self.l + ml, self.theta)

    def bev_corners(self) -> np.ndarray:
        """Counter-clockwise (4, 2) footprint corners in world coordinates."""
        hw, hl = self.w / 2.0, self.l / 2.0
        local = np.array([[-hw, -hl], [hw, -hl], [hw, hl], [-hw, hl]])
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.x, self.y])


def _yaw_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def to_canonical(p, b: Box7) -> np.ndarray:
    """Translate by -center, then rotate by -theta. Accepts (3,) or (N, 3)."""
    p = np.asarray(p, dtype=np.float64)
    # row-vector form: (R^T (p - c))^T = (p - c) R
    return (p - b.center) @ _yaw_matrix(b.theta)


def from_canonical(q, b: Box7) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q @ _yaw_matrix(b.theta).T + b.center


class CanonicalOffsets(NamedTuple):
    """Signed distances to the six faces, measured in the box frame.

    ``dl``/``dr`` are the -x/+x faces, ``db``/``dt`` the -z/+z (bottom/top)
    faces and ``dk``/``df`` the -y/+y (back/front) faces.
    """

    dl: np.ndarray
    dr: np.ndarray
    dt: np.ndarray
    db: np.ndarray
    df: np.ndarray
    dk: np.ndarray


def face_distances(p, b: Box7) -> CanonicalOffsets:
    q = to_canonical(p, b)
    qx, qy, qz = q[..., 0], q[..., 1], q[..., 2]
    hw, hl, hh = b.w / 2.0, b.l / 2.0, b.h / 2.0
    return CanonicalOffsets(
        dl=hw + qx, dr=hw - qx,
        dt=hh - qz, db=hh + qz,
        df=hl - qy, dk=hl + qy,
    )


def contains(p, b: Box7, scale: float = 1.0, atol: float = BOUNDARY_ATOL):
    """Closed membership in ``b`` with sizes multiplied by ``scale`` about its center."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    q = to_canonical(p, b)
    half = b.size * (scale / 2.0) + atol
    return np.all(np.abs(q) <= half, axis=-1)


def center_distance(a: Box7, b: Box7) -> float:
    return float(np.linalg.norm(a.center - b.center))


# -- BEV polygon clipping --------------------------------------------------

def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW polygon ``clip``."""
    out = [tuple(v) for v in subject]
    n = len(clip)
    for i in range(n):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(pt):
            return ex * (pt[1] - ay) - ey * (pt[0] - ax)

        inp, out = out, []
        prev = inp[-1]
        s_prev = side(prev)
        for cur in inp:
            s_cur = side(cur)
            if s_cur >= 0:
                if s_prev < 0:
                    out.append(_intersect(prev, cur, s_prev, s_cur))
                out.append(cur)
            elif s_prev >= 0:
                out.append(_intersect(prev, cur, s_prev, s_cur))
            prev, s_prev = cur, s_cur
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def _intersect(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def bev_intersection_area(a: Box7, b: Box7) -> float:
    poly = clip_convex(b.bev_corners(), a.bev_corners())
    return max(polygon_area(poly), 0.0)


def iou3d(a: Box7, b: Box7) -> float:
    if a == b:
        return 1.0
    z_overlap = min(a.z + a.h / 2, b.z + b.h / 2) - max(a.z - a.h / 2, b.z - b.h / 2)
    if z_overlap <= 0:
        return 0.0
    # cheap reject: footprints farther apart than their circumradii
    ra = math.hypot(a.w, a.l) / 2
    rb = math.hypot(b.w, b.l) / 2
    if math.hypot(a.x - b.x, a.y - b.y) >= ra + rb:
        return 0.0
    area = bev_intersection_area(a, b)
    if area <= 0.0:
        return 0.0
    inter = area * z_overlap
    union = a.volume + b.volume - inter
    return float(min(max(inter / union, 0.0), 1.0))
