"""One-stage point-to-box head for 3D single-object tracking on point clouds."""
from .errors import PointBoxError
from .geom import Box7, contains, face_distances, from_canonical, iou3d, to_canonical, wrap_angle
from .head import HeadOutput, PointBoxHead, SeedBatch, encode_features
from .losses import LossBreakdown, LossWeights, total_loss
from .tracker import TrackerConfig, TrackResult, track_sequence

__version__ = "0.1.0"

__all__ = [
    "Box7", "HeadOutput", "LossBreakdown", "LossWeights", "PointBoxError", "PointBoxHead",
    "SeedBatch", "TrackResult", "TrackerConfig", "contains", "encode_features",
    "face_distances", "from_canonical", "iou3d", "to_canonical", "total_loss",
    "track_sequence", "wrap_angle",
]
