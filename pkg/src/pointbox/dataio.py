"""Plain-text dataset, result, report and log files (see FORMATS.md)."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .checkpoint import atomic_write_text
from .errors import DatasetError, FrameCountMismatch
from .geom import Box7


def fmt(v: float) -> str:
    """Shortest round-trip decimal for a float."""
    return repr(float(v))


def frame_name(t: int) -> str:
    return f"frame_{t:04d}.txt"


def points_to_text(points: np.ndarray) -> str:
    return "".join(f"{fmt(x)} {fmt(y)} {fmt(z)}\n" for x, y, z in np.asarray(points).reshape(-1, 3))


def text_to_points(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows:
        return np.zeros((0, 3))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def box_fields(box: Box7) -> str:
    return " ".join(fmt(v) for v in box.as_array())


def write_sequence(root, seq_id: str, frames: list[np.ndarray], boxes: list[Box7]) -> None:
    seq_dir = Path(root) / "sequences" / seq_id
    seq_dir.mkdir(parents=True, exist_ok=True)
    for t, pts in enumerate(frames):
        atomic_write_text(seq_dir / frame_name(t), points_to_text(pts))
    atomic_write_text(seq_dir / "gt.txt", "".join(f"{t} {box_fields(b)}\n" for t, b in enumerate(boxes)))


def write_manifest(root, entries: list[tuple[str, int]]) -> None:
    atomic_write_text(Path(root) / "manifest.txt", "".join(f"{sid} {n}\n" for sid, n in entries))


def read_manifest(root) -> list[tuple[str, int]]:
    path = Path(root) / "manifest.txt"
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
    out = []
    for line in lines:
        if line.strip():
            sid, n = line.split()
            out.append((sid, int(n)))
    return out


def read_boxes(path) -> list[Box7]:
    """Read ``t x y z w h l theta [...]`` lines; extra columns are ignored."""
    path = Path(path)
    try:
        lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    for expect, row in enumerate(lines):
        if int(row[0]) != expect:
            raise DatasetError(f"{path}: expected frame {expect}, found {row[0]}")
    return [Box7(*map(float, row[1:8])) for row in lines]


def read_sequence(root, seq_id: str) -> tuple[list[np.ndarray], list[Box7]]:
    seq_dir = Path(root) / "sequences" / seq_id
    boxes = read_boxes(seq_dir / "gt.txt")
    frames = []
    for t in range(len(boxes)):
        path = seq_dir / frame_name(t)
        try:
            frames.append(text_to_points(path.read_text()))
        except OSError as exc:
            raise DatasetError(f"cannot read frame {path}: {exc}") from exc
    return frames, boxes


def read_dataset(root) -> dict[str, tuple[list[np.ndarray], list[Box7]]]:
    data = {}
    for sid, n in read_manifest(root):
        frames, boxes = read_sequence(root, sid)
        if len(boxes) != n:
            raise FrameCountMismatch(f"sequence {sid}: manifest lists {n} frames, gt.txt has {len(boxes)}")
        data[sid] = (frames, boxes)
    return data


# -- results -------------------------------------------------------------------

def results_to_text(boxes: list[Box7], scores: list[float]) -> str:
    return "".join(f"{t} {box_fields(b)} {fmt(s)}\n" for t, (b, s) in enumerate(zip(boxes, scores)))


def write_results(path, boxes: list[Box7], scores: list[float]) -> None:
    atomic_write_text(path, results_to_text(boxes, scores))


def read_results(path) -> tuple[list[Box7], list[float]]:
    path = Path(path)
    boxes = read_boxes(path)
    rows = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
    return boxes, [float(r[8]) for r in rows]


def write_key_values(path, items: dict) -> None:
    atomic_write_text(path, "".join(f"{k}={v}\n" for k, v in items.items()))


def read_key_values(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def write_csv(path, header: list[str], rows) -> None:
    body = "".join(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n"
                   for row in rows)
    atomic_write_text(path, ",".join(header) + "\n" + body)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        return [], []
    return lines[0].split(","), [ln.split(",") for ln in lines[1:] if ln]


def list_result_ids(results_dir) -> list[str]:
    d = Path(results_dir)
    if not d.is_dir():
        return []
    return sorted(p.stem for p in d.iterdir()
                  if p.suffix == ".txt" and not p.name.startswith(".") and os.path.isfile(p))
