"""Command line entry point: ``pointbox synth|train|track|eval``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio
from .autodiff import Adam
from .checkpoint import load_checkpoint, save_checkpoint
from .config import CONFIG_VERSION, RunConfig, load_config
from .errors import DatasetError, FrameCountMismatch, PointBoxError, VersionMismatch
from .evaluation import (bucket_by_sparsity, merge_reports, ope, rank_correlation)
from .geom import contains
from .head import PointBoxHead
from .synth import SyntheticSequence, benchmark_configs, generate_sequence, make_training_pairs
from .tracker import track_sequence
from .train import train

log = logging.getLogger("pointbox")

MODEL_FORMAT = "pointbox-head"


def sequence_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


# -- synth ---------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: Path) -> list[str]:
    configs = benchmark_configs(cfg.n_sequences, cfg.seed, frames=cfg.frames)
    entries = []
    for i, scene in enumerate(configs):
        seq = generate_sequence(scene)
        sid = f"{i:04d}"
        dataio.write_sequence(out, sid, seq.frames, seq.boxes)
        entries.append((sid, len(seq)))
    dataio.write_manifest(out, entries)
    return [sid for sid, _ in entries]


# -- train ---------------------------------------------------------------------

def load_sequences(data_dir: Path) -> list[SyntheticSequence]:
    data = dataio.read_dataset(data_dir)
    if not data:
        raise DatasetError(f"{data_dir}: dataset has no sequences")
    return [SyntheticSequence(frames=f, boxes=b, object_tags=None) for f, b in data.values()]


def build_head(cfg: RunConfig) -> PointBoxHead:
    return PointBoxHead(feat_dim=cfg.feat_dim, width=cfg.trunk_width, seed=cfg.seed)


def checkpoint_tensors(head: PointBoxHead, opt: Adam | None) -> dict[str, np.ndarray]:
    tensors = {f"param/{k}": v for k, v in head.state_dict().items()}
    if opt is not None:
        names = list(head.params)
        for name, m, v in zip(names, opt.m, opt.v):
            tensors[f"adam_m/{name}"] = m
            tensors[f"adam_v/{name}"] = v
        tensors["adam_t"] = np.array([float(opt.t)])
    return tensors


def cmd_train(cfg: RunConfig, data_dir: Path, out: Path, log_path: Path | None = None):
    seqs = [s for s in load_sequences(data_dir) if len(s) >= 2]
    if cfg.epochs > 0 and not seqs:
        raise DatasetError(f"{data_dir}: training needs sequences with at least two frames")
    samples = make_training_pairs(seqs, cfg.pair_config()) if cfg.epochs > 0 else []
    head = build_head(cfg)
    opt = Adam(head.params.values(), lr=cfg.lr)
    history = train(head, samples, cfg.train_config(), optimizer=opt)
    meta = {"format": MODEL_FORMAT, "feat_dim": cfg.feat_dim, "width": cfg.trunk_width,
            "epochs": cfg.epochs, "seed": cfg.seed}
    save_checkpoint(out, checkpoint_tensors(head, opt), meta)
    log_path = log_path or out.with_name(out.name + ".log.csv")
    header = ["epoch", "lr", "total", "offset", "orientation", "centerness", "classifier"]
    rows = [[r.epoch, r.lr, r.total, r.offset, r.orientation, r.centerness, r.classifier] for r in history]
    dataio.write_csv(log_path, header, rows)
    return head, history


def load_head(cfg: RunConfig, path: Path) -> PointBoxHead:
    try:
        tensors, meta = load_checkpoint(path)
    except OSError as exc:
        raise DatasetError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("format") != MODEL_FORMAT:
        raise VersionMismatch(f"{path}: not a {MODEL_FORMAT} checkpoint")
    if meta.get("feat_dim") != cfg.feat_dim or meta.get("width") != cfg.trunk_width:
        raise VersionMismatch(f"{path}: checkpoint has feat_dim={meta.get('feat_dim')} "
                              f"width={meta.get('width')}, config expects "
                              f"feat_dim={cfg.feat_dim} width={cfg.trunk_width}")
    head = build_head(cfg)
    head.load_state_dict({k[len("param/"):]: v for k, v in tensors.items() if k.startswith("param/")})
    return head


# -- track ---------------------------------------------------------------------

def _track_one(args):
    cfg, head, data_dir, results_dir, index, sid = args
    frames, boxes = dataio.read_sequence(data_dir, sid)
    tcfg = cfg.tracker_config(seed=sequence_seed(cfg.seed, index))
    res = track_sequence(frames, boxes[0], head, tcfg, gt_boxes=boxes, diagnostics=len(frames) > 1)
    rows = [[t, float(s), float(i)] for t, a in enumerate(res.alignment) if a is not None
            for s, i in a.pairs()]
    dataio.write_csv(results_dir / f"{sid}.align.csv", ["frame", "score", "iou"], rows)
    dataio.write_results(results_dir / f"{sid}.txt", res.boxes, res.scores)
    return sid


def cmd_track(cfg: RunConfig, checkpoint: Path, data_dir: Path, results_dir: Path, jobs: int = 1):
    head = load_head(cfg, checkpoint)
    manifest = dataio.read_manifest(data_dir)
    results_dir.mkdir(parents=True, exist_ok=True)
    work = [(cfg, head, data_dir, results_dir, i, sid) for i, (sid, _) in enumerate(manifest)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_track_one, work))
    return [_track_one(w) for w in work]


# -- eval ----------------------------------------------------------------------

def _report_items(name: str, rep) -> dict:
    return {"version": CONFIG_VERSION, "sequence": name, "frames": rep.frame_count,
            "success": dataio.fmt(rep.success), "precision": dataio.fmt(rep.precision)}


def cmd_eval(results_dir: Path, data_dir: Path, out: Path, sparsity: bool = False):
    ids = dataio.list_result_ids(results_dir)
    if not ids:
        raise DatasetError(f"{results_dir}: no result files to evaluate")
    out.mkdir(parents=True, exist_ok=True)
    reports, first_counts = {}, {}
    align_rows = []
    for sid in ids:
        pred, _ = dataio.read_results(results_dir / f"{sid}.txt")
        frames, gt = dataio.read_sequence(data_dir, sid)
        if len(pred) != len(gt):
            raise FrameCountMismatch(f"sequence {sid}: {len(pred)} result frames vs {len(gt)} gt frames")
        rep = ope(pred, gt)
        reports[sid] = rep
        first_counts[sid] = int(contains(frames[0], gt[0]).sum())
        dataio.write_key_values(out / f"{sid}.report.txt", _report_items(sid, rep))
        dataio.write_csv(out / f"{sid}.frames.csv", ["frame", "iou", "center_error"],
                         [[t, i, e] for t, (i, e) in enumerate(rep.per_frame)])
        align_path = results_dir / f"{sid}.align.csv"
        if align_path.exists():
            _, rows = dataio.read_csv(align_path)
            align_rows.extend((float(r[1]), float(r[2])) for r in rows)
    agg = merge_reports(list(reports.values()))
    items = _report_items("aggregate", agg)
    items["sequences"] = len(reports)
    if align_rows:
        s, i = np.array(align_rows).T
        items["alignment_spearman"] = dataio.fmt(rank_correlation(s, i))
        dataio.write_csv(out / "alignment.csv", ["score", "iou"], align_rows)
    dataio.write_key_values(out / "aggregate.report.txt", items)
    dataio.write_csv(out / "aggregate.frames.csv", ["frame", "iou", "center_error"],
                     [[t, i, e] for t, (i, e) in enumerate(agg.per_frame)])
    if sparsity:
        buckets = bucket_by_sparsity(reports, first_counts)
        lines = {}
        for label, rep in buckets.items():
            lines[f"{label}.frames"] = rep.frame_count
            lines[f"{label}.success"] = dataio.fmt(rep.success)
            lines[f"{label}.precision"] = dataio.fmt(rep.precision)
        dataio.write_key_values(out / "sparsity.report.txt", lines)
    return agg, reports


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointbox", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="key=value config file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", type=Path, required=True)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    common(sp)
    sp = sub.add_parser("train", help="train the head on a dataset")
    common(sp)
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--log", type=Path, help="loss log path (default: <out>.log.csv)")
    sp = sub.add_parser("track", help="track every sequence of a dataset")
    common(sp)
    sp.add_argument("--checkpoint", type=Path, required=True)
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp = sub.add_parser("eval", help="OPE reports for tracking results")
    common(sp)
    sp.add_argument("--results", type=Path, required=True)
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--sparsity", action="store_true", help="also bucket by first-frame point count")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.command == "synth":
            ids = cmd_synth(cfg, args.out)
            print(f"wrote {len(ids)} sequences to {args.out}")
        elif args.command == "train":
            _, history = cmd_train(cfg, args.data, args.out, args.log)
            last = f", final loss {history[-1].total:.4f}" if history else ""
            print(f"wrote checkpoint {args.out} after {len(history)} epochs{last}")
        elif args.command == "track":
            ids = cmd_track(cfg, args.checkpoint, args.data, args.out, args.jobs)
            print(f"tracked {len(ids)} sequences into {args.out}")
        elif args.command == "eval":
            agg, _ = cmd_eval(args.results, args.data, args.out, args.sparsity)
            print(f"success {agg.success:.2f} precision {agg.precision:.2f} over {agg.frame_count} frames")
    except PointBoxError as exc:
        print(f"pointbox {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
