import subprocess
import sys

import pytest

from pointbox import dataio
from pointbox.cli import main
from pointbox.config import RunConfig
from pointbox.evaluation import report_from_frames
from pointbox.synth import benchmark_configs, generate_sequence

TINY = RunConfig(n_t=64, n_s=128, m_s=16, trunk_width=8, epochs=2, batch_size=4,
                 n_sequences=3, frames=4, seed=11)


@pytest.fixture()
def cfg_file(tmp_path):
    def write(**kw):
        cfg = RunConfig(**{**TINY.__dict__, **kw})
        path = tmp_path / f"cfg_{len(list(tmp_path.glob('cfg_*')))}.txt"
        path.write_text(cfg.to_text())
        return str(path)
    return write


def run(*args):
    return main([str(a) for a in args])


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_single_frame(tmp_path, cfg_file):
    assert run("synth", "--config", cfg_file(frames=1, n_sequences=2), "--out", tmp_path / "d") == 0
    gt = (tmp_path / "d" / "sequences" / "0000" / "gt.txt").read_text().splitlines()
    assert len(gt) == 1
    assert dataio.read_manifest(tmp_path / "d") == [("0000", 1), ("0001", 1)]


def test_synth_reproducible_and_round_trips(tmp_path, cfg_file):
    cfg = cfg_file()
    run("synth", "--config", cfg, "--out", tmp_path / "a")
    run("synth", "--config", cfg, "--out", tmp_path / "b")
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    seq = generate_sequence(benchmark_configs(TINY.n_sequences, TINY.seed, frames=TINY.frames)[1])
    frames, boxes = dataio.read_sequence(tmp_path / "a", "0001")
    assert boxes == seq.boxes
    assert all(a.tobytes() == b.tobytes() for a, b in zip(frames, seq.frames))


def test_seed_flag_overrides_config(tmp_path, cfg_file):
    cfg = cfg_file()
    run("synth", "--config", cfg, "--out", tmp_path / "a")
    run("synth", "--config", cfg, "--seed", 12, "--out", tmp_path / "b")
    assert tree_bytes(tmp_path / "a") != tree_bytes(tmp_path / "b")


def test_train_zero_epochs(tmp_path, cfg_file):
    cfg = cfg_file(epochs=0)
    run("synth", "--config", cfg, "--out", tmp_path / "d")
    assert run("train", "--config", cfg, "--data", tmp_path / "d", "--out", tmp_path / "m.ckpt") == 0
    log = (tmp_path / "m.ckpt.log.csv").read_text().splitlines()
    assert len(log) == 1 and log[0].startswith("epoch,")


def test_train_log_sums_and_determinism(tmp_path, cfg_file):
    cfg = cfg_file(lambda2=0.5, lambda4=2.0)
    run("synth", "--config", cfg, "--out", tmp_path / "d")
    run("train", "--config", cfg, "--data", tmp_path / "d", "--out", tmp_path / "a.ckpt")
    run("train", "--config", cfg, "--data", tmp_path / "d", "--out", tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    header, rows = dataio.read_csv(tmp_path / "a.ckpt.log.csv")
    assert len(rows) == 2
    for row in rows:
        v = dict(zip(header, map(float, row)))
        expect = v["offset"] + 0.5 * v["orientation"] + v["centerness"] + 2.0 * v["classifier"]
        assert v["total"] == pytest.approx(expect, abs=1e-9)


def test_track_and_eval(tmp_path, cfg_file):
    cfg = cfg_file()
    d, res, rep = tmp_path / "d", tmp_path / "res", tmp_path / "rep"
    run("synth", "--config", cfg, "--out", d)
    run("train", "--config", cfg, "--data", d, "--out", tmp_path / "m.ckpt")
    assert run("track", "--config", cfg, "--checkpoint", tmp_path / "m.ckpt", "--data", d, "--out", res) == 0
    first = tree_bytes(res)
    run("track", "--config", cfg, "--checkpoint", tmp_path / "m.ckpt", "--data", d, "--out", res)
    assert tree_bytes(res) == first
    assert run("eval", "--config", cfg, "--results", res, "--data", d, "--out", rep, "--sparsity") == 0
    agg = dataio.read_key_values(rep / "aggregate.report.txt")
    assert agg["frames"] == str(TINY.n_sequences * TINY.frames)
    pooled = []
    for sid in ("0000", "0001", "0002"):
        _, rows = dataio.read_csv(rep / f"{sid}.frames.csv")
        pooled += [(float(r[1]), float(r[2])) for r in rows]
    assert float(agg["success"]) == report_from_frames(pooled).success
    assert "alignment_spearman" in agg and (rep / "sparsity.report.txt").exists()


def test_track_one_frame_returns_first_gt(tmp_path, cfg_file):
    cfg = cfg_file(frames=1, epochs=0)
    d = tmp_path / "d"
    run("synth", "--config", cfg, "--out", d)
    run("train", "--config", cfg, "--data", d, "--out", tmp_path / "m.ckpt")
    run("track", "--config", cfg, "--checkpoint", tmp_path / "m.ckpt", "--data", d, "--out", tmp_path / "r")
    _, gt = dataio.read_sequence(d, "0000")
    boxes, scores = dataio.read_results(tmp_path / "r" / "0000.txt")
    assert boxes == gt[:1] and scores == [1.0]


def test_track_missing_checkpoint(tmp_path, cfg_file, capsys):
    cfg = cfg_file()
    run("synth", "--config", cfg, "--out", tmp_path / "d")
    code = run("track", "--config", cfg, "--checkpoint", tmp_path / "nope.ckpt", "--data", tmp_path / "d",
               "--out", tmp_path / "res")
    assert code != 0
    assert not (tmp_path / "res").exists()
    assert "checkpoint" in capsys.readouterr().err


def test_track_rejects_mismatched_checkpoint(tmp_path, cfg_file):
    cfg = cfg_file(epochs=0)
    run("synth", "--config", cfg, "--out", tmp_path / "d")
    run("train", "--config", cfg, "--data", tmp_path / "d", "--out", tmp_path / "m.ckpt")
    other = cfg_file(trunk_width=16)
    assert run("track", "--config", other, "--checkpoint", tmp_path / "m.ckpt", "--data", tmp_path / "d",
               "--out", tmp_path / "res") != 0


def test_eval_gt_against_itself(tmp_path, cfg_file):
    cfg = cfg_file()
    d, res = tmp_path / "d", tmp_path / "res"
    run("synth", "--config", cfg, "--out", d)
    res.mkdir()
    for sid, _ in dataio.read_manifest(d):
        _, gt = dataio.read_sequence(d, sid)
        dataio.write_results(res / f"{sid}.txt", gt, [1.0] * len(gt))
    run("eval", "--results", res, "--data", d, "--out", tmp_path / "rep")
    agg = dataio.read_key_values(tmp_path / "rep" / "aggregate.report.txt")
    assert float(agg["success"]) == pytest.approx(100.0, abs=0.5)
    assert float(agg["precision"]) == pytest.approx(100.0, abs=0.5)


def test_eval_empty_results(tmp_path, capsys):
    (tmp_path / "res").mkdir()
    assert run("eval", "--results", tmp_path / "res", "--data", tmp_path, "--out", tmp_path / "rep") == 1
    assert "no result files" in capsys.readouterr().err


def test_eval_frame_count_mismatch(tmp_path, cfg_file):
    cfg = cfg_file()
    d, res = tmp_path / "d", tmp_path / "res"
    run("synth", "--config", cfg, "--out", d)
    res.mkdir()
    _, gt = dataio.read_sequence(d, "0000")
    dataio.write_results(res / "0000.txt", gt[:2], [1.0, 1.0])
    assert run("eval", "--results", res, "--data", d, "--out", tmp_path / "rep") == 1


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("version=1\nnot_a_key=3\n")
    assert run("synth", "--config", bad, "--out", tmp_path / "d") == 1
    assert "not_a_key" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pointbox", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synth" in proc.stdout
