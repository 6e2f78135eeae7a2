import numpy as np
import pytest

from pointbox.geom import Box7, contains, face_distances
from pointbox.synth import (PairConfig, SceneConfig, SyntheticSequence, benchmark_configs,
                            box_trajectory, generate_sequence, make_pair, make_training_pairs,
                            sample_surface)
from pointbox.sampling import make_rng

PAIR = PairConfig(n_t=128, n_s=256, m_s=32, shift_max=0.0)


def test_noise_free_points_lie_on_faces():
    seq = generate_sequence(SceneConfig(noise_sigma=0.0, dropout_rate=0.0, frames=3, init_theta=0.8))
    for frame, tags, box in zip(seq.frames, seq.object_tags, seq.boxes):
        obj = frame[tags]
        fd = np.abs(np.stack(face_distances(obj, box)))
        assert np.all(fd.min(axis=0) < 1e-9)
        assert np.all(contains(obj, box))


def test_surface_excludes_bottom():
    box = Box7(0, 0, 0, 2, 1, 3)
    pts = sample_surface(box, 5000, make_rng(0))
    assert np.all(pts[:, 2] > -0.5 + 1e-9)


def test_inset_surface_strictly_inside():
    box = Box7(0, 0, 0, 2, 1, 3, 0.3)
    pts = sample_surface(box, 2000, make_rng(1), inset=0.1)
    fd = np.stack(face_distances(pts, box))
    assert np.all(fd >= 0.1 - 1e-9)


def test_determinism():
    cfg = SceneConfig(frames=4, seed=9, dropout_rate=0.3)
    a, b = generate_sequence(cfg), generate_sequence(cfg)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.frames, b.frames))
    assert a.boxes == b.boxes


def test_sparse_limit():
    seq = generate_sequence(SceneConfig(dropout_rate=0.999, clutter_points_per_frame=0, frames=5))
    assert max(len(f) for f in seq.frames) < 10


def test_inside_fraction_with_noise():
    clean = generate_sequence(SceneConfig(noise_sigma=0.0, frames=2))
    assert clean.in_box_counts == [int(t.sum()) for t in clean.object_tags]
    prev = 1.0
    for sigma in (0.01, 0.03, 0.1):
        seq = generate_sequence(SceneConfig(noise_sigma=sigma, frames=2, clutter_points_per_frame=0))
        frac = np.mean([contains(f, b).mean() for f, b in zip(seq.frames, seq.boxes)])
        assert frac <= prev
        prev = frac
    assert prev > 0.3


def test_trajectory_moves_in_body_frame():
    cfg = SceneConfig(translation=(0.0, 1.0, 0.0), init_theta=np.pi / 2, frames=3)
    boxes = box_trajectory(cfg)
    np.testing.assert_allclose(boxes[1].center - boxes[0].center, [-1.0, 0.0, 0.0], atol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SceneConfig(dropout_rate=1.0)
    with pytest.raises(ValueError):
        SceneConfig(frames=0)
    with pytest.raises(ValueError):
        SceneConfig(surface_inset=5.0)


def test_benchmark_configs_reproducible():
    assert benchmark_configs(5, 3) == benchmark_configs(5, 3)
    assert benchmark_configs(5, 3) != benchmark_configs(5, 4)
    assert all(c.frames == 7 for c in benchmark_configs(3, 0, frames=7))


def test_pair_foreground_matches_generator_tags():
    seq = generate_sequence(SceneConfig(noise_sigma=0.0, frames=3, seed=5))
    sample = make_pair(seq, 1, PAIR, make_rng(0))
    np.testing.assert_array_equal(sample.c_label.astype(bool), sample.seed_tags)
    np.testing.assert_allclose(sample.batch.coords + sample.t, np.tile(sample.gt.center, (32, 1)))


def test_two_frame_template_uses_first_frame_twice():
    seq = generate_sequence(SceneConfig(frames=2, seed=1))
    assert make_pair(seq, 1, PAIR, make_rng(0)) is not None


def test_pairs_deterministic_and_tagless_sequences():
    seqs = [generate_sequence(SceneConfig(frames=3, seed=s)) for s in range(2)]
    a = make_training_pairs(seqs, PAIR)
    b = make_training_pairs(seqs, PAIR)
    assert len(a) == 4
    assert all(x.batch.feats.tobytes() == y.batch.feats.tobytes() for x, y in zip(a, b))
    bare = [SyntheticSequence(s.frames, s.boxes, None) for s in seqs]
    c = make_training_pairs(bare, PAIR)
    assert c[0].seed_tags is None
    assert c[0].batch.feats.tobytes() == a[0].batch.feats.tobytes()
