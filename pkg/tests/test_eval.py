import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from pointbox.errors import EmptyBatch, LengthMismatch
from pointbox.evaluation import (alignment_diagnostic, bucket_by_sparsity, merge_reports, ope,
                                 proposal_ious, rank_correlation, report_from_frames, sparsity_label)
from pointbox.geom import Box7, iou3d
from pointbox.head import HeadOutput


def seq_boxes(n, rng):
    return [Box7(*rng.uniform(-5, 5, 3), 1.8, 1.6, 4.2, rng.uniform(-3, 3)) for _ in range(n)]


def test_perfect_tracker():
    gt = seq_boxes(10, np.random.default_rng(0))
    rep = ope(gt, gt)
    assert rep.success == pytest.approx(100.0, abs=0.5)
    assert rep.precision == pytest.approx(100.0, abs=0.5)


def test_disjoint_far_predictions():
    gt = seq_boxes(10, np.random.default_rng(1))
    pred = [b.with_pose(b.center + [30, 0, 0], b.theta) for b in gt]
    rep = ope(pred, gt)
    assert rep.success == 0.0 and rep.precision == 0.0


def test_step_function_half_half():
    # a single frame with IoU exactly 0.5 and center error exactly 1 m
    rep = report_from_frames([(0.5, 1.0)])
    assert rep.success == pytest.approx(50.0, abs=1.0)
    assert rep.precision == pytest.approx(50.0, abs=1.0)


def test_half_iou_box_pair():
    # unit cubes shifted by 1/3 along x overlap exactly half of their union
    gt = Box7(0, 0, 0, 1, 1, 1)
    pred = Box7(1 / 3, 0, 0, 1, 1, 1)
    assert iou3d(pred, gt) == pytest.approx(0.5)
    assert ope([pred], [gt]).success == pytest.approx(50.0, abs=1.0)


def test_length_checks():
    gt = seq_boxes(3, np.random.default_rng(2))
    with pytest.raises(LengthMismatch):
        ope(gt[:2], gt)
    with pytest.raises(LengthMismatch):
        ope([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 5)), min_size=1, max_size=20), st.data())
def test_metrics_monotone(frames, data):
    base = report_from_frames(frames)
    i = data.draw(st.integers(0, len(frames) - 1))
    iou, err = frames[i]
    better = list(frames)
    better[i] = (data.draw(st.floats(iou, 1)), data.draw(st.floats(0, err)))
    rep = report_from_frames(better)
    assert rep.success >= base.success - 1e-12
    assert rep.precision >= base.precision - 1e-12


def test_merge_is_frame_weighted():
    a = report_from_frames([(1.0, 0.0)] * 3)
    b = report_from_frames([(0.0, 10.0)])
    merged = merge_reports([a, b])
    assert merged.frame_count == 4
    assert merged.success == pytest.approx(report_from_frames(a.per_frame + b.per_frame).success)
    assert merged.success == pytest.approx(75.0, abs=0.5)


def test_sparsity_buckets():
    assert sparsity_label(0) == "[0,10)" and sparsity_label(49) == "[40,50)"
    assert sparsity_label(50) is None
    reps = {"a": report_from_frames([(1.0, 0.0)]), "b": report_from_frames([(0.0, 5.0)]),
            "c": report_from_frames([(0.5, 1.0)])}
    buckets = bucket_by_sparsity(reps, {"a": 3, "b": 15, "c": 7})
    assert list(buckets) == ["[0,10)", "[10,20)"]
    assert buckets["[0,10)"].frame_count == 2


# -- alignment ------------------------------------------------------------------

def proposals(rng, m=40):
    gt = Box7(0, 0, 0, 1.8, 1.6, 4.2, 0.1)
    seeds = rng.normal(size=(m, 3))
    out = HeadOutput(d=rng.normal(scale=0.5, size=(m, 3)), theta=rng.normal(scale=0.2, size=m),
                     s=rng.uniform(size=m), c=rng.uniform(size=m))
    return out, seeds, gt


def test_spearman_extremes():
    out, seeds, gt = proposals(np.random.default_rng(0))
    ious = proposal_ious(out, seeds, gt)
    assert alignment_diagnostic(out, seeds, gt, scores=ious).spearman == pytest.approx(1.0)
    assert alignment_diagnostic(out, seeds, gt, scores=-rankdata(ious)).spearman == pytest.approx(-1.0)


def test_random_scores_weakly_correlated():
    rng = np.random.default_rng(1)
    out, seeds, gt = proposals(rng, 128)
    ious = proposal_ious(out, seeds, gt)
    rhos = np.array([rank_correlation(rng.uniform(size=128), ious) for _ in range(1000)])
    assert np.mean(np.abs(rhos) < 0.3) > 0.99


def test_alignment_scale_free():
    out, seeds, gt = proposals(np.random.default_rng(2))
    a = alignment_diagnostic(out, seeds, gt)
    b = alignment_diagnostic(out, seeds, gt, scores=out.s * out.c * 7.5)
    assert a.spearman == pytest.approx(b.spearman) and a.selected_iou == b.selected_iou
    assert a.gap == a.max_iou - a.selected_iou >= 0


def test_alignment_requires_two():
    out, seeds, gt = proposals(np.random.default_rng(3), 1)
    with pytest.raises(EmptyBatch):
        alignment_diagnostic(out, seeds, gt)


def test_rank_correlation_constant_side():
    assert rank_correlation([1, 1, 1], [0.1, 0.2, 0.3]) == 0.0
