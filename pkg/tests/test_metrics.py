import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from domadapt.core import KernelSpec, RandomStream
from domadapt.errors import (ConstantImage, DimMismatch, InvalidConfig, NoValidSlices,
                             ShapeMismatch, TooFewSamples)
from domadapt.metrics import (MEDIAN_RBF, DomainClassifierConfig, MetricReport,
                              domain_classification_accuracy, feature_report, image_cc, image_mse,
                              image_psnr, mmd_squared, require, slice_averaged_metrics,
                              stratified_split)

from oracles import naive_median_gamma, naive_mmd


def test_mmd_closed_form():
    assert abs(mmd_squared([[0.0]], [[1.0]], KernelSpec("rbf", 1.0)) - (2 - 2 * math.exp(-1))) <= 1e-12


def test_mmd_matches_triple_loop_with_median_bandwidth():
    stream = RandomStream(99)
    for _ in range(30):
        na, nb, d = (int(v) for v in 1 + stream.uniform(3) * np.array([10, 10, 4]))
        a = stream.normal((na, d))
        b = stream.normal((nb, d)) + 0.5
        gamma = naive_median_gamma(np.vstack([a, b]).tolist())
        assert abs(mmd_squared(a, b) - naive_mmd(a.tolist(), b.tolist(), gamma)) <= 1e-12


def test_mmd_identical_and_linear_identity():
    a = RandomStream(1).normal((7, 3))
    assert mmd_squared(a, a) <= 1e-12
    x, y = RandomStream(2).normal((6, 1)), RandomStream(3).normal((9, 1)) + 1
    lin = mmd_squared(x, y, KernelSpec("linear"))
    assert abs(lin - (x.mean() - y.mean()) ** 2) <= 1e-10


def test_mmd_errors():
    with pytest.raises(DimMismatch):
        mmd_squared(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(InvalidConfig):
        mmd_squared(np.zeros((0, 2)), np.zeros((2, 2)))


_small = hnp.arrays(np.float64, st.tuples(st.integers(1, 6), st.just(2)),
                    elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(_small, _small)
def test_mmd_symmetric_and_nonnegative(a, b):
    ab, ba = mmd_squared(a, b), mmd_squared(b, a)
    assert abs(ab - ba) <= 1e-12
    assert ab >= -1e-12


def test_separable_accuracy_is_one():
    s = 0.1 * RandomStream(1).normal((30, 2))
    t = 100 + 0.1 * RandomStream(2).normal((30, 2))
    assert domain_classification_accuracy(s, t, DomainClassifierConfig(seed=4)) == 1.0


def test_identical_distribution_accuracy_near_chance():
    s = RandomStream(10).normal((30, 2))
    t = RandomStream(11).normal((30, 2))
    acc = domain_classification_accuracy(s, t, DomainClassifierConfig(seed=0))
    assert 0.3 <= acc <= 0.7


def _loop_knn1_accuracy(s, t, cfg):
    x = np.vstack([s, t])
    y = [1] * len(s) + [0] * len(t)
    tr, te = stratified_split(len(s), len(t), cfg)
    hits = 0
    for i in te:
        best, pred = None, None
        for j in tr:  # strict < keeps the earliest training position on ties
            d = float(np.sum((x[i] - x[j]) ** 2))
            if best is None or d < best:
                best, pred = d, y[j]
        hits += pred == y[i]
    return hits / len(te)


def test_exact_copy_tie_rule():
    s = RandomStream(5).normal((20, 3))
    cfg = DomainClassifierConfig(seed=1)
    a = domain_classification_accuracy(s, s.copy(), cfg)
    assert a == domain_classification_accuracy(s, s.copy(), cfg)
    assert a == _loop_knn1_accuracy(s, s.copy(), cfg)


def test_accuracy_matches_loop_oracle():
    for seed in range(5):
        s = RandomStream(seed).normal((15, 2))
        t = RandomStream(seed + 50).normal((12, 2)) + 0.7
        cfg = DomainClassifierConfig(seed=seed)
        assert domain_classification_accuracy(s, t, cfg) == _loop_knn1_accuracy(s, t, cfg)


def test_split_is_stratified_60_40():
    tr, te = stratified_split(30, 20, DomainClassifierConfig(seed=3))
    assert np.sum(tr < 30) == 18 and np.sum(tr >= 30) == 12
    assert sorted(np.r_[tr, te].tolist()) == list(range(50))


def test_accuracy_orthogonal_invariance():
    s = RandomStream(6).normal((25, 3))
    t = RandomStream(7).normal((25, 3)) + 0.4
    q, _ = np.linalg.qr(RandomStream(8).normal((3, 3)))
    cfg = DomainClassifierConfig(seed=2)
    assert domain_classification_accuracy(s, t, cfg) == domain_classification_accuracy(s @ q, t @ q, cfg)


def test_accuracy_errors():
    with pytest.raises(TooFewSamples):
        domain_classification_accuracy(np.zeros((4, 1)), np.zeros((9, 1)))
    with pytest.raises(DimMismatch):
        domain_classification_accuracy(np.zeros((9, 1)), np.zeros((9, 2)))
    with pytest.raises(InvalidConfig):
        DomainClassifierConfig(train_fraction=1.0)


def test_feature_report_metadata():
    s = RandomStream(1).normal((12, 2))
    rep = feature_report(s, s + 3, split_seed=42)
    assert rep.meta["split_seed"] == 42 and rep.meta["kernel"] == MEDIAN_RBF.to_dict()
    assert 0 <= rep["domain-acc"] <= 1 and rep["mmd"] > 0


def test_image_cc_examples():
    a = RandomStream(0).uniform((8, 8))
    assert image_cc(a, a) == pytest.approx(1.0, abs=1e-12)
    assert image_cc(a, 1 - a) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ConstantImage):
        image_cc(np.ones((3, 3)), a[:3, :3])
    with pytest.raises(ShapeMismatch):
        image_cc(a, a[:4])


def test_mse_psnr_examples():
    a, b = np.zeros((4, 4)), np.full((4, 4), 0.5)
    assert image_mse(a, b) == 0.25 and image_mse(b, a) == 0.25
    assert image_psnr(a, b) == pytest.approx(6.0206, abs=1e-4)
    assert image_psnr(a, a) == math.inf
    rep = MetricReport({"psnr": math.inf})
    d = rep.to_dict()
    assert d["metrics"]["psnr"] is None and d["infinite"] == {"psnr": True}


def test_slice_average_hand_values():
    a = np.zeros((2, 2, 2))
    b = np.zeros((2, 2, 2))
    a[:, :, 0] = [[0, 1], [0, 1]]
    b[:, :, 0] = [[0, 1], [1, 0]]   # cc 0, mse 0.5
    a[:, :, 1] = [[0, 0.5], [0, 0.5]]
    b[:, :, 1] = [[0, 0.5], [0, 0.5]]  # cc 1, mse 0
    rep = slice_averaged_metrics(a, b)
    assert abs(rep["mse"] - 0.25) <= 1e-10
    assert abs(rep["cc"] - 0.5) <= 1e-10
    assert abs(rep["psnr"] - 10 * math.log10(2.0)) <= 1e-10
    assert rep.meta["psnr_excluded"] == 1 and rep.meta["cc_excluded"] == 0


def test_slice_average_exclusions():
    a = RandomStream(3).uniform((4, 4, 3))
    a[:, :, 1] = 0.0
    rep = slice_averaged_metrics(a, a)
    assert rep.meta["cc_excluded"] == 1
    assert rep["cc"] == pytest.approx(1.0) and rep["mse"] == 0.0
    with pytest.raises(NoValidSlices):
        require(rep, "psnr")


def test_psnr_mse_identity():
    a, b = RandomStream(1).uniform((5, 5)), RandomStream(2).uniform((5, 5))
    assert image_psnr(a, b) == pytest.approx(10 * math.log10(1 / image_mse(a, b)), abs=1e-12)
