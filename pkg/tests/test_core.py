import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from domadapt.core import (AdaptationConfig, AdaptationOutput, FeatureDataset, KernelSpec,
                           RandomStream, pooled_standardize, validate_dataset)
from domadapt.errors import (DimMismatch, EmptyDataset, InvalidConfig, LabelCountMismatch,
                             NegativeLabel, NonFiniteValue, RaggedRow, UnknownMethod)


class _Raw:
    def __init__(self, samples, labels=None):
        self.samples, self.labels = samples, labels


def test_validate_accepts_small_labeled_matrix():
    assert validate_dataset(_Raw(np.arange(6.0).reshape(3, 2), [0, 1, 0])) is None


def test_validate_reports_first_nan_position():
    with pytest.raises(NonFiniteValue) as info:
        validate_dataset(_Raw(np.array([[0.0, 1.0], [np.nan, 2.0]])))
    assert (info.value.row, info.value.col) == (1, 0)


def test_validate_label_count():
    with pytest.raises(LabelCountMismatch):
        FeatureDataset(np.zeros((3, 2)), [0, 1])


def test_validate_other_errors():
    with pytest.raises(RaggedRow):
        validate_dataset(_Raw([[1.0, 2.0], [3.0]]))
    with pytest.raises(EmptyDataset):
        validate_dataset(_Raw([]))
    with pytest.raises(NegativeLabel):
        FeatureDataset(np.zeros((2, 1)), [0, -1])


def test_dataset_is_read_only_copy():
    x = np.zeros((2, 2))
    ds = FeatureDataset(x)
    x[0, 0] = 5.0
    assert ds.samples[0, 0] == 0.0
    with pytest.raises(ValueError):
        ds.samples[0, 0] = 1.0


def test_pooled_standardize_hand_values():
    s, t = pooled_standardize(FeatureDataset([[0.0]]), FeatureDataset([[2.0]], domain="target"))
    assert s.samples[0, 0] == -1.0 and t.samples[0, 0] == 1.0


def test_pooled_standardize_equal_inputs_and_constant_column():
    x = np.array([[5.0, 1.0], [5.0, 2.0]])
    s, t = pooled_standardize(FeatureDataset(x), FeatureDataset(x))
    assert np.array_equal(s.samples, t.samples)
    assert np.all(s.samples[:, 0] == 0.0)


def test_pooled_standardize_dim_mismatch():
    with pytest.raises(DimMismatch):
        pooled_standardize(FeatureDataset(np.zeros((2, 2))), FeatureDataset(np.zeros((2, 3))))


_mats = hnp.arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(1, 4)),
                   elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(_mats, st.floats(-50, 50), st.floats(0.1, 10))
def test_pooled_standardize_idempotent(a, shift, scale):
    s0, t0 = FeatureDataset(a), FeatureDataset(a * scale + shift)
    s1, t1 = pooled_standardize(s0, t0)
    s2, t2 = pooled_standardize(s1, t1)
    assert np.max(np.abs(s2.samples - s1.samples)) <= 1e-12 * max(1.0, np.abs(s1.samples).max())
    assert np.max(np.abs(t2.samples - t1.samples)) <= 1e-12 * max(1.0, np.abs(t1.samples).max())


def test_config_validation():
    with pytest.raises(UnknownMethod):
        AdaptationConfig("nope")
    with pytest.raises(InvalidConfig):
        AdaptationConfig("tca", subspace_dim=0)
    with pytest.raises(InvalidConfig):
        AdaptationConfig("tca", reg=-1.0)
    with pytest.raises(InvalidConfig):
        KernelSpec("rbf", -2.0)
    with pytest.raises(InvalidConfig):
        KernelSpec("poly")


def test_config_dict_round_trip():
    cfg = AdaptationConfig("tjm", 3, KernelSpec("rbf", 0.5), 0.1, 4, {"lambda": 2}, 11)
    assert AdaptationConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.replace(aux={"x": 1}).aux == {"lambda": 2.0, "x": 1.0}


def test_output_rejects_width_mismatch():
    cfg = AdaptationConfig("baseline")
    with pytest.raises(DimMismatch):
        AdaptationOutput(np.zeros((2, 2)), np.zeros((2, 3)), "baseline", cfg)
    with pytest.raises(NonFiniteValue):
        AdaptationOutput(np.array([[np.inf]]), np.zeros((1, 1)), "baseline", cfg)


def test_stream_determinism_and_spawn():
    a, b = RandomStream(42), RandomStream(42)
    assert np.array_equal(a.normal(100), b.normal(100))
    assert np.array_equal(a.uniform(7), b.uniform(7))
    p = RandomStream(3)
    c0 = p.spawn(0).uniform(5)
    first = p.uniform(5)
    assert np.array_equal(c0, RandomStream(3).spawn(0).uniform(5))
    assert not np.array_equal(c0, first)
    assert not np.array_equal(RandomStream(3).spawn(1).uniform(5), c0)


def test_normal_is_box_muller_of_uniforms():
    u = RandomStream(0).uniform(4)
    z = RandomStream(0).normal(3)
    assert np.all((u >= 0) & (u < 1))
    # first half of the uniforms feeds the radius, second half the angle
    r = np.sqrt(-2 * np.log(1 - u[0]))
    assert z[0] == r * np.cos(2 * np.pi * u[2])
    assert z[1] == r * np.sin(2 * np.pi * u[2])
    assert z[2] == np.sqrt(-2 * np.log(1 - u[1])) * np.cos(2 * np.pi * u[3])


def test_stream_seed_range():
    with pytest.raises(InvalidConfig):
        RandomStream(-1)
    with pytest.raises(InvalidConfig):
        RandomStream(2**64)
    RandomStream(2**64 - 1).uniform()


def test_normal_moments():
    z = RandomStream(5).normal(20000)
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03
