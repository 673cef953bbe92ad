import numpy as np
import pytest

from domadapt import kernels
from domadapt.core import RandomStream
from domadapt.embed import TsneConfig, joint_probabilities, pca_embed, tsne_embed
from domadapt.errors import InvalidConfig, PerplexityInfeasible, TooFewPoints


def _perplexity_of_rows(p_cond):
    """2 ** H for each conditional row, entropy in bits, computed directly."""
    out = []
    for row in p_cond:
        nz = row[row > 0]
        out.append(2.0 ** (-(nz * np.log2(nz)).sum()))
    return np.array(out)


def test_conditional_rows_hit_target_perplexity():
    x = RandomStream(0).normal((40, 5))
    d2 = kernels.sq_dists(x, x)
    np.fill_diagonal(d2, 0.0)
    for perp in (2.0, 5.0, 10.0):
        cond, perps = kernels.conditional_p(d2, perp, 1e-5, 50)
        assert np.allclose(cond.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diag(cond) == 0)
        measured = _perplexity_of_rows(cond)
        assert np.max(np.abs(measured - perp)) <= 1e-4
        assert np.allclose(measured, perps, atol=1e-9)


def test_joint_probabilities_symmetric_unit_mass():
    x = RandomStream(1).normal((25, 3))
    p, _ = joint_probabilities(x, 5.0)
    assert np.allclose(p, p.T, atol=0)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p >= 0)


def test_duplicate_rows_are_handled():
    x = np.repeat(RandomStream(2).normal((6, 2)), 2, axis=0)
    p, perps = joint_probabilities(x, 2.0)
    assert np.isfinite(p).all() and np.allclose(perps, 2.0, atol=1e-4)


def test_perplexity_bounds():
    cfg = TsneConfig()
    assert cfg.resolve_perplexity(100) == 30.0
    assert cfg.resolve_perplexity(31) == 10.0
    with pytest.raises(PerplexityInfeasible):
        TsneConfig(perplexity=20).resolve_perplexity(31)
    with pytest.raises(PerplexityInfeasible):
        TsneConfig(perplexity=0.5).resolve_perplexity(31)
    with pytest.raises(InvalidConfig):
        TsneConfig(iterations=10)
    with pytest.raises(TooFewPoints):
        tsne_embed(np.zeros((3, 2)))


def test_tsne_kl_decreases_and_is_deterministic():
    r = RandomStream(3)
    x = np.vstack([r.normal((20, 6)), r.normal((20, 6)) + 4])
    cfg = TsneConfig(perplexity=8, iterations=1000, seed=5)
    a = tsne_embed(x, cfg)
    b = tsne_embed(x, cfg)
    assert a.kl_final < a.kl_initial
    assert np.array_equal(a.embedding, b.embedding)
    assert np.max(np.abs(a.perplexities - 8)) <= 1e-4
    assert np.allclose(a.embedding.mean(axis=0), 0, atol=1e-9)
    # nearest map neighbour comes from the same input cluster
    e = a.embedding
    d = ((e[:, None] - e[None]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    lab = np.r_[np.zeros(20), np.ones(20)]
    assert np.mean(lab[d.argmin(1)] == lab) >= 0.95


def test_tsne_gradient_matches_finite_differences():
    r = RandomStream(4)
    y = r.normal((8, 2))
    p = r.uniform((8, 8))
    p = p + p.T
    np.fill_diagonal(p, 0)
    p /= p.sum()
    g = kernels.tsne_grad(np.ascontiguousarray(y), p)
    h = 1e-6
    for i in range(8):
        for k in range(2):
            yp, ym = y.copy(), y.copy()
            yp[i, k] += h
            ym[i, k] -= h
            fd = (kernels.tsne_kl(yp, p) - kernels.tsne_kl(ym, p)) / (2 * h)
            assert abs(fd - g[i, k]) <= 1e-6 * max(1.0, abs(fd))


def test_pca_embed():
    x = RandomStream(5).normal((30, 4)) * [5, 2, 1, 0.1]
    z = pca_embed(x)
    assert z.shape == (30, 2)
    assert np.allclose(z.mean(0), 0, atol=1e-12)
    assert z[:, 0].var() >= z[:, 1].var()
    one = pca_embed(x[:, :1])
    assert one.shape == (30, 2) and np.all(one[:, 1] == 0)
    with pytest.raises(TooFewPoints):
        pca_embed(x[:1])
