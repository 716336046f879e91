import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from pfm.encode import (GmmModel, PyramidConfig, apply_pca, bow_encode, fisher_vector, fit_codebook,
                        fit_gmm, fit_pca, fv_statistics, pfm_encode)
from pfm.persons import BoundingBox, PersonTrack
from pfm.tracklets import DcsDescriptor


# ------------------------------------------------------------------ GMM

def two_gaussians(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    lab = rng.random(n) < 0.5
    return np.where(lab, -5.0, 5.0)[:, None] + rng.normal(size=(n, 1))


def test_gmm_two_gaussians_recovered():
    g = fit_gmm(two_gaussians(), 2, seed=0)
    order = np.argsort(g.means[:, 0])
    np.testing.assert_allclose(g.means[order, 0], [-5, 5], atol=0.1)
    np.testing.assert_allclose(g.weights, [0.5, 0.5], atol=0.05)
    np.testing.assert_allclose(g.variances[:, 0], [1, 1], atol=0.15)


def test_gmm_single_component_closed_form():
    X = np.random.default_rng(1).normal(size=(300, 4)) * [1, 2, 3, 4] + 7
    g = fit_gmm(X, 1)
    np.testing.assert_allclose(g.means[0], X.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(g.variances[0], X.var(axis=0), rtol=1e-12)
    assert g.weights[0] == 1.0


@pytest.mark.parametrize("seed", range(4))
def test_gmm_loglik_monotone(seed):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, s, size=(150, 3)) for c, s in ((0, 1), (3, 0.5), (-2, 2), (1, 0.3))])
    g = fit_gmm(X, 5, seed=seed)
    tr = np.array(g.loglik_trace)
    assert len(tr) >= 2
    assert np.all(np.diff(tr) >= -1e-9)
    assert abs(g.weights.sum() - 1) < 1e-9
    assert np.all(g.variances >= 1e-4 * X.var(axis=0) - 1e-18)
    post = g.posteriors(X)
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)


def test_gmm_errors():
    with pytest.raises(ValueError, match="at least"):
        fit_gmm(np.random.default_rng(0).normal(size=(15, 2)), 2)
    with pytest.raises(ValueError, match="degenerate"):
        fit_gmm(np.ones((50, 3)), 2)
    bad = np.random.default_rng(0).normal(size=(50, 2))
    bad[3, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        fit_gmm(bad, 2)


def test_gmm_seeded_determinism():
    X = np.random.default_rng(5).normal(size=(400, 3))
    a, b = fit_gmm(X, 4, seed=9), fit_gmm(X, 4, seed=9)
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.variances, b.variances)


# ------------------------------------------------------------------ Fisher vectors

def random_gmm(K, D, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.5, 1.5, K)
    return GmmModel(w / w.sum(), rng.normal(size=(K, D)), rng.uniform(0.5, 2.0, size=(K, D)))


def test_fv_length_k100_d318():
    g = random_gmm(100, 318, 0)
    X = np.random.default_rng(1).normal(size=(20, 318))
    fv = fisher_vector(X, g)
    assert fv.shape == (63600,)
    assert np.linalg.norm(fv) == pytest.approx(1.0, abs=1e-9)


def test_fv_descriptors_at_mean():
    g = GmmModel(np.array([1.0]), np.array([[0.5, -1.0, 2.0]]), np.array([[1.0, 4.0, 0.25]]))
    raw = fv_statistics(np.tile(g.means, (7, 1)), g)
    np.testing.assert_allclose(raw[:3], 0.0, atol=1e-15)
    np.testing.assert_allclose(raw[3:], -1 / math.sqrt(2), rtol=1e-14)
    fv = fisher_vector(np.tile(g.means, (7, 1)), g)
    np.testing.assert_allclose(fv[3:], -1 / math.sqrt(3), rtol=1e-14)


def mean_loglik_oracle(X, w, mu, sd):
    """Log-likelihood written with scipy densities, independent of the package."""
    per = np.stack([math.log(w[k]) + norm.logpdf(X, mu[k], sd[k]).sum(axis=1) for k in range(len(w))])
    m = per.max(axis=0)
    return float(np.mean(m + np.log(np.exp(per - m).sum(axis=0))))


@pytest.mark.parametrize("seed", range(5))
def test_fv_matches_finite_difference_gradients(seed):
    T, K, D = 5, 2, 3
    g = random_gmm(K, D, seed)
    X = np.random.default_rng(100 + seed).normal(size=(T, D)) * 1.5
    raw = fv_statistics(X, g)
    sd = np.sqrt(g.variances)
    h = 1e-6
    num_mu = np.zeros((K, D))
    num_sd = np.zeros((K, D))
    for k in range(K):
        for d in range(D):
            for arr, out in ((g.means, num_mu), (sd, num_sd)):
                plus, minus = arr.copy(), arr.copy()
                plus[k, d] += h
                minus[k, d] -= h
                mu_p = plus if arr is g.means else g.means
                mu_m = minus if arr is g.means else g.means
                sd_p = plus if arr is sd else sd
                sd_m = minus if arr is sd else sd
                out[k, d] = (mean_loglik_oracle(X, g.weights, mu_p, sd_p)
                             - mean_loglik_oracle(X, g.weights, mu_m, sd_m)) / (2 * h)
    w = g.weights[:, None]
    expect = np.concatenate([(sd / np.sqrt(w) * num_mu).ravel(), (sd / np.sqrt(2 * w) * num_sd).ravel()])
    np.testing.assert_allclose(raw, expect, rtol=1e-4, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_fv_order_invariant(seed):
    g = random_gmm(3, 4, seed)
    X = np.random.default_rng(seed).normal(size=(12, 4))
    perm = np.random.default_rng(seed + 1).permutation(12)
    np.testing.assert_allclose(fisher_vector(X, g), fisher_vector(X[perm], g), atol=1e-12)


def test_fv_errors():
    g = random_gmm(2, 3, 0)
    with pytest.raises(ValueError, match="empty"):
        fisher_vector(np.zeros((0, 3)), g)
    with pytest.raises(ValueError, match="dim"):
        fisher_vector(np.zeros((4, 5)), g)


# ------------------------------------------------------------------ PCA

def test_pca_plane_recovery():
    rng = np.random.default_rng(0)
    B = np.linalg.qr(rng.normal(size=(5, 2)))[0]
    X = rng.normal(size=(50, 2)) @ B.T + rng.normal(size=5)
    m = fit_pca(X, 2)
    assert np.abs(m.reconstruct(apply_pca(X, m)) - X).max() <= 1e-8
    np.testing.assert_allclose(m.basis.T @ m.basis, np.eye(2), atol=1e-8)


def test_pca_full_rank_exact():
    X = np.random.default_rng(1).normal(size=(30, 6))
    m = fit_pca(X, 6)
    np.testing.assert_allclose(m.basis.T @ m.basis, np.eye(6), atol=1e-8)
    np.testing.assert_allclose(m.reconstruct(apply_pca(X, m)), X, atol=1e-10)


def test_pca_subtype_split_dims():
    X = np.random.default_rng(2).normal(size=(200, 318))
    m = fit_pca(X, 0.4, subtype_split=(30, 96, 96, 96))
    assert m.output_dim == 129 and m.output_split == (12, 39, 39, 39)


def test_pca_blocks_independent():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(100, 10))
    m = fit_pca(X, 0.5, subtype_split=(4, 6))
    v = rng.normal(size=10)
    u = v.copy()
    u[4:] += rng.normal(size=6)
    a, b = apply_pca(v, m), apply_pca(u, m)
    np.testing.assert_array_equal(a[:2], b[:2])
    assert not np.allclose(a[2:], b[2:])


def test_pca_apply_oracle_and_mean():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 7)) @ rng.normal(size=(7, 7))
    m = fit_pca(X, 3)
    np.testing.assert_allclose(apply_pca(m.mean, m), 0.0, atol=1e-14)
    cov = np.cov(X.T, bias=True)
    vals, vecs = np.linalg.eigh(cov)
    top = vecs[:, ::-1][:, :3]
    for j in range(3):
        col = top[:, j]
        top[:, j] = col if col[np.argmax(np.abs(col))] > 0 else -col
    np.testing.assert_allclose(m.basis, top, atol=1e-8)
    v = rng.normal(size=7)
    expected = [sum(top[i, j] * (v[i] - X[:, i].mean()) for i in range(7)) for j in range(3)]
    np.testing.assert_allclose(apply_pca(v, m), expected, atol=1e-8)


def test_pca_errors():
    with pytest.raises(ValueError, match="rank"):
        fit_pca(np.outer(np.arange(20.0), np.ones(4)), 2)  # rank one
    m = fit_pca(np.random.default_rng(5).normal(size=(20, 4)), 1)
    with pytest.raises(ValueError, match="dim"):
        apply_pca(np.zeros(5), m)


# ------------------------------------------------------------------ BOW

def test_bow_examples():
    cb = np.arange(20.0).reshape(5, 4)
    np.testing.assert_array_equal(bow_encode(np.tile(cb[3], (6, 1)), cb), [0, 0, 0, 1, 0])
    np.testing.assert_array_equal(bow_encode(np.zeros((0, 4)), cb), np.zeros(5))


def test_bow_matches_brute_force():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(100, 3))
    cb = fit_codebook(rng.normal(size=(300, 3)), 8, seed=1)
    counts = np.zeros(8)
    for x in X:
        best = min(range(8), key=lambda k: sum((x[i] - cb[k, i]) ** 2 for i in range(3)))
        counts[best] += 1
    np.testing.assert_allclose(bow_encode(X, cb), counts / 100, atol=1e-15)


# ------------------------------------------------------------------ pyramid

def synthetic_set(n, D, seed, box=(50.0, 50.0, 20.0, 60.0)):
    rng = np.random.default_rng(seed)
    track = PersonTrack([BoundingBox(*box, frame=f) for f in range(40)], "p")
    cx, cy, w, h = box
    out = []
    for i in range(n):
        anchor = (cx + rng.uniform(-w / 2, w / 2), cy + rng.uniform(-h / 2, h / 2))
        full = rng.normal(size=D)
        out.append((DcsDescriptor(full[:0], full, full[:0], full[:0], anchor, int(rng.integers(7, 33))), "p"))
    return out, track


def test_pyramid_single_level_is_plain_fv():
    g = random_gmm(2, 4, 0)
    trs, track = synthetic_set(20, 4, 0)
    pfm = pfm_encode(trs, track, g, pyramid=PyramidConfig(levels=((1, 1),)))
    X = np.stack([d.full for d, _ in trs])
    np.testing.assert_array_equal(pfm.vector, fisher_vector(X, g))
    assert pfm.vector.shape == (16,)


def test_pyramid_empty_lower_cell_is_zero():
    g = random_gmm(2, 4, 1)
    trs, track = synthetic_set(15, 4, 1)
    upper = [(DcsDescriptor(d.coords, d.div_curl, d.curl_shear, d.div_shear,
                            (d.anchor[0], min(d.anchor[1], 49.0)), d.mid_frame), tid) for d, tid in trs]
    pfm = pfm_encode(upper, track, g, pyramid=PyramidConfig(levels=((2, 1),)))
    assert np.linalg.norm(pfm.vector[:16]) == pytest.approx(1.0, abs=1e-9)
    assert not pfm.vector[16:].any()


def test_pyramid_matches_per_cell_recomputation():
    g = random_gmm(2, 4, 2)
    trs, track = synthetic_set(20, 4, 2)
    pfm = pfm_encode(trs, track, g, pyramid=PyramidConfig(levels=((1, 1), (2, 1))))
    X = np.stack([d.full for d, _ in trs])
    top = np.array([d.anchor[1] < 50.0 for d, _ in trs])
    assert 0 < top.sum() < 20
    expected = np.concatenate([fisher_vector(X, g), fisher_vector(X[top], g), fisher_vector(X[~top], g)])
    np.testing.assert_array_equal(pfm.vector, expected)
    assert [(lvl, cell) for lvl, cell, _, _ in pfm.layout] == [(0, (0, 0, 0)), (1, (0, 0, 0)), (1, (1, 0, 0))]


def test_pyramid_temporal_cells():
    g = random_gmm(2, 4, 3)
    trs, track = synthetic_set(30, 4, 3)
    pfm = pfm_encode(trs, track, g, pyramid=PyramidConfig(levels=((1, 1),), temporal_cells=2), span=(0, 40))
    X = np.stack([d.full for d, _ in trs])
    early = np.array([d.mid_frame < 20 for d, _ in trs])
    np.testing.assert_array_equal(pfm.vector, np.concatenate([fisher_vector(X[early], g),
                                                              fisher_vector(X[~early], g)]))


def test_pyramid_no_tracklets():
    g = random_gmm(2, 4, 0)
    _, track = synthetic_set(1, 4, 0)
    with pytest.raises(ValueError, match="no tracklets"):
        pfm_encode([], track, g)
