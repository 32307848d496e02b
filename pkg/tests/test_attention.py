"""Unit checks for the Gaussian attention head."""

import numpy as np
import pytest

from clta.attention import (AttentionTrace, CltaParams, FrameSequence, FusionSpec,
                            attend, attend_backward, attend_forward, fuse,
                            fuse_backward, fusion_weights, gaussian_weights,
                            learn_mean, learn_std, soft_argmax)
from clta.errors import ConfigError, NumericError, ShapeError


def _random_setup(rng, T=None, d=None, K=None):
    T = T or int(rng.integers(1, 9))
    d = d or int(rng.integers(2, 6))
    K = K or int(rng.integers(1, 4))
    Z = T + int(rng.integers(0, 4))
    F = rng.normal(0, 1, size=(T, d))
    Wm = rng.normal(0, 1, size=(K, d))
    Ws = rng.normal(0, 1, size=(K, d))
    return F, Wm, Ws, Z


def test_soft_argmax_range_and_limit():
    rng = np.random.default_rng(0)
    for _ in range(100):
        T = int(rng.integers(1, 12))
        s = rng.normal(0, 1, size=T)
        m = soft_argmax(s, 1.0)
        assert 1.0 <= m <= T
        # huge beta recovers the hard argmax when the top score is unique
        s[int(rng.integers(0, T))] += 2.0
        hard = float(np.argmax(s) + 1)
        assert abs(soft_argmax(s, 1e4) - hard) < 1e-6


def test_soft_argmax_uniform_scores_give_midpoint():
    assert abs(soft_argmax(np.zeros(5), 10.0) - 3.0) < 1e-12


def test_soft_argmax_validation():
    with pytest.raises(ConfigError):
        soft_argmax(np.ones(3), 0.0)
    with pytest.raises(ShapeError):
        soft_argmax(np.array([]), 1.0)


def test_learn_mean_and_std_ranges():
    rng = np.random.default_rng(1)
    for _ in range(200):
        F, Wm, Ws, Z = _random_setup(rng)
        T = F.shape[0]
        mu = learn_mean(F, Wm[0], beta=float(rng.uniform(1, 100)), Z=Z)
        assert 1.0 / Z - 1e-12 <= mu <= T / Z + 1e-12
        sig = learn_std(F, Ws[0], Z=Z)
        assert 0.0 < sig <= T / Z + 1e-12


def test_learn_std_floor_with_nonnegative_features():
    # a strongly negative detector on nonnegative features drives every
    # sigmoid to exact zero; the floor must keep sigma strictly positive
    F = np.abs(np.random.default_rng(2).normal(1, 0.2, size=(8, 4))) + 1.0
    w = np.full(4, -500.0)
    sig = learn_std(F, w, Z=10)
    assert sig == min(1e-3, 0.5 * 8 / 10)


def test_gaussian_weights_shape_and_peak():
    g = gaussian_weights(T=7, Z=10, mu=0.4, sigma=0.1)
    assert g.shape == (7,)
    assert np.all(g > 0) and np.all(g <= 1.0)
    assert int(np.argmax(g)) == 3  # t=4 -> t/Z = 0.4
    with pytest.raises(NumericError):
        gaussian_weights(5, 10, 0.3, 0.0)
    with pytest.raises(ShapeError):
        gaussian_weights(0, 10, 0.3, 0.1)


def test_attend_matches_per_head_composition():
    rng = np.random.default_rng(3)
    for _ in range(30):
        F, Wm, Ws, Z = _random_setup(rng)
        beta = float(rng.uniform(1, 50))
        trace = attend(F, CltaParams(W_mean=Wm, W_std=Ws, beta=beta, Z=Z))
        assert isinstance(trace, AttentionTrace)
        for k in range(Wm.shape[0]):
            mu = learn_mean(F, Wm[k], beta, Z)
            sig = learn_std(F, Ws[k], Z)
            a = gaussian_weights(F.shape[0], Z, mu, sig)
            assert abs(trace.mu[k] - mu) < 1e-12
            assert abs(trace.sigma[k] - sig) < 1e-12
            assert np.allclose(trace.raw_weights[k], a, atol=1e-12)
            e = np.exp(a - a.max())
            e /= e.sum()
            assert np.allclose(trace.norm_weights[k], e, atol=1e-12)
            assert np.allclose(trace.summaries[k], e @ F, atol=1e-12)


def test_attend_normalization_and_ranges():
    rng = np.random.default_rng(4)
    for _ in range(100):
        F, Wm, Ws, Z = _random_setup(rng)
        T = F.shape[0]
        trace, _ = attend_forward(F, Wm, Ws, float(rng.uniform(1, 200)), Z)
        assert np.allclose(trace.norm_weights.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(trace.mu >= 1.0 / Z - 1e-12)
        assert np.all(trace.mu <= T / Z + 1e-12)
        assert np.all(trace.sigma > 0.0)
        assert np.all(trace.sigma <= T / Z + 1e-12)
        assert np.all(trace.raw_weights > 0.0)
        assert np.all(trace.raw_weights <= 1.0 + 1e-15)
        # convex combinations stay inside the per-dimension frame bounds
        lo, hi = F.min(axis=0), F.max(axis=0)
        assert np.all(trace.summaries >= lo[None, :] - 1e-12)
        assert np.all(trace.summaries <= hi[None, :] + 1e-12)


def test_attend_rejects_length_beyond_Z():
    F = np.zeros((5, 3))
    W = np.zeros((2, 3))
    with pytest.raises(ConfigError):
        attend_forward(F, W, W, 10.0, Z=4)


def test_attend_shape_mismatch():
    with pytest.raises(ShapeError):
        attend_forward(np.zeros((4, 3)), np.zeros((2, 5)), np.zeros((2, 5)), 10.0, 8)


def test_attend_backward_finite_difference():
    rng = np.random.default_rng(5)
    for trial in range(10):
        F, Wm, Ws, Z = _random_setup(rng, T=5, d=3, K=2)
        beta = 7.0
        dv = rng.normal(size=(2, 3))

        def loss(Wm_, Ws_):
            trace, _ = attend_forward(F, Wm_, Ws_, beta, Z)
            return float((trace.summaries * dv).sum())

        _, cache = attend_forward(F, Wm, Ws, beta, Z)
        dWm, dWs, _ = attend_backward(cache, dv)
        eps = 1e-6
        for W, dW in ((Wm, dWm), (Ws, dWs)):
            for idx in np.ndindex(W.shape):
                orig = W[idx]
                W[idx] = orig + eps
                lp = loss(Wm, Ws)
                W[idx] = orig - eps
                lm = loss(Wm, Ws)
                W[idx] = orig
                num = (lp - lm) / (2 * eps)
                assert abs(dW[idx] - num) < 1e-6


def test_attend_backward_dF_finite_difference():
    rng = np.random.default_rng(6)
    F, Wm, Ws, Z = _random_setup(rng, T=4, d=3, K=2)
    dv = rng.normal(size=(2, 3))
    _, cache = attend_forward(F, Wm, Ws, 5.0, Z)
    _, _, dF = attend_backward(cache, dv, need_dF=True)
    eps = 1e-6
    for idx in np.ndindex(F.shape):
        orig = F[idx]
        F[idx] = orig + eps
        tp, _ = attend_forward(F, Wm, Ws, 5.0, Z)
        F[idx] = orig - eps
        tm, _ = attend_forward(F, Wm, Ws, 5.0, Z)
        F[idx] = orig
        num = ((tp.summaries - tm.summaries) * dv).sum() / (2 * eps)
        assert abs(dF[idx] - num) < 1e-6


def test_sigma_floor_blocks_gradient():
    rng = np.random.default_rng(7)
    F = np.abs(rng.normal(1.0, 0.2, size=(6, 3))) + 1.0
    Wm = rng.normal(size=(2, 3))
    Ws = np.full((2, 3), -500.0)  # sigma pinned at the floor
    _, cache = attend_forward(F, Wm, Ws, 5.0, Z=8)
    assert np.all(cache["sigma_floored"])
    _, dWs, _ = attend_backward(cache, rng.normal(size=(2, 3)))
    assert np.allclose(dWs, 0.0)


def test_fusion_average_and_soft():
    rng = np.random.default_rng(8)
    v = rng.normal(size=(3, 4))
    trace = AttentionTrace(mu=np.zeros(3), sigma=np.ones(3),
                           raw_weights=np.ones((3, 2)), norm_weights=np.full((3, 2), 0.5),
                           summaries=v)
    assert np.allclose(fuse(trace, FusionSpec(mode="average")), v.mean(axis=0), atol=1e-12)
    logits = rng.normal(size=3)
    w = np.exp(logits - logits.max())
    w /= w.sum()
    spec = FusionSpec(mode="soft_weight", soft_logits=logits)
    assert np.allclose(fuse(trace, spec), w @ v, atol=1e-12)
    assert np.allclose(fusion_weights(spec, 3).sum(), 1.0, atol=1e-12)


def test_fusion_spec_validation():
    with pytest.raises(ConfigError):
        FusionSpec(mode="nope")
    with pytest.raises(ConfigError):
        FusionSpec(mode="soft_weight")
    with pytest.raises(ShapeError):
        fusion_weights(FusionSpec(mode="soft_weight", soft_logits=np.zeros(2)), 3)


def test_fuse_backward_finite_difference():
    rng = np.random.default_rng(9)
    v = rng.normal(size=(3, 4))
    logits = rng.normal(size=3)
    dV = rng.normal(size=4)
    spec = FusionSpec(mode="soft_weight", soft_logits=logits)
    dv, dlog = fuse_backward(v, spec, dV)
    eps = 1e-6

    def loss(v_, logits_):
        trace = AttentionTrace(np.zeros(3), np.ones(3), np.ones((3, 1)),
                               np.ones((3, 1)), v_)
        return float(fuse(trace, FusionSpec(mode="soft_weight", soft_logits=logits_)) @ dV)

    for idx in np.ndindex(v.shape):
        orig = v[idx]
        v[idx] = orig + eps
        lp = loss(v, logits)
        v[idx] = orig - eps
        lm = loss(v, logits)
        v[idx] = orig
        assert abs(dv[idx] - (lp - lm) / (2 * eps)) < 1e-6
    for i in range(3):
        orig = logits[i]
        logits[i] = orig + eps
        lp = loss(v, logits)
        logits[i] = orig - eps
        lm = loss(v, logits)
        logits[i] = orig
        assert abs(dlog[i] - (lp - lm) / (2 * eps)) < 1e-6


def test_frame_sequence_validation():
    with pytest.raises(ShapeError):
        FrameSequence(features=np.zeros(5))
    with pytest.raises(ShapeError):
        FrameSequence(features=np.zeros((0, 4)))
    with pytest.raises(NumericError):
        FrameSequence(features=np.array([[np.nan, 0.0]]))
    seq = FrameSequence(features=np.ones((3, 2)), label="x", video_id="v0")
    assert seq.T == 3 and seq.d == 2


def test_clta_params_validation():
    with pytest.raises(ShapeError):
        CltaParams(W_mean=np.zeros((2, 3)), W_std=np.zeros((2, 4)), beta=1.0, Z=5)
    with pytest.raises(ConfigError):
        CltaParams(W_mean=np.zeros((2, 3)), W_std=np.zeros((2, 3)), beta=-1.0, Z=5)
    with pytest.raises(ConfigError):
        CltaParams(W_mean=np.zeros((2, 3)), W_std=np.zeros((2, 3)), beta=1.0, Z=0)
