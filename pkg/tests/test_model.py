"""Whole-model forward/backward checks across the configuration grid."""

import zlib

import numpy as np
import pytest

from clta.errors import ConfigError, ShapeError
from clta.model import MODEL_KINDS, Model, ModelConfig, descriptor, loss_and_grads
from clta.numerics import finite_diff_check


def _small_cfg(kind, classifier="softmax", fusion="average", stage="post",
               batch_norm=False):
    return ModelConfig(kind=kind, classifier=classifier, fusion=fusion,
                       num_gaussians=2, beta=10.0, Z=7, feature_dim=3, hidden=5,
                       num_classes=3, projection_stage=stage, dropout=0.0,
                       batch_norm=batch_norm)


def _small_batch(rng, d=3):
    return [(rng.standard_normal((t, d)), int(rng.integers(0, 3))) for t in (3, 5)]


def _randomize_head(model, rng):
    # zero-init classifier weights pass no gradient to the attention
    if model.cfg.classifier == "softmax":
        model.params["cls_W"] = rng.standard_normal(model.params["cls_W"].shape) * 0.5
        model.params["cls_b"] = rng.standard_normal(model.params["cls_b"].shape) * 0.1
    if "soft_logits" in model.params:
        model.params["soft_logits"] = rng.standard_normal(
            model.params["soft_logits"].shape) * 0.3


# every model kind, both classifiers, both fusions, both projection stages
GRID = [(k, clf, fus, st)
        for k in MODEL_KINDS
        for clf in ("softmax", "cosine")
        for fus, st in (("average", "post"), ("soft_weight", "pre"))]


@pytest.mark.parametrize("kind,classifier,fusion,stage", GRID)
def test_gradients_match_finite_differences(kind, classifier, fusion, stage):
    rng = np.random.default_rng(
        zlib.crc32("/".join((kind, classifier, fusion, stage)).encode()))
    model = Model(_small_cfg(kind, classifier, fusion, stage), rng)
    _randomize_head(model, rng)
    batch = _small_batch(rng)

    def loss_fn(params):
        model.params = params
        return loss_and_grads(model, batch, train=False)

    err = finite_diff_check(loss_fn, model.params)
    assert err < 1e-5, f"{kind}/{classifier}/{fusion}/{stage}: fd error {err:.3e}"


def test_gradients_with_batch_norm():
    rng = np.random.default_rng(11)
    model = Model(_small_cfg("clta", batch_norm=True), rng)
    _randomize_head(model, rng)
    # shift the running stats away from the identity transform
    model.bn_mean = rng.standard_normal(5) * 0.2
    model.bn_var = np.abs(rng.standard_normal(5)) + 0.5
    batch = _small_batch(rng)

    def loss_fn(params):
        model.params = params
        return loss_and_grads(model, batch, train=False)

    assert finite_diff_check(loss_fn, model.params) < 1e-6


def test_forward_logit_shapes():
    rng = np.random.default_rng(0)
    for kind in MODEL_KINDS:
        model = Model(_small_cfg(kind), rng)
        logits, _ = model.forward_video(rng.standard_normal((4, 3)))
        assert logits.shape == (3,)
        assert np.all(np.isfinite(logits))


def test_descriptor_matches_eval_forward():
    rng = np.random.default_rng(1)
    model = Model(_small_cfg("clta"), rng)
    F = rng.standard_normal((5, 3))
    _, cache = model.forward_video(F, train=False)
    assert np.allclose(descriptor(model, F), cache["y"], atol=1e-15)


def test_dropout_needs_rng_and_changes_output():
    rng = np.random.default_rng(2)
    cfg = _small_cfg("clta")
    cfg.dropout = 0.5
    model = Model(cfg, rng)
    _randomize_head(model, rng)
    F = rng.standard_normal((4, 3))
    with pytest.raises(ConfigError):
        model.forward_video(F, train=True)
    l1, _ = model.forward_video(F, train=True, rng=np.random.default_rng(3))
    l2, _ = model.forward_video(F, train=False)
    assert not np.allclose(l1, l2)


def test_sldg_forces_soft_fusion():
    cfg = ModelConfig(kind="sldg", fusion="average", num_gaussians=2, Z=5,
                      feature_dim=3, dropout=0.0)
    assert cfg.fusion == "soft_weight"
    model = Model(cfg, np.random.default_rng(0))
    assert "soft_logits" in model.params


def test_clone_is_independent():
    rng = np.random.default_rng(4)
    model = Model(_small_cfg("clta"), rng)
    twin = model.clone()
    twin.params["W_mean"][0, 0] += 1.0
    assert model.params["W_mean"][0, 0] != twin.params["W_mean"][0, 0]


def test_from_config_roundtrip():
    rng = np.random.default_rng(5)
    model = Model(_small_cfg("clta", fusion="soft_weight"), rng)
    _randomize_head(model, rng)
    rebuilt = Model.from_config(model.config_dict(), model.params)
    F = rng.standard_normal((4, 3))
    a, _ = model.forward_video(F)
    b, _ = rebuilt.forward_video(F)
    assert np.allclose(a, b, atol=1e-15)


def test_from_config_rejects_bad_checkpoints():
    rng = np.random.default_rng(6)
    model = Model(_small_cfg("clta"), rng)
    partial = dict(model.params)
    del partial["W_mean"]
    with pytest.raises(ConfigError):
        Model.from_config(model.config_dict(), partial)
    wrong = dict(model.params)
    wrong["W_mean"] = np.zeros((1, 1))
    with pytest.raises(ShapeError):
        Model.from_config(model.config_dict(), wrong)


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(kind="nope")
    with pytest.raises(ConfigError):
        ModelConfig(classifier="nope")
    with pytest.raises(ConfigError):
        ModelConfig(beta=0.0)
    with pytest.raises(ConfigError):
        ModelConfig(num_gaussians=0)
    with pytest.raises(ConfigError):
        ModelConfig(dropout=1.0)


def test_loss_and_grads_empty_batch():
    model = Model(_small_cfg("avg"), np.random.default_rng(0))
    with pytest.raises(ConfigError):
        loss_and_grads(model, [])
