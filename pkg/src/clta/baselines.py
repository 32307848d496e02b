"""Comparison temporal-attention mechanisms evaluated on the same inputs.

avg      - plain frame averaging, no attention parameters.
selfattn - one learning matrix, softmaxed per-frame dot products.
tsf      - shared trainable Gaussians, rescaled only by video length.
sldg     - length-defined Gaussians with a trainable scale per head.

tsf and sldg weights depend only on (T, parameters): two same-length videos
always receive identical weights, regardless of contents.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numerics import sigmoid, softmax_backward, softmax_stable, softplus
from .attention import gaussian_weights


@dataclass
class SelfAttentionParams:
    W: np.ndarray  # (K, d)


@dataclass
class TsfParams:
    centers: np.ndarray  # (K,), mapped through tanh to a fraction of length
    widths: np.ndarray   # (K,), mapped through softplus


@dataclass
class SldgParams:
    scales: np.ndarray   # (K,)


def tsf_init(K: int) -> TsfParams:
    # evenly spaced seeds in [-1, 1]; widths so the effective std ~ 1/(2K)
    centers = np.linspace(-1.0, 1.0, K) if K > 1 else np.zeros(1)
    w0 = np.log(np.expm1(1.0 / (2 * K)))
    return TsfParams(centers=centers, widths=np.full(K, w0))


def average_pool(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] < 1:
        raise ShapeError(f"expected (T>=1, d) matrix, got {F.shape}")
    return F.mean(axis=0)


def self_attention_forward(F: np.ndarray, W: np.ndarray):
    """Per-head softmax over frame scores f_t . w_k. Returns (v, cache)."""
    F = np.asarray(F, dtype=np.float64)
    if F.shape[1] != W.shape[1]:
        raise ShapeError(f"feature dim {F.shape[1]} != matrix cols {W.shape[1]}")
    scores = W @ F.T              # (K, T)
    e = softmax_stable(scores, axis=1)
    v = e @ F                     # (K, d)
    return v, dict(F=F, W=W, e=e, a=scores)


def self_attention_backward(cache, dv, need_dF=False):
    F, W, e = cache["F"], cache["W"], cache["e"]
    de = dv @ F.T
    dscores = softmax_backward(e, de, axis=1)
    dW = dscores @ F
    dF = e.T @ dv + dscores.T @ W if need_dF else None
    return dW, dF


def self_attention(F, params: SelfAttentionParams):
    """Convenience wrapper returning (fused-average V, norm weights)."""
    v, cache = self_attention_forward(np.asarray(getattr(F, "features", F)), params.W)
    return v.mean(axis=0), cache["e"]


def tsf_forward(F: np.ndarray, centers: np.ndarray, widths: np.ndarray, Z: int):
    """Shared Gaussian filters, positions/widths rescaled by T/Z."""
    F = np.asarray(F, dtype=np.float64)
    T = F.shape[0]
    frac = T / Z
    th = np.tanh(centers)
    mu = (th + 1.0) / 2.0 * frac           # (K,)
    sp = softplus(widths)
    sigma = sp * frac                       # (K,)
    a = np.stack([gaussian_weights(T, Z, mu[k], sigma[k]) for k in range(len(mu))])
    e = softmax_stable(a, axis=1)
    v = e @ F
    pos = np.arange(1, T + 1, dtype=np.float64) / Z
    u = (pos[None, :] - mu[:, None]) / sigma[:, None]
    cache = dict(F=F, e=e, a=a, u=u, mu=mu, sigma=sigma, th=th, widths=widths,
                 frac=frac)
    return v, cache


def tsf_backward(cache, dv, need_dF=False):
    F, e, a, u, sigma = cache["F"], cache["e"], cache["a"], cache["u"], cache["sigma"]
    de = dv @ F.T
    da = softmax_backward(e, de, axis=1)
    dg = da * a
    du = dg * (-u)
    dmu = (du * (-1.0 / sigma[:, None])).sum(axis=1)
    dsigma = (du * (-u / sigma[:, None])).sum(axis=1)
    dcenters = dmu * (1.0 - cache["th"] ** 2) / 2.0 * cache["frac"]
    dwidths = dsigma * sigmoid(cache["widths"]) * cache["frac"]
    dF = e.T @ dv if need_dF else None
    return dcenters, dwidths, dF


def tsf_attention(F, params: TsfParams, Z: int):
    """Convenience wrapper returning (fused-average V, norm weights)."""
    v, cache = tsf_forward(np.asarray(getattr(F, "features", F)),
                           params.centers, params.widths, Z)
    return v.mean(axis=0), cache["e"]


def sldg_schedule(T: int, K: int, Z: int):
    """Length-defined means/stds: evenly spaced fractions, std = half-spacing."""
    k = np.arange(1, K + 1, dtype=np.float64)
    mu = (k - 0.5) / K * T / Z
    sigma = np.full(K, T / (2.0 * K * Z))
    return mu, sigma


def sldg_forward(F: np.ndarray, scales: np.ndarray, Z: int):
    F = np.asarray(F, dtype=np.float64)
    T = F.shape[0]
    K = scales.shape[0]
    mu, sigma = sldg_schedule(T, K, Z)
    a = np.stack([gaussian_weights(T, Z, mu[k], sigma[k]) for k in range(K)])
    q = scales[:, None] * a
    e = softmax_stable(q, axis=1)
    v = e @ F
    return v, dict(F=F, e=e, a=a)


def sldg_backward(cache, dv, need_dF=False):
    F, e, a = cache["F"], cache["e"], cache["a"]
    de = dv @ F.T
    dq = softmax_backward(e, de, axis=1)
    dscales = (dq * a).sum(axis=1)
    dF = e.T @ dv if need_dF else None
    return dscales, dF


def sldg_attention(F, params: SldgParams, Z: int):
    """Convenience wrapper returning (fused-average V, norm weights)."""
    v, cache = sldg_forward(np.asarray(getattr(F, "features", F)), params.scales, Z)
    return v.mean(axis=0), cache["e"]
