"""Content-and-length based Gaussian temporal attention.

Per video, each of the K attention heads learns a Gaussian over the
normalized frame axis t/Z. The mean comes from a soft-argmax over the dot
products of frames with a mean-learning row, the standard deviation from
the sigmoid-summed dot products with a std-learning row. The resulting
weights aggregate the frames into K video-level summaries, which a fusion
step combines into one descriptor.

Frame indices are 1-based inside all formulas; Z is the dataset-wide max
sequence length, frozen from the training split.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .numerics import sigmoid, sigmoid_grad, softmax_backward, softmax_stable

# Below this log-weight the Gaussian is clamped to keep weights strictly
# positive; the gradient is treated as zero in the clamped region.
_LOG_FLOOR = -700.0

# Learned sigmas are floored here (in t/Z units) so a std detector that
# drives every sigmoid to zero cannot collapse the Gaussian to zero width;
# the gradient is treated as zero at the floor.
_SIGMA_FLOOR = 1e-3


@dataclass
class FrameSequence:
    """One video: a (T, d) float64 feature matrix plus optional label."""

    features: np.ndarray
    label: str | None = None
    video_id: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ShapeError(f"features must be (T>=1, d>=1), got {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise NumericError(f"non-finite features in video {self.video_id!r}")

    @property
    def T(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class CltaParams:
    """Mean/std learning matrices plus the fixed scale and length normalizer."""

    W_mean: np.ndarray  # (K, d)
    W_std: np.ndarray   # (K, d)
    beta: float
    Z: int

    def __post_init__(self):
        self.W_mean = np.asarray(self.W_mean, dtype=np.float64)
        self.W_std = np.asarray(self.W_std, dtype=np.float64)
        if self.W_mean.shape != self.W_std.shape or self.W_mean.ndim != 2:
            raise ShapeError("W_mean and W_std must be (K, d) with equal shapes")
        if self.beta <= 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if self.Z < 1:
            raise ConfigError(f"Z must be >= 1, got {self.Z}")

    @property
    def K(self) -> int:
        return self.W_mean.shape[0]


@dataclass
class AttentionTrace:
    """Everything the attention step computed, for inspection and CSV dumps."""

    mu: np.ndarray           # (K,) in [1/Z, T/Z]
    sigma: np.ndarray        # (K,) in [_SIGMA_FLOOR, T/Z]
    raw_weights: np.ndarray  # (K, T), entries in (0, 1]
    norm_weights: np.ndarray  # (K, T), rows sum to 1
    summaries: np.ndarray    # (K, d)


@dataclass
class FusionSpec:
    """How the K summaries become one descriptor."""

    mode: str = "average"  # "average" | "soft_weight"
    soft_logits: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("average", "soft_weight"):
            raise ConfigError(f"unknown fusion mode {self.mode!r}")
        if self.mode == "soft_weight":
            if self.soft_logits is None:
                raise ConfigError("soft_weight fusion requires soft_logits")
            self.soft_logits = np.asarray(self.soft_logits, dtype=np.float64)


def soft_argmax(scores: np.ndarray, beta: float) -> float:
    """Differentiable argmax: expectation of the 1-based index under
    softmax(beta * scores). Result lies in [1, T]."""
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ShapeError("scores must be a nonempty vector")
    p = softmax_stable(beta * scores)
    idx = np.arange(1, scores.size + 1, dtype=np.float64)
    return float(p @ idx)


def learn_mean(F: np.ndarray, w_mean_k: np.ndarray, beta: float, Z: int) -> float:
    """Length-normalized soft-argmax of per-frame scores; in [1/Z, T/Z]."""
    F = np.asarray(F, dtype=np.float64)
    if F.shape[0] > Z:
        raise ConfigError(f"sequence length {F.shape[0]} exceeds Z={Z}")
    return soft_argmax(F @ np.asarray(w_mean_k, dtype=np.float64), beta) / Z


def learn_std(F: np.ndarray, w_std_k: np.ndarray, Z: int) -> float:
    """Sum of per-frame sigmoid scores over Z, floored; in [floor, T/Z]."""
    F = np.asarray(F, dtype=np.float64)
    s = float(np.sum(sigmoid(F @ np.asarray(w_std_k, dtype=np.float64)))) / Z
    return max(s, min(_SIGMA_FLOOR, 0.5 * F.shape[0] / Z))


def gaussian_weights(T: int, Z: int, mu: float, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian weights exp(-((t/Z - mu)/sigma)^2 / 2), t=1..T."""
    if sigma <= 0:
        raise NumericError(f"sigma must be > 0, got {sigma}")
    if T < 1:
        raise ShapeError(f"T must be >= 1, got {T}")
    pos = np.arange(1, T + 1, dtype=np.float64) / Z
    g = -0.5 * ((pos - mu) / sigma) ** 2
    return np.exp(np.maximum(g, _LOG_FLOOR))


def attend(F, params: CltaParams) -> AttentionTrace:
    """Full attention pass over one video; see attend_forward for internals."""
    trace, _ = attend_forward(np.asarray(getattr(F, "features", F)), params.W_mean,
                              params.W_std, params.beta, params.Z)
    return trace


def attend_forward(F: np.ndarray, W_mean: np.ndarray, W_std: np.ndarray,
                   beta: float, Z: int):
    """Vectorized-over-K attention forward. Returns (trace, cache)."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise ShapeError(f"F must be (T, d), got shape {F.shape}")
    if F.shape[1] != W_mean.shape[1] or F.shape[1] != W_std.shape[1]:
        raise ShapeError(
            f"feature dim {F.shape[1]} does not match matrices "
            f"{W_mean.shape} / {W_std.shape}")
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    T = F.shape[0]
    if T > Z:
        raise ConfigError(f"sequence length {T} exceeds Z={Z}")
    idx = np.arange(1, T + 1, dtype=np.float64)
    pos = idx / Z                                   # (T,)

    scores_m = F @ W_mean.T                          # (T, K)
    p = softmax_stable(beta * scores_m, axis=0)      # soft-argmax distribution
    mu = (idx @ p) / Z                               # (K,)

    scores_s = F @ W_std.T                           # (T, K)
    sg = sigmoid(scores_s)
    sigma_raw = sg.sum(axis=0) / Z                   # (K,)
    floor = min(_SIGMA_FLOOR, 0.5 * T / Z)
    sigma = np.maximum(sigma_raw, floor)

    u = (pos[None, :] - mu[:, None]) / sigma[:, None]  # (K, T)
    g = -0.5 * u * u
    clamped = g < _LOG_FLOOR
    a = np.exp(np.maximum(g, _LOG_FLOOR))            # (K, T)
    e = softmax_stable(a, axis=1)                    # (K, T)
    v = e @ F                                        # (K, d)

    trace = AttentionTrace(mu=mu, sigma=sigma, raw_weights=a, norm_weights=e, summaries=v)
    cache = dict(F=F, idx=idx, pos=pos, p=p, sg=sg, u=u, a=a, e=e,
                 clamped=clamped, mu=mu, sigma=sigma,
                 sigma_floored=sigma_raw < floor, beta=beta, Z=Z,
                 W_mean=W_mean, W_std=W_std)
    return trace, cache


def attend_backward(cache: dict, dv: np.ndarray, need_dF: bool = False):
    """Backprop through attend_forward.

    dv: (K, d) upstream gradient on the summaries.
    Returns (dW_mean, dW_std, dF-or-None).
    """
    F, e, a, u = cache["F"], cache["e"], cache["a"], cache["u"]
    p, sg, pos = cache["p"], cache["sg"], cache["pos"]
    sigma, beta, Z = cache["sigma"], cache["beta"], cache["Z"]

    de = dv @ F.T                                    # (K, T)
    dF = e.T @ dv if need_dF else None               # summary path

    da = softmax_backward(e, de, axis=1)
    dg = da * a
    dg[cache["clamped"]] = 0.0
    du = dg * (-u)
    dmu = (du * (-1.0 / sigma[:, None])).sum(axis=1)     # (K,)
    dsigma = (du * (-u / sigma[:, None])).sum(axis=1)    # (K,)
    dsigma[cache["sigma_floored"]] = 0.0

    # mean path: mu = (idx @ p) / Z, p = softmax(beta * F W_mean^T) over frames
    dp = dmu[None, :] * (pos[:, None])                   # idx/Z == pos
    dsm = beta * softmax_backward(p, dp, axis=0)         # (T, K)
    dW_mean = dsm.T @ F
    if need_dF:
        dF = dF + dsm @ cache["W_mean"]

    # std path: sigma = sum_t sigmoid(F W_std^T) / Z
    dss = (dsigma[None, :] / Z) * sigmoid_grad(sg)       # (T, K)
    dW_std = dss.T @ F
    if need_dF:
        dF = dF + dss @ cache["W_std"]

    return dW_mean, dW_std, dF


def fusion_weights(spec: FusionSpec, K: int) -> np.ndarray:
    if spec.mode == "average":
        return np.full(K, 1.0 / K)
    if spec.soft_logits.shape != (K,):
        raise ShapeError(f"soft_logits shape {spec.soft_logits.shape} != ({K},)")
    return softmax_stable(spec.soft_logits)


def fuse(trace: AttentionTrace, spec: FusionSpec) -> np.ndarray:
    """Combine the K summaries into one descriptor V."""
    s = fusion_weights(spec, trace.summaries.shape[0])
    return s @ trace.summaries


def fuse_backward(v: np.ndarray, spec: FusionSpec, dV: np.ndarray):
    """Returns (dv, d_soft_logits-or-None) for the fusion step."""
    K = v.shape[0]
    s = fusion_weights(spec, K)
    dv = s[:, None] * dV[None, :]
    dlogits = None
    if spec.mode == "soft_weight":
        ds = v @ dV
        dlogits = softmax_backward(s, ds)
    return dv, dlogits
