"""Softmax (linear) and cosine-similarity classification heads."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeError


@dataclass
class SoftmaxHead:
    W: np.ndarray      # (h, c)
    bias: np.ndarray   # (c,)


@dataclass
class CosineHead:
    W_proto: np.ndarray  # (c, h), row i is the prototype of class i
    temperature: float = 10.0


def softmax_logits(V: np.ndarray, head: SoftmaxHead) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if head.W.shape[0] != V.shape[0] or head.W.shape[1] != head.bias.shape[0]:
        raise ShapeError(f"head shapes {head.W.shape}/{head.bias.shape} vs input {V.shape}")
    return head.W.T @ V + head.bias


def softmax_logits_backward(V, head: SoftmaxHead, dlogits):
    dW = np.outer(V, dlogits)
    dbias = dlogits.copy()
    dV = head.W @ dlogits
    return dW, dbias, dV


def cosine_scores(V: np.ndarray, head: CosineHead) -> np.ndarray:
    """Cosine similarities in [-1, 1]; scale by temperature for logits."""
    V = np.asarray(V, dtype=np.float64)
    nv = np.linalg.norm(V)
    nw = np.linalg.norm(head.W_proto, axis=1)
    if nv == 0.0:
        raise DegenerateInputError("zero-norm descriptor in cosine head")
    if np.any(nw == 0.0):
        raise DegenerateInputError("zero-norm prototype in cosine head")
    return (head.W_proto @ V) / (nw * nv)


def cosine_logits(V: np.ndarray, head: CosineHead) -> np.ndarray:
    return head.temperature * cosine_scores(V, head)


def cosine_logits_backward(V, head: CosineHead, dlogits):
    """Returns (dW_proto, dtemperature, dV)."""
    V = np.asarray(V, dtype=np.float64)
    nv = np.linalg.norm(V)
    nw = np.linalg.norm(head.W_proto, axis=1)
    s = (head.W_proto @ V) / (nw * nv)
    ds = head.temperature * dlogits
    dtemp = float(dlogits @ s)
    # d s_i / d w_i = V/(|V||w_i|) - s_i w_i/|w_i|^2
    dW = (ds / nw)[:, None] * (V[None, :] / nv) - (ds * s / nw**2)[:, None] * head.W_proto
    # d s_i / d V = w_i/(|V||w_i|) - s_i V/|V|^2
    dV = (ds / nw) @ head.W_proto / nv - (ds @ s) * V / nv**2
    return dW, dtemp, dV


def predict(logits: np.ndarray) -> int:
    """Argmax class; ties broken toward the lowest index."""
    logits = np.asarray(logits)
    if logits.size == 0:
        raise ShapeError("predict on empty logits")
    return int(np.argmax(logits))
