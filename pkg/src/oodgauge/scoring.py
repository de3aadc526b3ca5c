"""OOD scores: higher means more in-distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import MlpParams, forward
from .numerics import ad
from .numerics.autodiff import _sigmoid_np

SCORERS = ("baseline", "md", "odin")


@dataclass(frozen=True)
class MahalanobisStats:
    means: np.ndarray  # K x d
    precision: np.ndarray  # d x d
    covariance: np.ndarray  # d x d, without the ridge
    lambda_reg: float


@dataclass(frozen=True)
class OdinParams:
    temperature: float = 1000.0
    epsilon: float = 0.01

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def output_probs(logits, head_kind: str, temperature: float = 1.0) -> np.ndarray:
    """The classifier's output vector: softmax for CE, per-class sigmoid for OVADM."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64)) / temperature
    return _softmax(z) if head_kind == "ce" else _sigmoid_np(z)


def msp_score(logits, head_kind: str) -> np.ndarray:
    """Max of the output vector, one score per row."""
    return output_probs(logits, head_kind).max(axis=1)


def fit_mahalanobis(features, labels, lambda_reg: float = 1e-6, n_classes: int | None = None
                    ) -> MahalanobisStats:
    """Class means and a shared covariance (normalised by N) with a ridge of ``lambda_reg``."""
    h = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if len(h) < 2:
        raise ValueError("need at least two samples")
    if lambda_reg <= 0:
        raise ValueError("lambda_reg must be > 0")
    k = n_classes if n_classes is not None else int(y.max()) + 1
    counts = np.bincount(y, minlength=k)
    if np.any(counts == 0):
        raise ValueError(f"empty class(es): {np.flatnonzero(counts == 0).tolist()}")
    means = np.stack([h[y == c].mean(axis=0) for c in range(k)])
    centered = h - means[y]
    cov = centered.T @ centered / len(h)
    d = h.shape[1]
    reg = cov + lambda_reg * np.eye(d)
    try:
        factor = cho_factor(reg, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - ridge keeps reg SPD
        raise ValueError(f"covariance is not positive definite: {exc}") from exc
    precision = cho_solve(factor, np.eye(d))
    precision = 0.5 * (precision + precision.T)
    return MahalanobisStats(means, precision, cov, lambda_reg)


def md_score(stats: MahalanobisStats, features) -> np.ndarray:
    """``max_k -(h - mu_k)^T P (h - mu_k)`` per row; at most 0."""
    h = np.atleast_2d(np.asarray(features, dtype=np.float64))
    best = None
    for mu in stats.means:
        d = h - mu
        s = -np.einsum("ij,jk,ik->i", d, stats.precision, d)
        best = s if best is None else np.maximum(best, s)
    return np.minimum(best, 0.0)


def _log_max_prob(logits, head_kind, temperature):
    pred = np.argmax(ad._val(logits), axis=1)
    z = ad.div(logits, temperature)
    if head_kind == "ce":
        return ad.sub(ad.take_rows(z, pred), ad.logsumexp(z, axis=1))
    # log sigmoid(z) = -softplus(-z)
    return ad.neg(ad.softplus(ad.neg(ad.take_rows(z, pred))))


def odin_perturb(params: MlpParams, x, odin: OdinParams) -> np.ndarray:
    """Move each input by ``epsilon`` along the sign of the gradient of its log max probability."""
    x = np.asarray(x, dtype=np.float64)
    if odin.epsilon == 0:
        return x
    arrays = params.arrays()

    def objective(xv):
        _, logits = forward(arrays, xv, params.head_kind)
        # rows are independent, so the gradient of the sum is per-row
        return ad.sum(_log_max_prob(logits, params.head_kind, odin.temperature))

    g = ad.grad(objective, x)[0]
    return x - odin.epsilon * np.sign(-g)


def odin_score(params: MlpParams, x, odin: OdinParams = OdinParams()) -> np.ndarray:
    x_pert = odin_perturb(params, x, odin)
    _, logits = forward(params, x_pert)
    return output_probs(logits, params.head_kind, odin.temperature).max(axis=1)


def score(scorer: str, params: MlpParams, x, stats: MahalanobisStats | None = None,
          odin: OdinParams = OdinParams(), batch_size: int = 8192) -> np.ndarray:
    """Score a batch of inputs with the named scorer."""
    if scorer not in SCORERS:
        raise ValueError(f"unknown scorer {scorer!r}; choose from {SCORERS}")
    if scorer == "md" and stats is None:
        raise ValueError("md scorer needs fitted Mahalanobis stats")
    x = np.asarray(x, dtype=np.float64)
    out = []
    for start in range(0, len(x), batch_size):
        xb = x[start:start + batch_size]
        if scorer == "odin":
            out.append(odin_score(params, xb, odin))
            continue
        h, logits = forward(params, xb)
        out.append(msp_score(logits, params.head_kind) if scorer == "baseline"
                   else md_score(stats, h))
    return np.concatenate(out) if out else np.empty(0)
