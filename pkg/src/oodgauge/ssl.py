"""Self-supervised auxiliary losses on noise-augmented views.

The projector and predictor are 8-8-8 ReLU MLPs stored in the same flat
parameter mapping as the classifier, under ``proj_*`` and ``pred_*`` keys.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import HIDDEN, TRUNK_KEYS, trunk
from .numerics import ad
from .numerics.rng import Rng, gaussian

SSL_KINDS = ("none", "simclr", "byol")
PROJ_KEYS = ("proj_W1", "proj_b1", "proj_W2", "proj_b2")
PRED_KEYS = ("pred_W1", "pred_b1", "pred_W2", "pred_b2")
TARGET_KEYS = TRUNK_KEYS + PROJ_KEYS

_MASKED = -1e30  # self-similarity filler; exp underflows to exactly 0


@dataclass(frozen=True)
class AugSpec:
    noise_std: float = 0.01

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass
class ByolState:
    online: dict[str, np.ndarray]
    target: dict[str, np.ndarray]
    tau_ema: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.tau_ema <= 1.0:
            raise ValueError("tau_ema must lie in [0, 1]")
        for k in TARGET_KEYS:
            if self.target[k].shape != self.online[k].shape:
                raise ValueError(f"target {k} shape differs from online")

    @classmethod
    def from_online(cls, online, tau_ema: float = 0.99) -> "ByolState":
        return cls(online, {k: np.array(online[k], copy=True) for k in TARGET_KEYS}, tau_ema)


def _mlp_block(rng: Rng, prefix: str) -> dict[str, np.ndarray]:
    bound = 1.0 / np.sqrt(HIDDEN)
    return {
        f"{prefix}_W1": rng.uniform(HIDDEN * HIDDEN, -bound, bound).reshape(HIDDEN, HIDDEN),
        f"{prefix}_b1": np.zeros(HIDDEN),
        f"{prefix}_W2": rng.uniform(HIDDEN * HIDDEN, -bound, bound).reshape(HIDDEN, HIDDEN),
        f"{prefix}_b2": np.zeros(HIDDEN),
    }


def init_ssl_heads(ssl_kind: str, rng: Rng) -> dict[str, np.ndarray]:
    """Projector (SimCLR, BYOL) and predictor (BYOL only) parameters."""
    if ssl_kind not in SSL_KINDS:
        raise ValueError(f"unknown ssl kind {ssl_kind!r}")
    if ssl_kind == "none":
        return {}
    out = _mlp_block(rng, "proj")
    if ssl_kind == "byol":
        out.update(_mlp_block(rng, "pred"))
    return out


def _block(p, prefix, x):
    h = ad.relu(ad.add(ad.matmul(x, p[f"{prefix}_W1"]), p[f"{prefix}_b1"]))
    return ad.add(ad.matmul(h, p[f"{prefix}_W2"]), p[f"{prefix}_b2"])


def project(p, x):
    return _block(p, "proj", trunk(p, x))


def augment(x, spec: AugSpec, rng: Rng):
    """Two independently noised copies of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    v1 = x + gaussian(rng, n, 0.0, spec.noise_std).reshape(x.shape)
    v2 = x + gaussian(rng, n, 0.0, spec.noise_std).reshape(x.shape)
    return v1, v2


def _row_normalize(z):
    norms = ad.l2norm(z, axis=1, keepdims=True)
    if np.any(ad._val(norms) == 0):
        raise ValueError("zero-norm embedding: cosine similarity undefined")
    return ad.div(z, norms)


def ntxent(z1, z2, tau: float = 0.5):
    """NT-Xent over ``2N`` stacked embeddings; row ``i`` of ``z1`` pairs with row ``i`` of ``z2``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = np.shape(ad._val(z1))[0]
    if n < 1 or np.shape(ad._val(z2)) != np.shape(ad._val(z1)):
        raise ValueError("z1 and z2 must have the same non-empty shape")
    zn = _row_normalize(ad.concat([z1, z2], axis=0))
    sim = ad.div(ad.matmul(zn, ad.transpose(zn)), tau)
    sim = ad.add(sim, np.diag(np.full(2 * n, _MASKED)))
    pos = np.concatenate([np.arange(n, 2 * n), np.arange(n)])
    return ad.mean(ad.sub(ad.logsumexp(sim, axis=1), ad.take_rows(sim, pos)))


def _cosine_gap(q, z):
    # 2 - 2 cos per row
    cos = ad.sum(ad.mul(_row_normalize(q), _row_normalize(z)), axis=1)
    return ad.sub(2.0, ad.mul(2.0, cos))


def byol_loss(online, target, view1, view2):
    """Symmetrized BYOL regression loss; the target branch is wrapped in stop-gradient."""
    if np.shape(view1) != np.shape(view2):
        raise ValueError("views differ in shape")
    q1 = _block(online, "pred", project(online, view1))
    q2 = _block(online, "pred", project(online, view2))
    t1 = ad.stop_gradient(project(target, view1))
    t2 = ad.stop_gradient(project(target, view2))
    return ad.mul(0.5, ad.add(ad.mean(_cosine_gap(q1, t2)), ad.mean(_cosine_gap(q2, t1))))


def ema_update(state: ByolState) -> ByolState:
    tau = state.tau_ema
    target = {k: tau * state.target[k] + (1.0 - tau) * state.online[k] for k in TARGET_KEYS}
    return ByolState(state.online, target, tau)


def multitask_loss(l_cls, l_ss, alpha: float):
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return ad.add(l_cls, ad.mul(alpha, l_ss))
