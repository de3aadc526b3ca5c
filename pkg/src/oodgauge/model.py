"""Two-hidden-layer MLP trunk with a softmax (CE) or one-vs-all distance (OVADM) head."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .numerics import ad
from .numerics.rng import Rng, gaussian

HIDDEN = 8
HeadKind = Literal["ce", "ovadm"]
HEAD_KINDS = ("ce", "ovadm")

TRUNK_KEYS = ("W1", "b1", "W2", "b2")
HEAD_KEYS = {"ce": ("W_out", "b_out"), "ovadm": ("centroids",)}


@dataclass
class MlpParams:
    """Weights are stored input-major: ``h1 = relu(x @ W1 + b1)``.

    The CE output layer is ``K x 8`` and applied as ``h @ W_out.T + b_out``;
    the OVADM head is ``K`` centroid rows in feature space.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    head_kind: HeadKind
    head: dict[str, np.ndarray]

    @property
    def d_in(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.head["W_out" if self.head_kind == "ce" else "centroids"].shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}
        out.update(self.head)
        return out

    @classmethod
    def from_arrays(cls, arrays, head_kind: HeadKind) -> "MlpParams":
        head = {k: arrays[k] for k in HEAD_KEYS[head_kind]}
        return cls(arrays["W1"], arrays["b1"], arrays["W2"], arrays["b2"], head_kind, head)


def init_mlp(d_in: int, n_classes: int, head_kind: HeadKind, rng: Rng) -> MlpParams:
    if d_in < 1 or n_classes < 2:
        raise ValueError("need d_in >= 1 and at least two classes")
    if head_kind not in HEAD_KINDS:
        raise ValueError(f"unknown head kind {head_kind!r}")

    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(int(np.prod(shape)), -bound, bound).reshape(shape)

    W1 = uniform(d_in, (d_in, HIDDEN))
    W2 = uniform(HIDDEN, (HIDDEN, HIDDEN))
    if head_kind == "ce":
        head = {"W_out": uniform(HIDDEN, (n_classes, HIDDEN)), "b_out": np.zeros(n_classes)}
    else:
        head = {"centroids": gaussian(rng, n_classes * HIDDEN).reshape(n_classes, HIDDEN)}
    return MlpParams(W1, np.zeros(HIDDEN), W2, np.zeros(HIDDEN), head_kind, head)


def trunk(p, x):
    """Penultimate features. ``p`` is any mapping with the trunk keys (arrays or Vars)."""
    h1 = ad.relu(ad.add(ad.matmul(x, p["W1"]), p["b1"]))
    return ad.relu(ad.add(ad.matmul(h1, p["W2"]), p["b2"]))


def head_logits(p, h, head_kind: HeadKind):
    if head_kind == "ce":
        return ad.add(ad.matmul(h, ad.transpose(p["W_out"])), p["b_out"])
    c = p["centroids"]
    n, d = np.shape(ad._val(h))
    k = np.shape(ad._val(c))[0]
    diff = ad.sub(ad.reshape(h, (n, 1, d)), ad.reshape(c, (1, k, d)))
    return ad.neg(ad.l2norm(diff, axis=-1))


def forward(params, x, head_kind: HeadKind | None = None):
    """Return ``(features, logits)`` for a batch.

    ``params`` is an :class:`MlpParams` or a mapping of (possibly traced)
    arrays, in which case ``head_kind`` is required.
    """
    if isinstance(params, MlpParams):
        head_kind = params.head_kind
        params = params.arrays()
    if head_kind is None:
        raise ValueError("head_kind is required when params is a plain mapping")
    xv = ad._val(x)
    d_in = np.shape(ad._val(params["W1"]))[0]
    if np.ndim(xv) != 2 or np.shape(xv)[1] != d_in:
        raise ValueError(f"expected input of shape (N, {d_in}), got {np.shape(xv)}")
    h = trunk(params, x)
    return h, head_logits(params, h, head_kind)


def _check_labels(logits, y):
    y = np.asarray(y, dtype=np.int64)
    n, k = np.shape(ad._val(logits))
    if n == 0:
        raise ValueError("empty batch")
    if y.shape != (n,) or y.min() < 0 or y.max() >= k:
        raise ValueError("labels do not match logits")
    return y


def ce_loss(logits, y):
    """Mean softmax cross-entropy (log-sum-exp with max subtraction)."""
    y = _check_labels(logits, y)
    return ad.mean(ad.sub(ad.logsumexp(logits, axis=1), ad.take_rows(logits, y)))


def ovadm_loss(logits, y):
    """Mean one-vs-all binary cross-entropy on distance logits.

    Per sample ``-log s(l_y) - sum_{k != y} log(1 - s(l_k))`` with ``s`` the
    logistic function. Since ``-log s(l) = softplus(-l)`` and
    ``-log(1 - s(l)) = softplus(l)`` this equals ``sum_k softplus(l_k) - l_y``.
    """
    y = _check_labels(logits, y)
    per_sample = ad.sub(ad.sum(ad.softplus(logits), axis=1), ad.take_rows(logits, y))
    return ad.mean(per_sample)


LOSSES = {"ce": ce_loss, "ovadm": ovadm_loss}


def predict(logits) -> np.ndarray:
    """Argmax per row; ties go to the lowest class index."""
    return np.argmax(np.asarray(ad._val(logits)), axis=1)


# checkpoints

MAGIC = "oodgauge-ckpt v1"
_HEADER_RE = re.compile(r"^oodgauge-ckpt v1 d_in=(\d+) K=(\d+) head=(ce|ovadm)$")


class CheckpointError(ValueError):
    def __init__(self, field: str, msg: str):
        super().__init__(f"checkpoint field {field!r}: {msg}")
        self.field = field


def _expected_shapes(d_in, k, head_kind):
    shapes = {"W1": (d_in, HIDDEN), "b1": (HIDDEN,), "W2": (HIDDEN, HIDDEN), "b2": (HIDDEN,)}
    if head_kind == "ce":
        shapes.update(W_out=(k, HIDDEN), b_out=(k,))
    else:
        shapes.update(centroids=(k, HIDDEN))
    return shapes


def save_checkpoint(params: MlpParams, path) -> None:
    lines = [f"{MAGIC} d_in={params.d_in} K={params.n_classes} head={params.head_kind}"]
    for name, arr in params.arrays().items():
        arr2 = np.atleast_2d(arr)
        lines.append(f"{name} {' '.join(str(s) for s in arr.shape)}")
        for row in arr2:
            lines.append(" ".join(format(float(v), ".17g") for v in row))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> MlpParams:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(MAGIC):
        raise CheckpointError("magic", f"expected header starting with {MAGIC!r}")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise CheckpointError("header", f"malformed header line {lines[0]!r}")
    d_in, k, head_kind = int(m.group(1)), int(m.group(2)), m.group(3)
    pos = 1
    arrays = {}
    for name, shape in _expected_shapes(d_in, k, head_kind).items():
        if pos >= len(lines):
            raise CheckpointError(name, "missing (file truncated)")
        parts = lines[pos].split()
        if not parts or parts[0] != name:
            raise CheckpointError(name, f"expected dimension line for {name}, got {lines[pos]!r}")
        try:
            dims = tuple(int(s) for s in parts[1:])
        except ValueError:
            raise CheckpointError(name, f"bad dimension line {lines[pos]!r}") from None
        if dims != shape:
            raise CheckpointError(name, f"shape {dims} does not match header (expected {shape})")
        pos += 1
        n_rows = shape[0] if len(shape) == 2 else 1
        n_cols = shape[-1]
        rows = lines[pos:pos + n_rows]
        if len(rows) < n_rows:
            raise CheckpointError(name, "missing rows (file truncated)")
        try:
            data = [[float(v) for v in row.split()] for row in rows]
        except ValueError:
            raise CheckpointError(name, "non-numeric value") from None
        if any(len(r) != n_cols for r in data):
            raise CheckpointError(name, f"row length differs from {n_cols}")
        arr = np.array(data, dtype=np.float64).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(name, "non-finite value")
        arrays[name] = arr
        pos += n_rows
    # the trailer makes a cut inside the final number detectable
    if lines[pos:] != ["end"]:
        raise CheckpointError("end", "missing end marker (file truncated or has trailing content)")
    return MlpParams.from_arrays(arrays, head_kind)
