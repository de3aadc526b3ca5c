from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..metrics import accuracy
from ..model import LOSSES, MlpParams, forward, init_mlp, predict
from ..numerics import ad
from ..numerics.adam import AdamState, adam_step
from ..numerics.rng import Rng
from ..ssl import AugSpec, ByolState, augment, byol_loss, ema_update, init_ssl_heads, \
    multitask_loss, ntxent, project
from .config import STREAM_AUG, STREAM_INIT, STREAM_SHUFFLE, ExperimentConfig
from .data import ExperimentData, build_data

log = logging.getLogger(__name__)


class NumericError(RuntimeError):
    pass


@dataclass
class History:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_cls_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    step_cls_loss: list[float] = field(default_factory=list)

    def rows(self):
        for i, (a, b, c) in enumerate(zip(self.epoch_loss, self.epoch_cls_loss, self.val_accuracy)):
            yield {"epoch": i + 1, "train_loss": a, "train_cls_loss": b, "val_accuracy": c}


def evaluate_accuracy(params: MlpParams, ds) -> float:
    _, logits = forward(params, ds.features)
    return accuracy(predict(logits), ds.labels)


def train_run(config: ExperimentConfig, data: ExperimentData | None = None
              ) -> tuple[MlpParams, History]:
    """Mini-batch Adam on ``L_cls + alpha * L_ss``; deterministic given the config."""
    if data is None:
        data = build_data(config)
    train = data.train
    head = config.loss_kind
    ssl_kind = config.ssl_kind

    init_rng = Rng(config.seed, STREAM_INIT)
    model = init_mlp(train.dims, train.n_classes, head, init_rng)
    params = model.arrays()
    params.update(init_ssl_heads(ssl_kind, init_rng))
    names = list(params)
    values = [params[k] for k in names]

    shuffle_rng = Rng(config.seed, STREAM_SHUFFLE)
    aug_rng = Rng(config.seed, STREAM_AUG)
    aug = AugSpec(config.aug_noise_std)
    byol = ByolState.from_online(params, config.byol_tau_ema) if ssl_kind == "byol" else None
    cls_loss_fn = LOSSES[head]
    adam = AdamState.zeros_like(values)
    history = History()

    n = len(train)
    step = 0
    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        tot_sum = cls_sum = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb, yb = train.features[idx], train.labels[idx]
            views = augment(xb, aug, aug_rng) if ssl_kind != "none" else None
            cls_val = []

            def objective(*vs):
                p = dict(zip(names, vs))
                _, logits = forward(p, xb, head)
                l_cls = cls_loss_fn(logits, yb)
                cls_val.append(float(ad._val(l_cls)))
                if ssl_kind == "none":
                    return l_cls
                if ssl_kind == "simclr":
                    l_ss = ntxent(project(p, views[0]), project(p, views[1]), config.ntxent_tau)
                else:
                    l_ss = byol_loss(p, byol.target, views[0], views[1])
                return multitask_loss(l_cls, l_ss, config.alpha)

            loss, grads = ad.value_and_grad(objective, *values)
            step += 1
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericError(f"non-finite loss or gradient at step {step} "
                                   f"(epoch {epoch + 1}, batch {n_batches + 1})")
            values, adam = adam_step(values, grads, adam, lr=config.lr)
            if byol is not None:
                byol = ema_update(ByolState(dict(zip(names, values)), byol.target, byol.tau_ema))
            tot_sum += loss
            cls_sum += cls_val[0]
            history.step_cls_loss.append(cls_val[0])
            n_batches += 1

        model = MlpParams.from_arrays(dict(zip(names, values)), head)
        history.epoch_loss.append(tot_sum / n_batches)
        history.epoch_cls_loss.append(cls_sum / n_batches)
        history.val_accuracy.append(evaluate_accuracy(model, data.val))
        log.debug("epoch %d loss %.4f val acc %.4f", epoch + 1, history.epoch_loss[-1],
                  history.val_accuracy[-1])
    return model, history
