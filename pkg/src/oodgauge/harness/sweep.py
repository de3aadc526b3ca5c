"""Distance and mixing-ratio sweeps producing one record per (scorer, axis value)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..datagen import r_grid, ratio_grid
from ..metrics import accuracy, auroc
from ..model import forward, predict
from ..scoring import OdinParams, score
from .config import ExperimentConfig
from .data import ExperimentData, build_data
from .evaluate import fit_md_stats
from .train import evaluate_accuracy, train_run


@dataclass
class SweepRecord:
    loss: str
    ssl: str
    scorer: str
    axis: str  # "r" or "mix"
    axis_value: float
    auroc: float
    # ID test accuracy for "r"; accuracy of mixed samples against their ID labels for "mix"
    id_accuracy: float
    seed: int
    wall_time_s: float = field(default=0.0, compare=False)

    def key(self):
        return (self.loss, self.ssl, self.scorer, self.axis, self.axis_value, self.seed)


def _odin(config: ExperimentConfig) -> OdinParams:
    return OdinParams(config.odin_temperature, config.odin_epsilon)


def _prepare(config, data, model):
    if data is None:
        data = build_data(config)
    if model is None:
        model, _ = train_run(config, data)
    stats = fit_md_stats(model, data.train, config.md_lambda_reg) if "md" in config.scorers else None
    return data, model, stats


def sweep_r(config: ExperimentConfig, grid=None, data: ExperimentData | None = None,
            model=None) -> list[SweepRecord]:
    """Train once, then score the shared ID test set against an OOD ring at every ``r``."""
    if config.dataset != "circle":
        raise ValueError("sweep_r needs the circle dataset")
    grid = r_grid() if grid is None else np.asarray(grid, dtype=float)
    data, model, stats = _prepare(config, data, model)
    odin = _odin(config)
    id_acc = evaluate_accuracy(model, data.test)
    id_scores = {s: score(s, model, data.test.features, stats, odin) for s in config.scorers}
    records = []
    for r in grid:
        ood = data.ood_ring(float(r))
        for s in config.scorers:
            t0 = time.perf_counter()
            a = auroc(id_scores[s], score(s, model, ood, stats, odin))
            records.append(SweepRecord(config.loss_kind, config.ssl_kind, s, "r", float(r), a,
                                       id_acc, config.seed, time.perf_counter() - t0))
    return records


def sweep_mix(config: ExperimentConfig, grid=None, data: ExperimentData | None = None,
              model=None) -> list[SweepRecord]:
    """Score the ID test set against mixup(ID pool, OOD pool, ratio) for every ratio."""
    if config.dataset != "blobs":
        raise ValueError("sweep_mix needs the blobs dataset")
    grid = ratio_grid() if grid is None else np.asarray(grid, dtype=float)
    data, model, stats = _prepare(config, data, model)
    odin = _odin(config)
    id_scores = {s: score(s, model, data.test.features, stats, odin) for s in config.scorers}
    records = []
    for lam in grid:
        mixed = data.mixed(float(lam))
        _, logits = forward(model, mixed)
        mix_acc = accuracy(predict(logits), data.mix_source.labels)
        for s in config.scorers:
            t0 = time.perf_counter()
            a = auroc(id_scores[s], score(s, model, mixed, stats, odin))
            records.append(SweepRecord(config.loss_kind, config.ssl_kind, s, "mix", float(lam), a,
                                       mix_acc, config.seed, time.perf_counter() - t0))
    return records


METHODS = tuple((loss, ssl) for loss in ("ce", "ovadm") for ssl in ("none", "simclr", "byol"))


def run_grid(base: ExperimentConfig, methods=METHODS, seeds=(0,), axis: str = "r",
             grid=None) -> list[SweepRecord]:
    """Every (method, seed) cell; cells with one seed share one pre-built data object."""
    sweep = sweep_r if axis == "r" else sweep_mix
    records = []
    for seed in seeds:
        data = build_data(base.replace(seed=seed))
        for loss, ssl in methods:
            cfg = base.replace(seed=seed, loss_kind=loss, ssl_kind=ssl)
            records.extend(sweep(cfg, grid, data=data))
    return records
