from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def auroc(id_scores, ood_scores) -> float:
    """P(ID score > OOD score) with ties counted 1/2, via the Mann-Whitney rank sum.

    Higher scores mean "more in-distribution".
    """
    id_scores = np.asarray(id_scores, dtype=np.float64).ravel()
    ood_scores = np.asarray(ood_scores, dtype=np.float64).ravel()
    n_id, n_ood = id_scores.size, ood_scores.size
    if n_id == 0 or n_ood == 0:
        raise ValueError("both score sets must be non-empty")
    if not (np.all(np.isfinite(id_scores)) and np.all(np.isfinite(ood_scores))):
        raise ValueError("scores must be finite")
    ranks = rankdata(np.concatenate([id_scores, ood_scores]), method="average")
    # average ranks are half-integers, so U is exact in float64
    u = ranks[:n_id].sum() - n_id * (n_id + 1) / 2.0
    return float(u / (n_id * n_ood))


def accuracy(predictions, truth) -> float:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {truth.shape}")
    if truth.size == 0:
        raise ValueError("empty label vectors")
    return float(np.mean(predictions == truth))
