from __future__ import annotations

import numpy as np

from ..datagen import LabeledDataset
from ..metrics import auroc
from ..model import MlpParams, forward
from ..scoring import MahalanobisStats, OdinParams, fit_mahalanobis, score
from .train import evaluate_accuracy


class LeakageError(ValueError):
    """Raised when non-training data is offered to a fitting routine."""


def fit_md_stats(params: MlpParams, train: LabeledDataset, lambda_reg: float = 1e-6
                 ) -> MahalanobisStats:
    if train.role != "train":
        raise LeakageError(f"Mahalanobis stats must be fitted on training data, got role={train.role!r}")
    h, _ = forward(params, train.features)
    return fit_mahalanobis(h, train.labels, lambda_reg, n_classes=train.n_classes)


def evaluate_ood(params: MlpParams, scorer: str, id_test: LabeledDataset, ood_set,
                 stats: MahalanobisStats | None = None, odin: OdinParams = OdinParams()
                 ) -> tuple[float, float]:
    """Return ``(AUROC of ID vs OOD scores, ID classification accuracy)``."""
    if scorer == "md" and stats is None:
        raise ValueError("md scorer requires Mahalanobis stats fitted on the training split")
    id_scores = score(scorer, params, id_test.features, stats, odin)
    ood_scores = score(scorer, params, np.asarray(ood_set), stats, odin)
    return auroc(id_scores, ood_scores), evaluate_accuracy(params, id_test)
