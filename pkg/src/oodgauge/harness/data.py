"""Build the datasets a config asks for, from its seed's data stream."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datagen import (
    BlobSpec,
    CircleSpec,
    LabeledDataset,
    RingOodSpec,
    _simplex_means,
    make_blobs,
    make_circle_id,
    make_ood_ring,
    mixup,
)
from ..numerics.rng import Rng
from .config import STREAM_DATA, ExperimentConfig


@dataclass
class ExperimentData:
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset
    config: ExperimentConfig
    _rng: Rng = field(repr=False, default=None)
    # blob track only
    mix_source: LabeledDataset | None = None
    ood_pool: np.ndarray | None = None

    @property
    def base_radius(self) -> float:
        return self.config.class_radius_outer

    def ood_ring(self, r_factor: float) -> np.ndarray:
        """OOD ring at distance factor ``r_factor``.

        Every ring reuses one forked stream, so rings at different ``r``
        share their angle and noise draws and differ only in mean radius.
        """
        sizes = self.config.sizes()
        spec = RingOodSpec(r_factor, self.base_radius, sizes["n_ood"], self.config.radial_noise_std)
        return make_ood_ring(spec, self._rng.fork(0))

    def mixed(self, ratio: float) -> np.ndarray:
        """Blob track: ID sample ``i`` mixed with (pre-shuffled) OOD sample ``i``."""
        if self.mix_source is None:
            raise ValueError("mixing is only defined for the blob track")
        return mixup(self.mix_source.features, self.ood_pool, ratio)


def circle_spec(config: ExperimentConfig, n_per_class: int) -> CircleSpec:
    return CircleSpec((config.class_radius_inner, config.class_radius_outer),
                      config.radial_noise_std, n_per_class, config.seed)


def blob_spec(config: ExperimentConfig, n_per_class: int, n_ood: int) -> BlobSpec:
    means = _simplex_means(config.blob_dims, config.blob_distance)
    return BlobSpec(config.blob_dims, means[:2], means[2], config.blob_std, n_per_class, n_ood,
                    config.seed)


def build_data(config: ExperimentConfig) -> ExperimentData:
    """Generate every split for ``config``. Depends only on the seed and data keys."""
    rng = Rng(config.seed, STREAM_DATA)
    sizes = config.sizes()
    if config.dataset == "circle":
        train = make_circle_id(circle_spec(config, sizes["n_train"] // 2), rng, role="train")
        val = make_circle_id(circle_spec(config, sizes["n_val"] // 2), rng, role="val")
        test = make_circle_id(circle_spec(config, sizes["n_test"] // 2), rng, role="test")
        return ExperimentData(train, val, test, config, _rng=rng.copy())

    train, _ = make_blobs(blob_spec(config, sizes["n_train"] // 2, 0), rng, role="train")
    val, _ = make_blobs(blob_spec(config, sizes["n_val"] // 2, 0), rng, role="val")
    test, _ = make_blobs(blob_spec(config, sizes["n_test"] // 2, 0), rng, role="test")
    n_mix = sizes["n_ood"] // 2 * 2
    mix_source, ood = make_blobs(blob_spec(config, n_mix // 2, n_mix), rng, role="eval")
    # independent shuffles so the pairing ignores generation order
    mix_source = mix_source.subset(rng.permutation(n_mix))
    ood = ood[rng.permutation(n_mix)]
    return ExperimentData(train, val, test, config, _rng=rng.copy(), mix_source=mix_source,
                          ood_pool=ood)
