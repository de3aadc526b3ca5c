"""Score landscapes over the input plane, written as 8-bit PGM images."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..model import MlpParams
from ..scoring import SCORERS, MahalanobisStats, OdinParams, score


@dataclass(frozen=True)
class LandscapeSpec:
    extent: float = 6.5
    resolution: int = 200
    scorer: str = "md"

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if not self.extent > 0:
            raise ValueError("extent must be > 0")
        if self.scorer not in SCORERS:
            raise ValueError(f"unknown scorer {self.scorer!r}")


def landscape_grid(params: MlpParams, spec: LandscapeSpec, stats: MahalanobisStats | None = None,
                   odin: OdinParams = OdinParams()) -> np.ndarray:
    """Raw scores on a ``resolution x resolution`` grid; row 0 is the top (largest y)."""
    if params.d_in != 2:
        raise ValueError("landscapes need a 2-D input model")
    axis = np.linspace(-spec.extent, spec.extent, spec.resolution)
    xx, yy = np.meshgrid(axis, axis[::-1])
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return score(spec.scorer, params, pts, stats, odin).reshape(spec.resolution, spec.resolution)


def to_gray(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Min/max-normalise to 0..255; low scores (more OOD) are dark. A flat input maps to 255."""
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(values.shape, 255, dtype=np.uint8), lo, hi
    scaled = (values - lo) / (hi - lo)
    return np.round(scaled * 255.0).astype(np.uint8), lo, hi


def write_pgm(path, image: np.ndarray) -> None:
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def render_landscape(params: MlpParams, spec: LandscapeSpec, path, stats=None,
                     odin: OdinParams = OdinParams()) -> np.ndarray:
    """Write ``path`` (PGM) and ``path + '.txt'`` with the normalisation range; return raw scores."""
    path = Path(path)
    values = landscape_grid(params, spec, stats, odin)
    image, lo, hi = to_gray(values)
    write_pgm(path, image)
    Path(str(path) + ".txt").write_text(
        f"scorer = {spec.scorer}\nextent = {spec.extent!r}\nresolution = {spec.resolution}\n"
        f"min = {lo!r}\nmax = {hi!r}\n"
    )
    return values
