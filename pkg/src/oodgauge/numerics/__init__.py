"""Autodiff tape, Adam, and the seeded random streams."""

from . import autodiff as ad
from .adam import AdamConfig, AdamState, adam_step
from .autodiff import (
    NonScalarOutput,
    Tape,
    UnsupportedPrimitive,
    Var,
    finite_diff,
    grad,
    value_and_grad,
)
from .rng import Rng, gaussian

__all__ = [
    "ad",
    "AdamConfig",
    "AdamState",
    "adam_step",
    "NonScalarOutput",
    "Tape",
    "UnsupportedPrimitive",
    "Var",
    "finite_diff",
    "grad",
    "value_and_grad",
    "Rng",
    "gaussian",
]
