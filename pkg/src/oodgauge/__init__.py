"""oodgauge: OOD-detection benchmarks with an explicit ID/OOD distance knob."""

__version__ = "0.1.0"
