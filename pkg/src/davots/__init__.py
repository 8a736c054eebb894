"""Dense-pixel visual analytics for time-series classifiers.

Ingests UCR-style datasets, trains a small 1D CNN, computes per-time-point
attributions, orders samples by hierarchical clustering, and serves the
resulting pixel-matrix slices over HTTP for interactive exploration.
"""

__version__ = "0.1.0"
