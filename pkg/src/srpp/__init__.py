"""Sliced Renyi Pufferfish privacy toolkit.

Estimates sliced Wasserstein sensitivities from empirical conditional
samples, calibrates Gaussian noise for average/joint sliced Renyi
guarantees (exact and finite-sample), runs cap-based accountants for
clipped noisy SGD, and audits the resulting mechanisms with inference
attacks.
"""

from srpp.errors import CapacityError, DataError, InfeasibleError

__all__ = ["CapacityError", "DataError", "InfeasibleError"]

__version__ = "0.1.0"
