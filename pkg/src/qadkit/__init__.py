"""Quantum anomaly detection by kernel PCA and one-class SVM, simulated densely."""

from . import (errors, hamsim, kpca, ocsvm, qcore, reference, registry, stateprep,
               swaptest, validation)

__version__ = "0.1.0"

__all__ = ["errors", "hamsim", "kpca", "ocsvm", "qcore", "reference", "registry",
           "stateprep", "swaptest", "validation", "__version__"]
