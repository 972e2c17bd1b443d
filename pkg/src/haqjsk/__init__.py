"""Hierarchical aligned quantum Jensen-Shannon graph kernels."""

__version__ = "0.1.0"

from .graph import Graph, GraphDataset
from .kernels import KernelConfig, KernelMatrix, kernel_matrix, psd_diagnostics
from .svm import cross_validate

__all__ = [
    "Graph",
    "GraphDataset",
    "KernelConfig",
    "KernelMatrix",
    "kernel_matrix",
    "psd_diagnostics",
    "cross_validate",
]
