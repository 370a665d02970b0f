"""Compiler from binarized 1D-CNNs to precomputed LUT netlists, with split-configuration search."""

__version__ = "0.1.0"
