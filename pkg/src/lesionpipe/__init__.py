"""Continuous-training pipeline for binary skin-lesion image classification."""

__version__ = "0.1.0"
