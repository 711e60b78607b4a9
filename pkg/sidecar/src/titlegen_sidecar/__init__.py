"""Inference sidecar: serves candidate-title generation over HTTP and runs
offline fine-tuning on augmented datasets."""

__version__ = "0.1.0"
