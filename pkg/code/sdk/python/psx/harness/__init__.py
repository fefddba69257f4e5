"""Experiment harness: distortion robustness benchmark and CLI."""
