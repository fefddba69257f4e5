"""Perceptual surrogate explainers for image classifiers."""
