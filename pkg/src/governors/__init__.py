"""Baseline and learned frequency governors."""
