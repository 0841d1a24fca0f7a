"""Noise-robust online multi-label learning with label-drift adaptation."""
