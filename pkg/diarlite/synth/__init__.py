"""Synthetic overlapping-speech corpus."""
