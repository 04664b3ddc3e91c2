"""Matplotlib figures for training curves and diarization timelines."""
