"""Diarization pipeline."""
