"""diarlite - speaker diarization by transcription with token timestamps."""

__version__ = "0.1.0"
