"""Speaker-attributed encoder-decoder model."""
