"""diarlite services package."""
