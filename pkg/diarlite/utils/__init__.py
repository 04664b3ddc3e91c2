"""diarlite utils package."""
