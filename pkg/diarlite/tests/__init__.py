"""diarlite tests package."""
