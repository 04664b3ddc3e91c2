"""diarlite application package."""
