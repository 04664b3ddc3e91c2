"""CLI commands, one per workflow."""
