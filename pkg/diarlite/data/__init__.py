"""Experiment ledger: training runs, losses and scores."""
