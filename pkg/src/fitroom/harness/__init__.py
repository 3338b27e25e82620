"""Experiment orchestration: configs, replication batches, calibration, reports, CLI."""
