"""Core abstractions, models, errors and configuration for cbc-lab."""
