"""Experiment executor implementations."""
