"""Test suite for the cbc-lab package."""
