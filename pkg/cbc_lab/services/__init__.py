"""Configuration parsing, artifact writing, parallel runners and orchestration."""
