"""Static configuration constants for cbc-lab."""
