"""Init command implementation."""
