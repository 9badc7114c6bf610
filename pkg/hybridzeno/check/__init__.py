"""Check commands implementation."""
