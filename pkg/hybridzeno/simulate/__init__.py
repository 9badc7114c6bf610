"""Simulate commands implementation."""
