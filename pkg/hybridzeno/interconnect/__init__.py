"""Interconnect command implementation."""
