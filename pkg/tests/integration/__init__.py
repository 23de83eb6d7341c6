"""Integration tests for odskit."""
