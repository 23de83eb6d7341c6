"""Persistence: versioned JSON documents and CSV tables."""
