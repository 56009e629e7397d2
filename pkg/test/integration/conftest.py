"""Integration test configuration."""
