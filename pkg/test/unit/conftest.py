"""Unit test configuration."""
