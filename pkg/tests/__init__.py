"""Tests for the logsp toolkit."""
