"""Tests for bosechain."""
