"""Tests for adaptkernel."""
