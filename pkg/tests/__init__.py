"""Tests for step-spectra."""
