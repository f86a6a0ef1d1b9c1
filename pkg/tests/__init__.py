"""Tests for the FASTR readout toolkit."""
