"""Unit tests for the FASTR readout toolkit."""
