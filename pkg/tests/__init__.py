"""Tests for the DVFS governor bench."""
