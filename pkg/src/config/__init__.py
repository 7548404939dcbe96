"""Configuration settings and defaults."""
