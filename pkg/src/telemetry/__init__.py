"""Prometheus exporter and optional PostgreSQL sink."""
