"""Per-frame proposal workloads."""
