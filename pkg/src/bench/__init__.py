"""Benchmark harness and command-line entry point."""
