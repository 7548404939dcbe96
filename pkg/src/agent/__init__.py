"""Deep-Q frequency agent and training loop."""
