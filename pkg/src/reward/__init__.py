"""Per-step reward for the frequency agent."""
