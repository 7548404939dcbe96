"""Agent/device wire protocol."""
