"""Agent-side server."""
