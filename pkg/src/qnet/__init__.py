"""Slimmable Q-network and optimizer."""
