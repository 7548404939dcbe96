"""Device-side client."""
