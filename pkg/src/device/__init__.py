"""Edge device simulator: thermals, latency, throttling."""
