"""Prometheus metrics for frames served by a device or an agent."""

import logging

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, start_http_server

logger = logging.getLogger("METRICS")

LATENCY_BUCKETS_MS = (100, 200, 300, 350, 400, 450, 500, 650, 800, 1000, 1500, 2500)


class FrameMetrics:
    def __init__(self, budget_ms, registry=None):
        self.budget_ms = budget_ms
        self.registry = registry or CollectorRegistry()
        self.frames = Counter(
            "dvfs_frames", "Completed inference frames", registry=self.registry
        )
        self.misses = Counter(
            "dvfs_deadline_misses", "Frames at or over the latency budget",
            registry=self.registry,
        )
        self.throttles = Counter(
            "dvfs_throttle_events", "Hardware throttle engagements", registry=self.registry
        )
        self.latency = Histogram(
            "dvfs_frame_latency_ms", "End-to-end frame latency (ms)",
            buckets=LATENCY_BUCKETS_MS, registry=self.registry,
        )
        self.cpu_temp = Gauge("dvfs_cpu_temp_c", "CPU temperature", registry=self.registry)
        self.gpu_temp = Gauge("dvfs_gpu_temp_c", "GPU temperature", registry=self.registry)
        self.cpu_level = Gauge("dvfs_cpu_level", "Requested CPU level", registry=self.registry)
        self.gpu_level = Gauge("dvfs_gpu_level", "Requested GPU level", registry=self.registry)

    def observe_frame(self, result, action=None, throttle_events=0):
        self.frames.inc()
        if not result.total_ms < self.budget_ms:
            self.misses.inc()
        if throttle_events:
            self.throttles.inc(throttle_events)
        self.latency.observe(result.total_ms)
        self.cpu_temp.set(result.cpu_temp)
        self.gpu_temp.set(result.gpu_temp)
        if action is not None:
            self.cpu_level.set(action.cpu_level)
            self.gpu_level.set(action.gpu_level)

    def serve(self, port):
        start_http_server(port, registry=self.registry)
        logger.info("Exporting metrics on port %d", port)
