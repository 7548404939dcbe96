"""
Run-level metrics and the latency objective.

objective = sum_i  l_i + alpha * (l_i - mean)^2 + beta * U(l_i - L),
with U(x) = 1 iff x > 0. A frame satisfies the budget iff l_i < L.
"""

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class Metrics:
    frames: int
    mean_latency_ms: float
    latency_std_ms: float
    satisfaction_rate: float
    mean_cpu_temp: float
    mean_gpu_temp: float
    max_cpu_temp: float
    max_gpu_temp: float
    mean_temp_c: float
    throttle_event_count: int
    overheat_frames: int
    objective_value: float
    # raw objective components, reported so the weights never hide results
    latency_sum_ms: float
    variance_term: float
    violation_count: int

    def to_dict(self):
        return asdict(self)


def objective_terms(latencies, budget_ms):
    """
    (sum of latencies, sum of squared deviations, frames over budget).

    `budget_ms` is a scalar or one budget per frame.
    """
    lat = np.asarray(latencies, dtype=np.float64)
    budget = np.broadcast_to(np.asarray(budget_ms, dtype=np.float64), lat.shape)
    return (
        float(lat.sum()),
        float(np.sum((lat - lat.mean()) ** 2)),
        int(np.count_nonzero(lat > budget)),
    )


def objective(latencies, budget_ms, weights):
    total, sq_dev, violations = objective_terms(latencies, budget_ms)
    return total + weights.alpha * sq_dev + weights.beta * violations


def compute_metrics(traces, budget_ms, weights, throttle_c=None):
    """
    Summarize a run.

    `traces` are frame traces (or frame results); peak temperatures and
    throttle events are used when present. A frame counts as overheated
    when its peak exceeds throttle_c + 1.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("compute_metrics needs at least one frame")

    lat = np.array([t.total_ms for t in traces], dtype=np.float64)
    cpu = np.array([t.cpu_temp for t in traces], dtype=np.float64)
    gpu = np.array([t.gpu_temp for t in traces], dtype=np.float64)
    peak_cpu = np.array([getattr(t, "peak_cpu_temp", t.cpu_temp) for t in traces])
    peak_gpu = np.array([getattr(t, "peak_gpu_temp", t.gpu_temp) for t in traces])

    total, sq_dev, violations = objective_terms(lat, budget_ms)
    budget = np.broadcast_to(np.asarray(budget_ms, dtype=np.float64), lat.shape)
    overheat = 0
    if throttle_c is not None:
        overheat = int(np.count_nonzero(np.maximum(peak_cpu, peak_gpu) > throttle_c + 1.0))

    return Metrics(
        frames=len(traces),
        mean_latency_ms=float(lat.mean()),
        latency_std_ms=float(lat.std()),
        satisfaction_rate=float(np.count_nonzero(lat < budget)) / len(traces),
        mean_cpu_temp=float(cpu.mean()),
        mean_gpu_temp=float(gpu.mean()),
        max_cpu_temp=float(peak_cpu.max()),
        max_gpu_temp=float(peak_gpu.max()),
        mean_temp_c=float((cpu.mean() + gpu.mean()) / 2.0),
        throttle_event_count=int(sum(getattr(t, "throttle_events", 0) for t in traces)),
        overheat_frames=overheat,
        objective_value=total + weights.alpha * sq_dev + weights.beta * violations,
        latency_sum_ms=total,
        variance_term=sq_dev,
        violation_count=violations,
    )
