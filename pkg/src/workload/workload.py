"""
Per-frame workloads: the number of region proposals each frame produces.

Proposal counts come either from a log-normal dataset profile or from a
CSV trace file with the header "frame_id,proposals".
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

TRACE_HEADER = ["frame_id", "proposals"]


class TraceFormatError(ValueError):
    """A trace file row could not be parsed."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class FrameWorkload:
    frame_id: int
    proposals: int

    def __post_init__(self):
        if self.proposals < 0:
            raise ValueError("proposals must be non-negative")


@dataclass(frozen=True)
class DatasetProfile:
    name: str
    log_mean: float
    log_sigma: float
    p_cap: int = 1000

    def __post_init__(self):
        if not self.log_sigma > 0:
            raise ValueError("log_sigma must be positive")
        if self.p_cap < 1:
            raise ValueError("p_cap must be at least 1")


# Modeling choices: drone imagery carries more small objects, hence more proposals.
PROFILES = {
    "kitti-like": DatasetProfile("kitti-like", math.log(150), 0.5, 1000),
    "visdrone-like": DatasetProfile("visdrone-like", math.log(400), 0.6, 1000),
}


def get_profile(name):
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"Unknown workload profile: {name}") from None


def sample_workload(profile, rng, frame_id=0):
    p = int(round(rng.lognormal(profile.log_mean, profile.log_sigma)))
    return FrameWorkload(frame_id, min(p, profile.p_cap))


def sample_proposals(profile, rng, count):
    """Vectorized draw of `count` proposal counts."""
    p = np.rint(rng.lognormal(profile.log_mean, profile.log_sigma, size=count))
    return np.minimum(p, profile.p_cap).astype(np.int64)


def generate_trace(profile, frames, rng, start_id=0):
    return [
        FrameWorkload(start_id + i, int(p))
        for i, p in enumerate(sample_proposals(profile, rng, frames))
    ]


def concat_traces(*traces):
    """Join traces end to end, renumbering frame ids from zero."""
    out = []
    for trace in traces:
        for w in trace:
            out.append(FrameWorkload(len(out), w.proposals))
    return out


def load_trace(path):
    workloads = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return workloads
        if [h.strip() for h in header] != TRACE_HEADER:
            raise TraceFormatError(1, f"expected header {','.join(TRACE_HEADER)}")

        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise TraceFormatError(line, f"expected 2 fields, got {len(row)}")
            try:
                frame_id, proposals = int(row[0]), int(row[1])
            except ValueError:
                raise TraceFormatError(line, f"non-integer field in {row!r}") from None
            if proposals < 0:
                raise TraceFormatError(line, "negative proposal count")
            workloads.append(FrameWorkload(frame_id, proposals))
    return workloads


def save_trace(path, workloads):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for w in workloads:
            writer.writerow([w.frame_id, w.proposals])


class WorkloadSource:
    """
    Endless per-frame workload supply.

    Draws from a dataset profile, or replays a fixed trace cyclically.
    The profile may be switched mid-run for domain-change scenarios.
    """

    def __init__(self, profile=None, rng=None, trace=None):
        if profile is None and not trace:
            raise ValueError("WorkloadSource needs a profile or a non-empty trace")
        self.profile = profile
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.trace = list(trace) if trace else None
        self._frame = 0

    def switch(self, profile):
        self.profile = profile
        self.trace = None

    def next(self):
        if self.trace is not None:
            w = self.trace[self._frame % len(self.trace)]
            w = FrameWorkload(self._frame, w.proposals)
        else:
            w = sample_workload(self.profile, self.rng, self._frame)
        self._frame += 1
        return w
