"""
Latency model calibration.

Solves the six work constants of the cycle model from three targets
measured at the top frequency levels: the mean frame latency, the share
of it spent in stage 1, and the stage-2 latency spread across the
proposal-count range of a workload profile.
"""

import logging
from dataclasses import replace

import numpy as np

from device.profiles import load_profile
from device.simulator import LatencyModelParams, frame_latency
from workload.workload import FrameWorkload, get_profile, sample_proposals

logger = logging.getLogger("BENCH")

MEAN_TOLERANCE = 0.01
SHARE_TOLERANCE = 0.02
SPREAD_TOLERANCE = 0.05


class CalibrationError(ValueError):
    """Targets that no non-negative set of work constants can meet."""


def proposal_sample(targets):
    rng = np.random.default_rng(targets.seed)
    return sample_proposals(get_profile(targets.workload), rng, targets.samples)


def _split(ms, gpu_share, cpu_ghz, gpu_ghz):
    """Milliseconds at top frequencies -> (cpu, gpu) work in GHz*ms."""
    return ms * (1.0 - gpu_share) * cpu_ghz, ms * gpu_share * gpu_ghz


def calibrate(table, targets, proposals=None):
    """
    Return LatencyModelParams meeting `targets` on `table`.

    The stage-2 slope comes from the spread over the configured
    quantiles of the proposal sample, the base from the sample mean.
    A stage-1 share of 1 leaves stage 2 empty.
    """
    proposals = proposal_sample(targets) if proposals is None else np.asarray(proposals)
    if proposals.size == 0:
        raise CalibrationError("empty proposal sample")

    cpu_ghz = table.cpu_levels[-1] / 1000.0
    gpu_ghz = table.gpu_levels[-1] / 1000.0
    stage1_ms = targets.mean_ms * targets.stage1_share
    stage2_ms = targets.mean_ms - stage1_ms

    if targets.stage1_share == 1.0:
        slope_ms, base_ms = 0.0, 0.0
    else:
        lo, hi = np.quantile(proposals, targets.quantiles)
        p_range = float(hi - lo)
        if targets.stage2_spread_ms == 0:
            slope_ms = 0.0
        elif p_range == 0:
            raise CalibrationError("proposal sample has no spread across the quantiles")
        else:
            slope_ms = targets.stage2_spread_ms / p_range
        base_ms = stage2_ms - slope_ms * float(np.mean(proposals))
        if base_ms < 0:
            raise CalibrationError(
                f"stage-2 spread {targets.stage2_spread_ms} ms needs a negative base "
                f"({base_ms:.2f} ms) for workload {targets.workload}"
            )

    c1, g1 = _split(stage1_ms, targets.stage1_gpu_share, cpu_ghz, gpu_ghz)
    c2, g2 = _split(base_ms, targets.stage2_gpu_share, cpu_ghz, gpu_ghz)
    cp, gp = _split(slope_ms, targets.stage2_gpu_share, cpu_ghz, gpu_ghz)
    params = LatencyModelParams(
        stage1_cpu_gcycles=c1,
        stage1_gpu_gcycles=g1,
        stage2_base_cpu_gcycles=c2,
        stage2_base_gpu_gcycles=g2,
        stage2_per_proposal_cpu_gcycles=cp,
        stage2_per_proposal_gpu_gcycles=gp,
        noise_sigma=targets.noise_sigma,
    )
    verify_calibration(table, params, targets, proposals)
    return params


def measure(table, params, proposals, quantiles):
    """Noiseless top-frequency latencies over a proposal sample."""
    cpu, gpu = table.cpu_levels[-1], table.gpu_levels[-1]
    s1 = np.empty(len(proposals))
    s2 = np.empty(len(proposals))
    for i, p in enumerate(proposals):
        s1[i], s2[i] = frame_latency(FrameWorkload(i, int(p)), cpu, gpu, params)
    total = s1 + s2
    lo, hi = np.quantile(s2, quantiles)
    return {
        "mean_ms": float(np.mean(total)),
        "stage1_share": float(np.mean(s1) / np.mean(total)),
        "stage2_spread_ms": float(hi - lo),
    }


def verify_calibration(table, params, targets, proposals=None):
    """Simulate the sample without noise and check the tolerances."""
    proposals = proposal_sample(targets) if proposals is None else proposals
    got = measure(table, params, proposals, targets.quantiles)

    problems = []
    if abs(got["mean_ms"] - targets.mean_ms) > MEAN_TOLERANCE * targets.mean_ms:
        problems.append(f"mean {got['mean_ms']:.2f} ms vs {targets.mean_ms}")
    if abs(got["stage1_share"] - targets.stage1_share) > SHARE_TOLERANCE:
        problems.append(f"stage-1 share {got['stage1_share']:.3f} vs {targets.stage1_share}")
    want_spread = 0.0 if targets.stage1_share == 1.0 else targets.stage2_spread_ms
    if abs(got["stage2_spread_ms"] - want_spread) > SPREAD_TOLERANCE * max(want_spread, 1e-9):
        problems.append(f"stage-2 spread {got['stage2_spread_ms']:.2f} ms vs {want_spread}")
    if problems:
        raise CalibrationError("calibration check failed: " + "; ".join(problems))

    logger.info(
        "Calibrated: mean %.2f ms, stage-1 share %.3f, stage-2 spread %.2f ms",
        got["mean_ms"], got["stage1_share"], got["stage2_spread_ms"],
    )
    return got


def resolve_profile(name_or_path):
    """Load a device profile, calibrating its latency model when needed."""
    profile = load_profile(name_or_path)
    if profile.latency is not None:
        return profile
    return replace(profile, latency=calibrate(profile.table, profile.calibration))
