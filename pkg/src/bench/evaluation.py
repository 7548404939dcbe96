"""
Seeded training and evaluation runs on the simulator.

Every run derives independent random streams (workload, latency noise)
from one seed with numpy's SeedSequence, so the same seed reproduces the
same CSV byte for byte.
"""

import json
import logging
import os

import numpy as np

from agent.agent import AgentConfig, ExplorationConfig
from agent.trainer import FrameLog, frame_row, train
from bench.metrics import compute_metrics
from bench.scenario import load_scenario
from config.settings import load_config
from core.model import LatencyConstraint, ObjectiveWeights, RewardConfig
from device.simulator import NO_OVERHEAD, SimulatedDevice
from governors.governors import build_agent
from protocol.protocol import frame_overhead
from reward.reward import FrameRewarder
from telemetry.database import persist_run
from workload.workload import WorkloadSource, concat_traces, get_profile, load_trace

logger = logging.getLogger("BENCH")

FRAMES_CSV = "frames.csv"
METRICS_JSON = "metrics.json"


def budget_for(profile, config, budget_ms=None):
    if budget_ms is not None:
        return float(budget_ms)
    budgets = config["bench"]["budgets"]
    if profile.workload not in budgets:
        raise ValueError(f"no latency budget configured for workload {profile.workload}")
    return float(budgets[profile.workload])


def variant_overhead(variant, config):
    """Per-frame protocol cost of a learned agent: sds decides twice, ztt once."""
    if variant not in ("sds", "ztt"):
        raise ValueError(f"no remote agent variant named {variant!r}")
    proto = config["protocol"]
    decisions = 2 if variant == "sds" else 1
    return frame_overhead(decisions, proto["message_ms"], proto["decision_ms"])


def governor_overhead(governor, config):
    """Learned governors pay for their Obs/Act messages and Q-network runs."""
    if not governor.remote:
        return NO_OVERHEAD
    return variant_overhead("sds" if governor.acts_twice else "ztt", config)


def make_device(profile, config, budget_ms, seed, ambient_c=None, overhead=NO_OVERHEAD,
                trace_path=None):
    workload_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    trace = None
    if trace_path:
        # several files replay back to back, e.g. a recorded domain change
        paths = [trace_path] if isinstance(trace_path, str) else list(trace_path)
        trace = concat_traces(*(load_trace(p) for p in paths))
    source = WorkloadSource(
        get_profile(profile.workload),
        rng=np.random.default_rng(workload_seq),
        trace=trace,
    )
    model = profile.model(dt_ms=config["sim"]["dt_ms"], switch_ms=config["sim"]["switch_ms"])
    device = SimulatedDevice(
        model, source, budget_ms,
        ambient_c=profile.ambient_c if ambient_c is None else ambient_c,
        rng=np.random.default_rng(noise_seq),
        overhead=overhead,
    )
    device.name = profile.name
    return device


def apply_events(scenario, frame, device, rewarder):
    for event in scenario.events_at(frame):
        if event.ambient_c is not None:
            device.set_ambient(event.ambient_c)
            logger.info("frame %d: ambient %.1f C", frame, event.ambient_c)
        elif event.workload is not None:
            device.workloads.switch(get_profile(event.workload))
            logger.info("frame %d: workload %s", frame, event.workload)
        elif event.budget_ms is not None:
            device.budget_ms = event.budget_ms
            rewarder.budget_ms = event.budget_ms
            logger.info("frame %d: budget %.1f ms", frame, event.budget_ms)


def run_eval(governor, profile, scenario=None, frames=3000, seed=0, out_dir=None,
             config=None, budget_ms=None, persist=False, trace_path=None):
    """
    Run `governor` on `profile` for `frames` frames.

    Returns (Metrics, rows). With `out_dir`, writes the per-frame CSV
    (training-log columns plus ambient_c) and a metrics JSON.
    """
    config = config or load_config()
    if scenario is None or isinstance(scenario, str):
        scenario = load_scenario(scenario, config["bench"]["budgets"])
    if frames < 1:
        raise ValueError("frames must be at least 1")

    budget = budget_for(profile, config, budget_ms)
    overhead = governor_overhead(governor, config)
    device = make_device(profile, config, budget, seed,
                         ambient_c=scenario.initial_ambient(profile.ambient_c),
                         overhead=overhead, trace_path=trace_path)
    rewarder = FrameRewarder(RewardConfig.from_dict(config["reward"]), profile.thermal, budget)
    weights = ObjectiveWeights(config["bench"]["alpha"], config["bench"]["beta"])

    log = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log = FrameLog(os.path.join(out_dir, FRAMES_CSV), extra_columns=("ambient_c",))

    logger.info("Evaluating %s on %s (%s, %d frames, seed %d, overhead %.2f ms)",
                governor.name, profile.name, scenario.name, frames, seed, overhead.total_ms)
    traces, rows, budgets = [], [], []
    try:
        for k in range(frames):
            apply_events(scenario, k, device, rewarder)
            trace = device.step(lambda obs: governor.act(obs, device.utilization()))
            rewards = rewarder.score(trace.result, (trace.mid_cpu_temp, trace.mid_gpu_temp))
            eps, eps_t = governor.exploration()
            row = frame_row(k, trace.result, trace.action_a, trace.action_b, rewards, eps, eps_t)
            row["ambient_c"] = float(trace.ambient_c)
            if log is not None:
                log.write(row)
            trace.samples = []
            traces.append(trace)
            rows.append(row)
            budgets.append(device.budget_ms)
    finally:
        if log is not None:
            log.close()

    metrics = compute_metrics(traces, budgets, weights, throttle_c=profile.thermal.throttle_c)
    if out_dir is not None:
        summary = {
            "governor": governor.name,
            "profile": profile.name,
            "scenario": scenario.name,
            "seed": seed,
            "frames": frames,
            "budget_ms": budget,
            "overhead_ms": overhead.total_ms,
            "metrics": metrics.to_dict(),
        }
        with open(os.path.join(out_dir, METRICS_JSON), "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
    if persist:
        persist_run(f"{governor.name}-{profile.name}-{seed}", governor.name, rows)

    logger.info("%s: mean %.1f ms, std %.1f ms, satisfaction %.3f, throttles %d",
                governor.name, metrics.mean_latency_ms, metrics.latency_std_ms,
                metrics.satisfaction_rate, metrics.throttle_event_count)
    return metrics, rows


def run_training(variant, profile, out_path, frames=None, seed=0, config=None,
                 budget_ms=None, log_path=None):
    """
    Train an sds or ztt agent on a simulated device and write its checkpoint.

    Training stops at the configured iteration count or after `frames`.
    """
    config = config or load_config()
    budget = budget_for(profile, config, budget_ms)
    cfg = AgentConfig.from_config(config)
    expl = ExplorationConfig.from_dict(config["exploration"])
    agent = build_agent(variant, profile.table, LatencyConstraint(budget), profile.thermal,
                        cfg, expl, seed)

    # same per-frame protocol overhead as in service
    device = make_device(profile, config, budget, seed,
                         overhead=variant_overhead(variant, config))
    rewarder = FrameRewarder(RewardConfig.from_dict(config["reward"]), profile.thermal, budget)

    max_frames = frames if frames is not None else config["agent"]["max_frames"]
    log = FrameLog(log_path) if log_path else None
    try:
        trainer = train(agent, device, rewarder, max_frames=max_frames, log=log)
    finally:
        if log is not None:
            log.close()

    agent.save(out_path)
    return agent, trainer
