"""
Command line entry point.

    python -m bench.cli calibrate --profile jetson-fasterrcnn-kitti
    python -m bench.cli train --governor sds --profile jetson-fasterrcnn-kitti --out runs/sds.npz
    python -m bench.cli eval --governor sds --checkpoint runs/sds.npz --out runs/eval-sds
    python -m bench.cli report --in runs/eval-sds runs/eval-ondemand --out runs/report
    python -m bench.cli serve-agent --checkpoint runs/sds.npz --port 7431
    python -m bench.cli serve-device --profile jetson-fasterrcnn-kitti --port 7431

Flags override the JSON config given with --config, which overrides the
built-in defaults.
"""

import argparse
import json
import logging
import os
import sys

from agent.agent import AgentConfig, ExplorationConfig
from agent.trainer import FrameLog, frame_row
from bench.calibration import resolve_profile, verify_calibration
from bench.evaluation import (
    budget_for,
    make_device,
    run_eval,
    run_training,
    variant_overhead,
)
from bench.report import report
from bench.scenario import load_scenario
from client.client import run_device_client
from config.settings import (
    AGENT_HOST,
    AGENT_PORT,
    DB_ENABLED,
    METRICS_PORT,
    OUTPUT_DIR,
    READ_TIMEOUT_S,
    load_config,
    setup_logging,
)
from core.model import Action, LatencyConstraint, RewardConfig
from device.profiles import profile_to_dict
from governors.governors import GOVERNOR_NAMES, build_agent, build_governor
from reward.reward import FrameRewarder
from server.server import AgentServer, InferenceSession, TrainingSession, serve_agent
from telemetry.database import persist_run
from telemetry.metrics import FrameMetrics

logger = logging.getLogger("BENCH")

DEFAULT_PROFILE = "jetson-fasterrcnn-kitti"


# -------------------------------
# Argument Parsing
# -------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="bench", description="DVFS governor bench")
    parser.add_argument("--config", help="JSON config file overriding the defaults")
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="solve and check a profile's latency model")
    p.add_argument("--profile", default=DEFAULT_PROFILE)
    p.add_argument("--out", help="write the calibrated profile JSON here")

    p = sub.add_parser("train", help="train an sds or ztt agent on the simulator")
    p.add_argument("--governor", choices=("sds", "ztt"), default="sds")
    p.add_argument("--profile", default=DEFAULT_PROFILE)
    p.add_argument("--frames", type=int, help="stop after this many frames")
    p.add_argument("--iterations", type=int, help="gradient steps (default from config)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float, help="latency budget in ms")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--log", help="per-frame training CSV (default <out>.csv)")

    p = sub.add_parser("eval", help="evaluate a governor")
    p.add_argument("--governor", choices=GOVERNOR_NAMES, required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--profile", default=DEFAULT_PROFILE)
    p.add_argument("--scenario", help="static, warm-cold, domain-change or a JSON file")
    p.add_argument("--trace", nargs="+",
                   help="replay proposal counts from trace CSVs, joined in order")
    p.add_argument("--levels", help="fixed governor levels as CPU,GPU (default: max)")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float)
    p.add_argument("--alpha", type=float, help="objective variance weight")
    p.add_argument("--beta", type=float, help="objective violation weight")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--db", action="store_true", default=DB_ENABLED,
                   help="also store frames in PostgreSQL")

    p = sub.add_parser("report", help="compare evaluation runs")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", default=os.path.join(OUTPUT_DIR, "report"))

    p = sub.add_parser("serve-agent", help="answer a remote device's decisions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--governor", choices=("sds", "ztt"), default="sds")
    p.add_argument("--profile", default=DEFAULT_PROFILE)
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=AGENT_PORT)
    p.add_argument("--train", action="store_true", help="train online, checkpoint on exit")
    p.add_argument("--budget", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sessions", type=int, help="exit after this many sessions")
    p.add_argument("--metrics-port", type=int, default=METRICS_PORT)

    p = sub.add_parser("serve-device", help="run the simulated device against an agent")
    p.add_argument("--profile", default=DEFAULT_PROFILE)
    p.add_argument("--governor", choices=("sds", "ztt"), default="sds",
                   help="agent variant on the other end; sets the per-frame overhead")
    p.add_argument("--host", default=AGENT_HOST)
    p.add_argument("--port", type=int, default=AGENT_PORT)
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float)
    p.add_argument("--timeout", type=float, default=READ_TIMEOUT_S)
    p.add_argument("--metrics-port", type=int, default=METRICS_PORT)
    p.add_argument("--db", action="store_true", default=DB_ENABLED,
                   help="store the session's frames in PostgreSQL")
    return parser


def apply_overrides(config, args):
    """CLI flags win over the config file."""
    if getattr(args, "iterations", None) is not None:
        config["agent"]["iterations"] = args.iterations
    if getattr(args, "alpha", None) is not None:
        config["bench"]["alpha"] = args.alpha
    if getattr(args, "beta", None) is not None:
        config["bench"]["beta"] = args.beta
    return config


def parse_levels(text):
    try:
        cpu, gpu = (int(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"levels must look like CPU,GPU, got {text!r}") from None
    return Action(cpu, gpu)


# -------------------------------
# Commands
# -------------------------------

def cmd_calibrate(args, config):
    profile = resolve_profile(args.profile)
    if profile.calibration is not None:
        verify_calibration(profile.table, profile.latency, profile.calibration)
    doc = profile_to_dict(profile)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
        logger.info("Calibrated profile written to %s", args.out)
    else:
        print(json.dumps(doc["latency"], indent=2))
    return 0


def cmd_train(args, config):
    profile = resolve_profile(args.profile)
    log_path = args.log or os.path.splitext(args.out)[0] + ".csv"
    agent, trainer = run_training(
        args.governor, profile, args.out,
        frames=args.frames, seed=args.seed, config=config,
        budget_ms=args.budget, log_path=log_path,
    )
    logger.info("Trained %s: %d frames, %d iterations -> %s",
                agent.variant, trainer.frames, agent.iterations, args.out)
    return 0


def cmd_eval(args, config):
    profile = resolve_profile(args.profile)
    budget = budget_for(profile, config, args.budget)
    levels = parse_levels(args.levels) if args.levels else None
    governor = build_governor(
        args.governor, profile.table, LatencyConstraint(budget), profile.thermal,
        checkpoint=args.checkpoint, config=config, levels=levels, seed=args.seed,
    )
    scenario = load_scenario(args.scenario, config["bench"]["budgets"])
    frames = args.frames if args.frames is not None else config["bench"]["frames"]
    run_eval(governor, profile, scenario, frames=frames, seed=args.seed, out_dir=args.out,
             config=config, budget_ms=args.budget, persist=args.db, trace_path=args.trace)
    return 0


def cmd_report(args, config):
    report(args.inputs, args.out)
    return 0


def cmd_serve_agent(args, config):
    profile = resolve_profile(args.profile)
    budget = budget_for(profile, config, args.budget)
    constraint = LatencyConstraint(budget)
    metrics = FrameMetrics(budget)
    metrics.serve(args.metrics_port)

    if args.train:
        if os.path.exists(args.checkpoint):
            agent = build_governor(args.governor, profile.table, constraint, profile.thermal,
                                   checkpoint=args.checkpoint, seed=args.seed).agent
            logger.info("Resuming from %s at %d iterations", args.checkpoint, agent.iterations)
        else:
            agent = build_agent(args.governor, profile.table, constraint, profile.thermal,
                                AgentConfig.from_config(config),
                                ExplorationConfig.from_dict(config["exploration"]), args.seed)
        rewarder = FrameRewarder(RewardConfig.from_dict(config["reward"]),
                                 profile.thermal, budget)
        log = FrameLog(os.path.splitext(args.checkpoint)[0] + ".csv")

        def factory():
            return TrainingSession(agent, rewarder, args.checkpoint, metrics=metrics, log=log)
    else:
        governor = build_governor(args.governor, profile.table, constraint, profile.thermal,
                                  checkpoint=args.checkpoint, seed=args.seed)
        log = None

        def factory():
            return InferenceSession(governor, metrics)

    server = AgentServer((args.host, args.port), factory)
    try:
        serve_agent(server, args.sessions)
    finally:
        if log is not None:
            log.close()
    return 0


def cmd_serve_device(args, config):
    profile = resolve_profile(args.profile)
    budget = budget_for(profile, config, args.budget)
    device = make_device(profile, config, budget, args.seed,
                         overhead=variant_overhead(args.governor, config))
    metrics = FrameMetrics(budget)
    metrics.serve(args.metrics_port)
    frames = args.frames if args.frames is not None else config["bench"]["frames"]
    traces = run_device_client(device, profile.name, frames, host=args.host, port=args.port,
                               timeout=args.timeout, metrics=metrics)
    if args.db:
        rewarder = FrameRewarder(RewardConfig.from_dict(config["reward"]),
                                 profile.thermal, budget)
        rows = [
            frame_row(k, t.result, t.action_a, t.action_b,
                      rewarder.score(t.result, (t.mid_cpu_temp, t.mid_gpu_temp)))
            for k, t in enumerate(traces)
        ]
        persist_run(f"remote-{args.governor}-{profile.name}-{args.seed}", args.governor, rows)
    return 0


COMMANDS = {
    "calibrate": cmd_calibrate,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
    "serve-agent": cmd_serve_agent,
    "serve-device": cmd_serve_device,
}


# -------------------------------
# Entry Point
# -------------------------------

def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        config = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](args, config)
    except (ValueError, OSError) as e:
        print(f"[BENCH ERROR] {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
