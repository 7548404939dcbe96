import copy
import json
import logging
import os

from dotenv import load_dotenv

load_dotenv(os.path.join(os.path.dirname(__file__), ".env"))

POSTGRES = {
    "host": os.getenv("POSTGRES_HOST", "postgres"),
    "port": int(os.getenv("POSTGRES_PORT", 5432)),
    "dbname": os.getenv("POSTGRES_DB", "dvfsdb"),
    "user": os.getenv("POSTGRES_USER", "dvfsuser"),
    "password": os.getenv("POSTGRES_PASSWORD", "dvfspass"),
}
DB_ENABLED = os.getenv("DB_ENABLED", "0") == "1"

AGENT_HOST = os.getenv("AGENT_HOST", "localhost")
AGENT_PORT = int(os.getenv("AGENT_PORT", 7431))
METRICS_PORT = int(os.getenv("METRICS_PORT", 8000))
READ_TIMEOUT_S = float(os.getenv("READ_TIMEOUT_S", 10))

OUTPUT_DIR = os.getenv("OUTPUT_DIR", os.path.abspath("runs"))
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")


class ConfigError(ValueError):
    """Raised when a config file does not match the known sections."""


# Mirrors every algorithmic default; a JSON config file may override any leaf.
DEFAULTS = {
    "reward": {
        "lambda": 1.0,
        "penalty_p": 2.0,
        "window_n": 10,
    },
    "exploration": {
        "eps_start": 1.0,
        "eps_end": 0.05,
        "eps_decay_steps": 5000,
        "eps_t_init": 1.0,
        "cooldown_horizon": 200,
    },
    "qnet": {
        "hidden": 128,
        "width_alpha": 0.75,
        "base_lr": 0.01,
        "beta1": 0.9,
        "beta2": 0.99,
    },
    "agent": {
        "iterations": 10000,
        "max_frames": None,
        "batch_size": 64,
        "warmup": 500,
        "buffer_capacity": 10000,
        "gamma": 0.9,
        "target_update": 200,
        "p_max": 1000,
    },
    "protocol": {
        "message_ms": 1.92,
        "decision_ms": 0.42,
    },
    "sim": {
        "dt_ms": 10.0,
        "switch_ms": 0.05,
    },
    "ondemand": {
        "up_threshold": 0.8,
        "down_step": 1,
    },
    "bench": {
        "alpha": 0.01,
        "beta": 100.0,
        "frames": 3000,
        "budgets": {
            "kitti-like": 450.0,
            "visdrone-like": 650.0,
        },
    },
}


def _merge(base, override, path=""):
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"Unknown config key: {path}{key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, f"{path}{key}.")
        else:
            base[key] = value


def load_config(path=None):
    """
    Return the effective configuration.

    The JSON document at `path` (if any) is deep-merged over DEFAULTS.
    Budgets are open-ended so new workload names can be added.
    """
    config = copy.deepcopy(DEFAULTS)
    if path is None:
        return config

    with open(path, "r", encoding="utf-8") as f:
        override = json.load(f)

    budgets = override.get("bench", {}).pop("budgets", None)
    _merge(config, override)
    if budgets:
        config["bench"]["budgets"].update(budgets)
    return config


def setup_logging(level=None):
    """Configure bracket-tagged console logging once per process."""
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        format="[%(name)s] %(message)s",
    )
