"""
Device profile documents.

A profile JSON holds the frequency table, per-processor thermal
parameters, thermal limits, ambient temperature and either explicit
latency parameters ("latency") or calibration targets ("calibration")
from which the bench computes them.
"""

import json
import os
from dataclasses import dataclass
from typing import Optional

from core.model import FrequencyTable, ThermalConfig
from device.simulator import DeviceModel, LatencyModelParams, ProcessorThermalParams

PROFILE_DIR = os.path.join(os.path.dirname(__file__), "profiles")

LATENCY_FIELDS = (
    "stage1_cpu_gcycles",
    "stage1_gpu_gcycles",
    "stage2_base_cpu_gcycles",
    "stage2_base_gpu_gcycles",
    "stage2_per_proposal_cpu_gcycles",
    "stage2_per_proposal_gpu_gcycles",
    "noise_sigma",
)


@dataclass(frozen=True)
class CalibrationTargets:
    mean_ms: float
    stage1_share: float
    stage2_spread_ms: float
    workload: str = "kitti-like"
    stage1_gpu_share: float = 0.9
    stage2_gpu_share: float = 0.6
    quantiles: tuple = (0.05, 0.95)
    noise_sigma: float = 0.03
    samples: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not (self.mean_ms > 0 and self.stage2_spread_ms >= 0):
            raise ValueError("calibration targets must be positive")
        if not 0 < self.stage1_share <= 1:
            raise ValueError("stage1_share must lie in (0, 1]")
        for share in (self.stage1_gpu_share, self.stage2_gpu_share):
            if not 0 <= share <= 1:
                raise ValueError("gpu shares must lie in [0, 1]")
        lo, hi = self.quantiles
        if not 0 <= lo < hi <= 1:
            raise ValueError("quantiles must satisfy 0 <= lo < hi <= 1")


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    table: FrequencyTable
    cpu_thermal: ProcessorThermalParams
    gpu_thermal: ProcessorThermalParams
    thermal: ThermalConfig
    ambient_c: float
    workload: str
    latency: Optional[LatencyModelParams] = None
    calibration: Optional[CalibrationTargets] = None
    host_sync_share: float = 0.0

    def model(self, dt_ms=10.0, switch_ms=0.05, latency=None):
        latency = latency or self.latency
        if latency is None:
            raise ValueError(f"profile {self.name} has no latency parameters; calibrate first")
        return DeviceModel(
            table=self.table,
            cpu_thermal=self.cpu_thermal,
            gpu_thermal=self.gpu_thermal,
            latency=latency,
            thermal=self.thermal,
            dt_ms=dt_ms,
            switch_ms=switch_ms,
            host_sync_share=self.host_sync_share,
        )


def _processor(doc):
    return ProcessorThermalParams(
        heat_capacity=doc["heat_capacity_j_per_c"],
        resistance_to_ambient=doc["r_ambient_c_per_w"],
        coupling_resistance=doc["r_couple_c_per_w"],
        kappa=doc["kappa_w_per_ghz3"],
        idle_power=doc["idle_w"],
    )


def profile_from_dict(doc):
    try:
        table = FrequencyTable(
            tuple(doc["freq_table"]["cpu_levels_mhz"]),
            tuple(doc["freq_table"]["gpu_levels_mhz"]),
        )
        latency = None
        if "latency" in doc:
            latency = LatencyModelParams(**{k: doc["latency"][k] for k in LATENCY_FIELDS})
        calibration = None
        if "calibration" in doc:
            cal = dict(doc["calibration"])
            if "quantiles" in cal:
                cal["quantiles"] = tuple(cal["quantiles"])
            calibration = CalibrationTargets(**cal)
        if latency is None and calibration is None:
            raise ValueError("profile needs 'latency' or 'calibration'")

        return DeviceProfile(
            name=doc["name"],
            table=table,
            cpu_thermal=_processor(doc["thermal"]["cpu"]),
            gpu_thermal=_processor(doc["thermal"]["gpu"]),
            thermal=ThermalConfig(
                threshold_c=doc.get("threshold_c", doc["throttle_c"] - 10.0),
                throttle_c=doc["throttle_c"],
                hysteresis_c=doc["hysteresis_c"],
            ),
            ambient_c=doc["ambient_c"],
            workload=doc.get("workload", "kitti-like"),
            latency=latency,
            calibration=calibration,
            host_sync_share=doc.get("host_sync_share", 0.0),
        )
    except KeyError as e:
        raise ValueError(f"device profile missing field {e}") from None


def profile_to_dict(profile):
    def processor(p):
        return {
            "heat_capacity_j_per_c": p.heat_capacity,
            "r_ambient_c_per_w": p.resistance_to_ambient,
            "r_couple_c_per_w": p.coupling_resistance,
            "kappa_w_per_ghz3": p.kappa,
            "idle_w": p.idle_power,
        }

    doc = {
        "name": profile.name,
        "freq_table": {
            "cpu_levels_mhz": list(profile.table.cpu_levels),
            "gpu_levels_mhz": list(profile.table.gpu_levels),
        },
        "thermal": {
            "cpu": processor(profile.cpu_thermal),
            "gpu": processor(profile.gpu_thermal),
        },
        "ambient_c": profile.ambient_c,
        "threshold_c": profile.thermal.threshold_c,
        "throttle_c": profile.thermal.throttle_c,
        "hysteresis_c": profile.thermal.hysteresis_c,
        "workload": profile.workload,
        "host_sync_share": profile.host_sync_share,
    }
    if profile.latency is not None:
        doc["latency"] = {k: getattr(profile.latency, k) for k in LATENCY_FIELDS}
    return doc


def builtin_profiles():
    return sorted(f[:-5] for f in os.listdir(PROFILE_DIR) if f.endswith(".json"))


def load_profile(name_or_path):
    """Load a built-in profile by name, or any profile JSON by path."""
    path = name_or_path
    if not os.path.exists(path):
        path = os.path.join(PROFILE_DIR, f"{name_or_path}.json")
        if not os.path.exists(path):
            raise ValueError(f"Unknown device profile: {name_or_path}")
    with open(path, "r", encoding="utf-8") as f:
        return profile_from_dict(json.load(f))
