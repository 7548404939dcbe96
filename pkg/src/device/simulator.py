"""
Edge device simulator.

Models two processors (CPU, GPU) with:
- an RC thermal network integrated by forward Euler,
- cubic dynamic power at the running frequency,
- a cycle-based latency model for the two detector stages,
- hardware throttling with hysteresis (throttled processors run at level 0).

A stage's work is executed as a CPU phase followed by a GPU phase in
dt sub-steps. The busy processor draws dynamic power, the other one idles.
Without throttle transitions the elapsed time equals `frame_latency`.
The host thread that launched the GPU kernels spins on their completion,
so a share of GPU time also shows up as CPU utilization (no extra power).
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from core.model import FrameResult, Observation, Stage

logger = logging.getLogger("DEVICE")


# -------------------------------
# Parameters
# -------------------------------

@dataclass(frozen=True)
class ProcessorThermalParams:
    heat_capacity: float        # J/°C
    resistance_to_ambient: float  # °C/W
    coupling_resistance: float  # °C/W, towards the other processor
    kappa: float                # W/GHz^3
    idle_power: float           # W

    def __post_init__(self):
        for name in ("heat_capacity", "resistance_to_ambient", "coupling_resistance",
                     "kappa", "idle_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def time_constant_s(self):
        r_eff = 1.0 / (1.0 / self.resistance_to_ambient + 1.0 / self.coupling_resistance)
        return self.heat_capacity * r_eff


@dataclass(frozen=True)
class LatencyModelParams:
    """Work terms in GHz*ms, so work / frequency_GHz gives milliseconds."""

    stage1_cpu_gcycles: float
    stage1_gpu_gcycles: float
    stage2_base_cpu_gcycles: float
    stage2_base_gpu_gcycles: float
    stage2_per_proposal_cpu_gcycles: float
    stage2_per_proposal_gpu_gcycles: float
    noise_sigma: float = 0.03

    def __post_init__(self):
        for name in ("stage1_cpu_gcycles", "stage1_gpu_gcycles",
                     "stage2_base_cpu_gcycles", "stage2_base_gpu_gcycles",
                     "stage2_per_proposal_cpu_gcycles", "stage2_per_proposal_gpu_gcycles"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.noise_sigma <= 0.2:
            raise ValueError("noise_sigma must lie in [0, 0.2]")

    def stage1_work(self):
        return self.stage1_cpu_gcycles, self.stage1_gpu_gcycles

    def stage2_work(self, proposals):
        return (
            self.stage2_base_cpu_gcycles + self.stage2_per_proposal_cpu_gcycles * proposals,
            self.stage2_base_gpu_gcycles + self.stage2_per_proposal_gpu_gcycles * proposals,
        )


@dataclass(frozen=True)
class DeviceModel:
    """Everything physical about one device/detector pairing."""

    table: object
    cpu_thermal: ProcessorThermalParams
    gpu_thermal: ProcessorThermalParams
    latency: LatencyModelParams
    thermal: object
    dt_ms: float = 10.0
    switch_ms: float = 0.05
    host_sync_share: float = 0.0  # share of GPU time the host thread spins on sync

    def __post_init__(self):
        if not self.dt_ms > 0:
            raise ValueError("dt_ms must be positive")
        if not 0.0 <= self.host_sync_share <= 1.0:
            raise ValueError("host_sync_share must lie in [0, 1]")
        limit_ms = min(self.cpu_thermal.time_constant_s(),
                       self.gpu_thermal.time_constant_s()) * 1000.0 / 4.0
        if self.dt_ms > limit_ms:
            raise ValueError(
                f"dt_ms={self.dt_ms} unstable for forward Euler (limit {limit_ms:.3f} ms)"
            )


@dataclass(frozen=True)
class Overhead:
    """Governor time charged before stage 1 and between the stages."""

    pre_ms: float = 0.0
    mid_ms: float = 0.0

    @property
    def total_ms(self):
        return self.pre_ms + self.mid_ms


NO_OVERHEAD = Overhead()


# -------------------------------
# State and Traces
# -------------------------------

@dataclass(frozen=True)
class DeviceSimState:
    cpu_temp: float
    gpu_temp: float
    ambient_temp: float
    cpu_level: int
    gpu_level: int
    cpu_throttled: bool = False
    gpu_throttled: bool = False
    sim_clock: float = 0.0
    last_slack_ms: float = 0.0

    def effective_levels(self):
        return (
            0 if self.cpu_throttled else self.cpu_level,
            0 if self.gpu_throttled else self.gpu_level,
        )


def initial_state(model, ambient_c, budget_ms):
    """Cold start: both processors at ambient, running the top levels."""
    top = model.table.max_action()
    return DeviceSimState(
        cpu_temp=ambient_c,
        gpu_temp=ambient_c,
        ambient_temp=ambient_c,
        cpu_level=top.cpu_level,
        gpu_level=top.gpu_level,
        last_slack_ms=budget_ms,
    )


@dataclass
class FrameTrace:
    frame_id: int
    stage1_ms: float
    stage2_ms: float
    total_ms: float
    proposals: int
    cpu_temp: float
    gpu_temp: float
    mid_cpu_temp: float
    mid_gpu_temp: float
    peak_cpu_temp: float
    peak_gpu_temp: float
    ambient_c: float
    action_a: object
    action_b: object
    throttle_events: int = 0
    cpu_busy_ms: float = 0.0
    gpu_busy_ms: float = 0.0
    cpu_wait_ms: float = 0.0
    observations: Tuple[Observation, ...] = ()
    samples: List[Tuple[float, float, float]] = field(default_factory=list)

    @property
    def result(self):
        return FrameResult(
            stage1_ms=self.stage1_ms,
            stage2_ms=self.stage2_ms,
            total_ms=self.total_ms,
            proposals=self.proposals,
            cpu_temp=self.cpu_temp,
            gpu_temp=self.gpu_temp,
        )

    @property
    def utilization(self):
        if self.total_ms <= 0:
            return 0.0, 0.0
        return (
            min(1.0, (self.cpu_busy_ms + self.cpu_wait_ms) / self.total_ms),
            min(1.0, self.gpu_busy_ms / self.total_ms),
        )


# -------------------------------
# Physics
# -------------------------------

def power(freq_mhz, params):
    ghz = freq_mhz / 1000.0
    return params.kappa * ghz ** 3 + params.idle_power


def _euler(t_self, t_other, t_amb, dt_s, p, params):
    flow = (p - (t_self - t_amb) / params.resistance_to_ambient
            - (t_self - t_other) / params.coupling_resistance)
    return t_self + (dt_s / params.heat_capacity) * flow


def step_thermal(state, dt_ms, cpu_power, gpu_power, cpu_params, gpu_params):
    if not dt_ms > 0:
        raise ValueError("dt_ms must be positive")
    dt_s = dt_ms / 1000.0
    cpu = _euler(state.cpu_temp, state.gpu_temp, state.ambient_temp, dt_s, cpu_power, cpu_params)
    gpu = _euler(state.gpu_temp, state.cpu_temp, state.ambient_temp, dt_s, gpu_power, gpu_params)
    return replace(state, cpu_temp=cpu, gpu_temp=gpu, sim_clock=state.sim_clock + dt_ms)


def _throttle_flag(temp, throttled, thermal):
    if temp > thermal.throttle_c:
        return True
    if throttled and temp < thermal.throttle_c - thermal.hysteresis_c:
        return False
    return throttled


def check_throttle(state, thermal):
    return replace(
        state,
        cpu_throttled=_throttle_flag(state.cpu_temp, state.cpu_throttled, thermal),
        gpu_throttled=_throttle_flag(state.gpu_temp, state.gpu_throttled, thermal),
    )


def frame_latency(workload, cpu_freq, gpu_freq, params,
                  cpu_freq2=None, gpu_freq2=None, noise=(1.0, 1.0)):
    """Closed-form (stage1_ms, stage2_ms) for fixed frequencies in MHz."""
    cpu_freq2 = cpu_freq if cpu_freq2 is None else cpu_freq2
    gpu_freq2 = gpu_freq if gpu_freq2 is None else gpu_freq2

    c1, g1 = params.stage1_work()
    c2, g2 = params.stage2_work(workload.proposals)
    stage1 = c1 / (cpu_freq / 1000.0) + g1 / (gpu_freq / 1000.0)
    stage2 = c2 / (cpu_freq2 / 1000.0) + g2 / (gpu_freq2 / 1000.0)
    return stage1 * noise[0], stage2 * noise[1]


# -------------------------------
# Frame Execution
# -------------------------------

class _Run:
    """Mutable float-level integrator for one frame."""

    def __init__(self, state, model):
        self.model = model
        self.cpu_temp = state.cpu_temp
        self.gpu_temp = state.gpu_temp
        self.ambient = state.ambient_temp
        self.cpu_level = state.cpu_level
        self.gpu_level = state.gpu_level
        self.cpu_throttled = state.cpu_throttled
        self.gpu_throttled = state.gpu_throttled
        self.clock = state.sim_clock
        self.throttle_events = 0
        self.cpu_busy = 0.0
        self.gpu_busy = 0.0
        self.peak_cpu = state.cpu_temp
        self.peak_gpu = state.gpu_temp
        self.samples = []

    def freq_mhz(self, unit):
        table = self.model.table
        if unit == "cpu":
            return table.cpu_levels[0 if self.cpu_throttled else self.cpu_level]
        return table.gpu_levels[0 if self.gpu_throttled else self.gpu_level]

    def advance(self, dt_ms, busy):
        cpu_p = self.model.cpu_thermal
        gpu_p = self.model.gpu_thermal
        p_cpu = power(self.freq_mhz("cpu"), cpu_p) if busy == "cpu" else cpu_p.idle_power
        p_gpu = power(self.freq_mhz("gpu"), gpu_p) if busy == "gpu" else gpu_p.idle_power

        dt_s = dt_ms / 1000.0
        cpu = _euler(self.cpu_temp, self.gpu_temp, self.ambient, dt_s, p_cpu, cpu_p)
        gpu = _euler(self.gpu_temp, self.cpu_temp, self.ambient, dt_s, p_gpu, gpu_p)
        self.cpu_temp, self.gpu_temp = cpu, gpu
        self.clock += dt_ms
        if busy == "cpu":
            self.cpu_busy += dt_ms
        elif busy == "gpu":
            self.gpu_busy += dt_ms

        thermal = self.model.thermal
        cpu_t = _throttle_flag(cpu, self.cpu_throttled, thermal)
        gpu_t = _throttle_flag(gpu, self.gpu_throttled, thermal)
        self.throttle_events += int(cpu_t and not self.cpu_throttled)
        self.throttle_events += int(gpu_t and not self.gpu_throttled)
        if cpu_t != self.cpu_throttled or gpu_t != self.gpu_throttled:
            logger.debug("throttle cpu=%s gpu=%s at %.1f ms", cpu_t, gpu_t, self.clock)
        self.cpu_throttled, self.gpu_throttled = cpu_t, gpu_t

        self.peak_cpu = max(self.peak_cpu, cpu)
        self.peak_gpu = max(self.peak_gpu, gpu)
        self.samples.append((self.clock, cpu, gpu))

    def idle(self, duration_ms):
        remaining = duration_ms
        while remaining > 0:
            step = min(self.model.dt_ms, remaining)
            self.advance(step, None)
            remaining -= step
        return duration_ms

    def execute(self, cpu_work, gpu_work):
        """Run a stage's work; returns elapsed milliseconds."""
        elapsed = 0.0
        for unit, work in (("cpu", cpu_work), ("gpu", gpu_work)):
            remaining = work
            while remaining > 0:
                ghz = self.freq_mhz(unit) / 1000.0
                needed = remaining / ghz
                if needed <= self.model.dt_ms:
                    self.advance(needed, unit)
                    elapsed += needed
                    remaining = 0.0
                else:
                    self.advance(self.model.dt_ms, unit)
                    elapsed += self.model.dt_ms
                    remaining -= ghz * self.model.dt_ms
        return elapsed

    def apply(self, action):
        action.check(self.model.table)
        changed = (action.cpu_level, action.gpu_level) != (self.cpu_level, self.gpu_level)
        self.cpu_level, self.gpu_level = action.cpu_level, action.gpu_level
        return self.idle(self.model.switch_ms) if changed else 0.0

    def observe(self, stage, slack_ms, proposals=None):
        return Observation(
            stage=stage,
            cpu_temp=self.cpu_temp,
            gpu_temp=self.gpu_temp,
            cpu_level=self.cpu_level,
            gpu_level=self.gpu_level,
            slack_ms=slack_ms,
            proposals=proposals,
        )

    def state(self, last_slack_ms):
        return DeviceSimState(
            cpu_temp=self.cpu_temp,
            gpu_temp=self.gpu_temp,
            ambient_temp=self.ambient,
            cpu_level=self.cpu_level,
            gpu_level=self.gpu_level,
            cpu_throttled=self.cpu_throttled,
            gpu_throttled=self.gpu_throttled,
            sim_clock=self.clock,
            last_slack_ms=last_slack_ms,
        )


def draw_noise(params, rng):
    if rng is None or params.noise_sigma == 0:
        return 1.0, 1.0
    n1, n2 = rng.lognormal(0.0, params.noise_sigma, size=2)
    return float(n1), float(n2)


def run_frame(state, workload, supplier, model, budget_ms, rng=None, overhead=NO_OVERHEAD):
    """
    Simulate one two-stage inference.

    `supplier(observation) -> Action` is called at frame start and again
    once the proposal count is known. Returns (FrameTrace, next state).
    """
    run = _Run(state, model)
    noise = draw_noise(model.latency, rng)

    obs_a = run.observe(Stage.FRAME_START, state.last_slack_ms)
    elapsed = run.idle(overhead.pre_ms)
    action_a = supplier(obs_a)
    elapsed += run.apply(action_a)

    cpu_w, gpu_w = model.latency.stage1_work()
    stage1 = run.execute(cpu_w * noise[0], gpu_w * noise[0])
    elapsed += stage1
    mid_cpu, mid_gpu = run.cpu_temp, run.gpu_temp

    obs_b = run.observe(Stage.AFTER_RPN, budget_ms - elapsed, workload.proposals)
    elapsed += run.idle(overhead.mid_ms)
    action_b = supplier(obs_b)
    elapsed += run.apply(action_b)

    cpu_w, gpu_w = model.latency.stage2_work(workload.proposals)
    stage2 = run.execute(cpu_w * noise[1], gpu_w * noise[1])
    elapsed += stage2

    trace = FrameTrace(
        frame_id=workload.frame_id,
        stage1_ms=stage1,
        stage2_ms=stage2,
        total_ms=elapsed,
        proposals=workload.proposals,
        cpu_temp=run.cpu_temp,
        gpu_temp=run.gpu_temp,
        mid_cpu_temp=mid_cpu,
        mid_gpu_temp=mid_gpu,
        peak_cpu_temp=run.peak_cpu,
        peak_gpu_temp=run.peak_gpu,
        ambient_c=state.ambient_temp,
        action_a=action_a,
        action_b=action_b,
        throttle_events=run.throttle_events,
        cpu_busy_ms=run.cpu_busy,
        gpu_busy_ms=run.gpu_busy,
        cpu_wait_ms=model.host_sync_share * run.gpu_busy,
        observations=(obs_a, obs_b),
        samples=run.samples,
    )
    return trace, run.state(budget_ms - elapsed)


class SimulatedDevice:
    """
    A device instance driven frame by frame.

    Owns the evolving state, the workload source and the noise stream;
    ambient temperature, workload and budget may change between frames.
    """

    def __init__(self, model, workload_source, budget_ms, ambient_c=25.0,
                 rng=None, overhead=NO_OVERHEAD):
        self.model = model
        self.workloads = workload_source
        self.budget_ms = budget_ms
        self.rng = rng
        self.overhead = overhead
        self.state = initial_state(model, ambient_c, budget_ms)
        self.last_trace: Optional[FrameTrace] = None

    @property
    def table(self):
        return self.model.table

    def set_ambient(self, ambient_c):
        self.state = replace(self.state, ambient_temp=ambient_c)

    def utilization(self):
        if self.last_trace is None:
            return 1.0, 1.0
        return self.last_trace.utilization

    def step(self, supplier):
        workload = self.workloads.next()
        trace, self.state = run_frame(
            self.state, workload, supplier, self.model, self.budget_ms,
            rng=self.rng, overhead=self.overhead,
        )
        self.last_trace = trace
        return trace


def steady_state_temp(ambient_c, power_w, params):
    """Decoupled RC equilibrium, T_amb + P*R."""
    return ambient_c + power_w * params.resistance_to_ambient
