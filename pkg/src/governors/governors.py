"""
Frequency governors compared by the bench.

- fixed: a constant level pair.
- ondemand: utilization-driven stand-in for the kernel default governors.
- ztt: single-decision DQN with a fixed-probability cool-down action.
- sds: the two-decision slimmable agent, acting greedily.

Every governor answers `act(observation, utilization)` at both decision
points; single-decision governors repeat their frame-start choice.
"""

from abc import ABC, abstractmethod

from agent.agent import SdsAgent
from core.model import Action, Parity, Stage, Transition
from qnet.slimmable import SlimmableMlp, Width

GOVERNOR_NAMES = ("fixed", "ondemand", "ztt", "sds")


class GovernorPolicy(ABC):
    name = "governor"
    acts_twice = False
    # learned governors run outside the kernel and pay protocol overhead
    remote = False

    def __init__(self, table):
        self.table = table
        self._last = None

    def act(self, obs, utilization=None):
        if obs.stage is Stage.AFTER_RPN and not self.acts_twice and self._last is not None:
            return self._last
        action = self.decide(obs, utilization).check(self.table)
        self._last = action
        return action

    @abstractmethod
    def decide(self, obs, utilization):
        """Choose levels for the upcoming stage."""

    def exploration(self):
        return 0.0, 0.0


class FixedGovernor(GovernorPolicy):
    name = "fixed"

    def __init__(self, table, levels=None):
        super().__init__(table)
        self.levels = (levels or table.max_action()).check(table)

    def decide(self, obs, utilization):
        return self.levels


class OndemandGovernor(GovernorPolicy):
    """
    Per processor: busy fraction above up_threshold jumps to the top level,
    otherwise step down by down_step (floor 0). Acts at frame start only.
    """

    name = "ondemand"

    def __init__(self, table, up_threshold=0.8, down_step=1):
        super().__init__(table)
        if not 0 < up_threshold <= 1:
            raise ValueError("up_threshold must lie in (0, 1]")
        self.up_threshold = up_threshold
        self.down_step = down_step

    def _level(self, current, u, top):
        if u > self.up_threshold:
            return top
        return max(0, current - self.down_step)

    def decide(self, obs, utilization):
        u_cpu, u_gpu = utilization if utilization is not None else (1.0, 1.0)
        return Action(
            self._level(obs.cpu_level, u_cpu, self.table.m - 1),
            self._level(obs.gpu_level, u_gpu, self.table.n - 1),
        )


class SdsGovernor(GovernorPolicy):
    name = "sds"
    acts_twice = True
    remote = True

    def __init__(self, agent):
        super().__init__(agent.table)
        self.agent = agent

    def decide(self, obs, utilization):
        return self.agent.act(obs, explore=False)

    def exploration(self):
        return 0.0, self.agent.eps_t()


# -------------------------------
# zTT Baseline
# -------------------------------

class ZttAgent(SdsAgent):
    """
    One decision per frame at frame start, 6-feature input only.

    Realized as a slimmable network with alpha = 1.0 that is only ever run
    at its narrow width. The cool-down probability never decays.
    """

    variant = "ztt"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._last_action = None

    def _build_net(self, seed):
        return SlimmableMlp(self.table.size, hidden=self.cfg.hidden, width_alpha=1.0, seed=seed)

    def width(self, stage):
        return Width.NARROW

    def act(self, obs, explore=True):
        if obs.stage is Stage.AFTER_RPN and self._last_action is not None:
            return self._last_action
        self._last_action = super().act(obs, explore)
        return self._last_action

    def _cooldown_eps(self):
        return self.expl.eps_t_init

    def eps_t(self):
        return self.expl.eps_t_init

    def record_frame(self, s0, a0, r0, s1, a1, r1, s2):
        # frame-level transition rewarded with the end-of-frame reward
        self.buffers.push(Transition(s0, a0, r1, s2, Parity.EVEN))

    def learn(self):
        if self.iterations >= self.cfg.iterations:
            return 0
        return int(self.train_step(Parity.EVEN) is not None)


class ZttGovernor(SdsGovernor):
    name = "ztt"
    acts_twice = False


# -------------------------------
# Construction
# -------------------------------

def fixed_governor(table, levels=None):
    return FixedGovernor(table, levels)


def ondemand_governor(table, up_threshold=0.8, down_step=1):
    return OndemandGovernor(table, up_threshold, down_step)


def sds_governor(checkpoint, table, constraint, thermal, seed=0):
    return SdsGovernor(SdsAgent.from_checkpoint(checkpoint, table, constraint, thermal, seed))


def ztt_governor(checkpoint, table, constraint, thermal, seed=0):
    return ZttGovernor(ZttAgent.from_checkpoint(checkpoint, table, constraint, thermal, seed))


def build_governor(name, table, constraint, thermal, checkpoint=None, config=None,
                   levels=None, seed=0):
    if name == "fixed":
        return fixed_governor(table, levels)
    if name == "ondemand":
        od = (config or {}).get("ondemand", {})
        return ondemand_governor(table, od.get("up_threshold", 0.8), od.get("down_step", 1))
    if name in ("sds", "ztt"):
        if checkpoint is None:
            raise ValueError(f"governor '{name}' needs a checkpoint")
        factory = sds_governor if name == "sds" else ztt_governor
        return factory(checkpoint, table, constraint, thermal, seed)
    raise ValueError(f"Unknown governor: {name} (expected one of {', '.join(GOVERNOR_NAMES)})")


def build_agent(variant, table, constraint, thermal, cfg, expl, seed=0):
    cls = ZttAgent if variant == "ztt" else SdsAgent
    if variant not in ("sds", "ztt"):
        raise ValueError(f"Cannot train governor '{variant}'")
    return cls(table, constraint, thermal, cfg=cfg, expl=expl, seed=seed)
