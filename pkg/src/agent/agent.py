"""
Deep-Q frequency agent.

Two decisions per frame share one slimmable Q-network: the frame-start
decision runs the narrow width (no proposal count), the post-RPN decision
the full width. Transitions of each kind go to their own replay buffer and
train their own width.
"""

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from core.model import (
    Action,
    Parity,
    Transition,
    action_to_index,
    index_to_action,
    normalize_observation,
)
from qnet.slimmable import (
    AdamState,
    SlimmableMlp,
    Width,
    adam_step,
    backward,
    forward,
    hard_update,
    load_checkpoint,
    save_checkpoint,
    width_for,
)

logger = logging.getLogger("AGENT")


# -------------------------------
# Configuration
# -------------------------------

@dataclass(frozen=True)
class ExplorationConfig:
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 5000
    eps_t_init: float = 1.0
    cooldown_horizon: int = 200

    def __post_init__(self):
        if not 0 <= self.eps_end <= self.eps_start <= 1:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if not 0 <= self.eps_t_init <= 1:
            raise ValueError("eps_t_init must lie in [0, 1]")
        if self.eps_decay_steps < 1 or self.cooldown_horizon < 1:
            raise ValueError("decay horizons must be positive")

    def eps(self, step):
        frac = min(step, self.eps_decay_steps) / self.eps_decay_steps
        return self.eps_start - (self.eps_start - self.eps_end) * frac

    def eps_t(self, triggers):
        k = min(triggers, self.cooldown_horizon)
        if k == self.cooldown_horizon:
            return 0.0
        return self.eps_t_init * math.cos(0.5 * math.pi * k / self.cooldown_horizon)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class AgentConfig:
    iterations: int = 10000
    batch_size: int = 64
    warmup: int = 500
    buffer_capacity: int = 10000
    gamma: float = 0.9
    target_update: int = 200
    p_max: int = 1000
    hidden: int = 128
    width_alpha: float = 0.75
    base_lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99

    @classmethod
    def from_config(cls, config):
        agent, qnet = config["agent"], config["qnet"]
        return cls(
            iterations=agent["iterations"],
            batch_size=agent["batch_size"],
            warmup=agent["warmup"],
            buffer_capacity=agent["buffer_capacity"],
            gamma=agent["gamma"],
            target_update=agent["target_update"],
            p_max=agent["p_max"],
            hidden=qnet["hidden"],
            width_alpha=qnet["width_alpha"],
            base_lr=qnet["base_lr"],
            beta1=qnet["beta1"],
            beta2=qnet["beta2"],
        )


# -------------------------------
# Replay Buffers
# -------------------------------

class DualReplayBuffer:
    """Parity-separated FIFO stores; the oldest transition is evicted first."""

    def __init__(self, capacity=10000):
        self.capacity = capacity
        self.even = deque(maxlen=capacity)
        self.odd = deque(maxlen=capacity)

    def buffer(self, parity):
        return self.even if parity is Parity.EVEN else self.odd

    def push(self, transition):
        self.buffer(transition.parity).append(transition)

    def sample(self, parity, batch_size, rng):
        store = self.buffer(parity)
        idx = rng.choice(len(store), size=batch_size, replace=False)
        return [store[i] for i in idx]

    def sizes(self):
        return len(self.even), len(self.odd)


def push_frame(buffers, s0, a0, r0, s1, a1, r1, s2):
    """Store both half-step transitions of one frame."""
    buffers.push(Transition(s0, a0, r0, s1, Parity.EVEN))
    buffers.push(Transition(s1, a1, r1, s2, Parity.ODD))


# -------------------------------
# Action Selection
# -------------------------------

def cooldown_candidates(current):
    """Pairs not above the current levels, excluding the current pair when possible."""
    pairs = [
        Action(c, g)
        for c in range(current.cpu_level + 1)
        for g in range(current.gpu_level + 1)
    ]
    lower = [a for a in pairs if a != current]
    return lower or pairs


def select_action(q_values, obs, table, thermal, expl, rng, cooldown_counter, eps, eps_t=None):
    """
    Cool-down aware epsilon-greedy choice.

    Returns (action, cooldown_counter). When overheated, a random pair not
    above the current levels is taken with probability eps_t and the
    counter advances; otherwise plain epsilon-greedy over q_values.
    """
    if eps_t is None:
        eps_t = expl.eps_t(cooldown_counter)

    if thermal.overheated(obs.cpu_temp, obs.gpu_temp) and eps_t > 0:
        if rng.random() < eps_t:
            candidates = cooldown_candidates(obs.levels)
            choice = candidates[int(rng.integers(len(candidates)))]
            return choice, cooldown_counter + 1

    if eps > 0 and rng.random() < eps:
        return index_to_action(int(rng.integers(table.size)), table), cooldown_counter
    return index_to_action(int(np.argmax(q_values)), table), cooldown_counter


# -------------------------------
# The Agent
# -------------------------------

class SdsAgent:
    """Two-decision slimmable DQN agent."""

    variant = "sds"

    def __init__(self, table, constraint, thermal, cfg=None, expl=None, seed=0, rng=None):
        self.table = table
        self.constraint = constraint
        self.thermal = thermal
        self.cfg = cfg or AgentConfig()
        self.expl = expl or ExplorationConfig()
        self.rng = rng if rng is not None else np.random.default_rng(seed)

        self.online = self._build_net(seed)
        self.target = self.online.copy()
        self.opt = AdamState.for_net(
            self.online,
            beta1=self.cfg.beta1,
            beta2=self.cfg.beta2,
            base_lr=self.cfg.base_lr,
            total_steps=self.cfg.iterations,
        )
        self.buffers = DualReplayBuffer(self.cfg.buffer_capacity)
        self.decisions = 0
        self.cooldown_counter = 0
        self.iterations = 0

    def _build_net(self, seed):
        return SlimmableMlp(
            self.table.size, hidden=self.cfg.hidden, width_alpha=self.cfg.width_alpha, seed=seed
        )

    # --- acting ---

    def width(self, stage):
        return width_for(stage)

    def featurize(self, obs):
        return normalize_observation(obs, self.table, self.constraint, self.cfg.p_max)

    def q_values(self, obs, net=None):
        return forward(net or self.online, self.featurize(obs), self.width(obs.stage))

    def eps(self):
        return self.expl.eps(self.decisions)

    def eps_t(self):
        return self.expl.eps_t(self.cooldown_counter)

    def act(self, obs, explore=True):
        eps = self.eps() if explore else 0.0
        action, self.cooldown_counter = select_action(
            self.q_values(obs), obs, self.table, self.thermal, self.expl,
            self.rng, self.cooldown_counter, eps, self._cooldown_eps(),
        )
        if explore:
            self.decisions += 1
        return action

    def _cooldown_eps(self):
        return self.eps_t()

    # --- learning ---

    def record_frame(self, s0, a0, r0, s1, a1, r1, s2):
        push_frame(self.buffers, s0, a0, r0, s1, a1, r1, s2)

    def learn(self):
        """One train step per pushed transition: even first, then odd."""
        steps = 0
        for parity in (Parity.EVEN, Parity.ODD):
            if self.iterations >= self.cfg.iterations:
                break
            steps += int(self.train_step(parity) is not None)
        return steps

    def td_targets(self, batch):
        rewards = np.array([t.reward for t in batch], dtype=np.float64)
        if self.cfg.gamma == 0:
            return rewards
        boot = np.empty(len(batch), dtype=np.float64)
        for width in (Width.NARROW, Width.FULL):
            sel = [i for i, t in enumerate(batch) if self.width(t.next_state.stage) is width]
            if not sel:
                continue
            feats = np.stack([self.featurize(batch[i].next_state) for i in sel])
            boot[sel] = forward(self.target, feats, width).max(axis=1)
        return rewards + self.cfg.gamma * boot

    def fit_batch(self, batch, width):
        """One Adam step on a fixed batch; returns the TD loss before the step."""
        feats = np.stack([self.featurize(t.state) for t in batch])
        actions = [action_to_index(t.action, self.table) for t in batch]
        targets = self.td_targets(batch)
        grads, loss = backward(self.online, feats, actions, targets, width)
        adam_step(self.online, grads, self.opt, mask=self.online.mask(width))

        self.iterations += 1
        if self.iterations % self.cfg.target_update == 0:
            hard_update(self.target, self.online)
        return loss

    def train_step(self, parity):
        """Sample the parity's buffer and train its width; None below warmup."""
        store = self.buffers.buffer(parity)
        if len(store) < max(self.cfg.warmup, self.cfg.batch_size):
            return None
        batch = self.buffers.sample(parity, self.cfg.batch_size, self.rng)
        width = Width.NARROW if parity is Parity.EVEN else Width.FULL
        return self.fit_batch(batch, width)

    # --- persistence ---

    def meta(self):
        return {
            "variant": self.variant,
            "cpu_levels": list(self.table.cpu_levels),
            "gpu_levels": list(self.table.gpu_levels),
            "budget_ms": self.constraint.budget_ms,
            "thermal": asdict(self.thermal),
            "agent": asdict(self.cfg),
            "exploration": asdict(self.expl),
            "decisions": self.decisions,
            "cooldown_counter": self.cooldown_counter,
            "iterations": self.iterations,
        }

    def save(self, path):
        save_checkpoint(path, self.online, self.opt, self.meta())
        logger.info("Checkpoint written: %s (iterations=%d)", path, self.iterations)

    @classmethod
    def from_checkpoint(cls, path, table, constraint, thermal, seed=0):
        net, opt, meta = load_checkpoint(path)
        variant = meta.get("variant")
        if variant != cls.variant:
            raise ValueError(f"checkpoint {path} holds a '{variant}' agent, not '{cls.variant}'")
        if net.n_actions != table.size:
            raise ValueError(
                f"checkpoint has {net.n_actions} actions, table has {table.size}"
            )
        agent = cls(
            table, constraint, thermal,
            cfg=AgentConfig(**meta["agent"]),
            expl=ExplorationConfig(**meta["exploration"]),
            seed=seed,
        )
        agent.online = net
        agent.target = net.copy()
        if opt is not None:
            agent.opt = opt
        agent.decisions = meta.get("decisions", 0)
        agent.cooldown_counter = meta.get("cooldown_counter", 0)
        agent.iterations = meta.get("iterations", 0)
        return agent


def td_target(transition, target_net, gamma, featurize):
    """r + gamma * max_a Q_target(s'), at the width of the next state's stage."""
    if gamma == 0:
        return float(transition.reward)
    nxt = transition.next_state
    q = forward(target_net, featurize(nxt), width_for(nxt.stage))
    return float(transition.reward + gamma * np.max(q))
