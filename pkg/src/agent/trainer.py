"""
Training loop for the frequency agents.

The Trainer is driven by two callbacks so the same loop serves a local
simulator and a remote device session:

- decide(observation) -> Action, called twice per frame;
- frame_done(result), called once the frame's latency is known.

A frame's transitions are pushed (and the network trained) when the next
frame-start observation arrives, since that observation closes the odd
transition.
"""

import csv
import logging
from collections import deque

from core.model import Stage

logger = logging.getLogger("TRAIN")

FRAME_LOG_HEADER = [
    "frame", "stage1_ms", "stage2_ms", "total_ms", "proposals",
    "cpu_temp", "gpu_temp",
    "cpu_level_a", "gpu_level_a", "cpu_level_b", "gpu_level_b",
    "reward_even", "reward_odd", "eps", "eps_t",
]
PROGRESS_EVERY = 500


class FrameLog:
    """Per-frame CSV writer with fixed float formatting (byte-stable output)."""

    def __init__(self, path, extra_columns=()):
        self.path = path
        self.columns = FRAME_LOG_HEADER + list(extra_columns)
        self._file = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(self.columns)

    def write(self, row):
        self._writer.writerow([_fmt(row[c]) for c in self.columns])

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.4f}"
    return value


def frame_row(frame, result, action_a, action_b, rewards, eps=0.0, eps_t=0.0):
    return {
        "frame": frame,
        "stage1_ms": float(result.stage1_ms),
        "stage2_ms": float(result.stage2_ms),
        "total_ms": float(result.total_ms),
        "proposals": int(result.proposals),
        "cpu_temp": float(result.cpu_temp),
        "gpu_temp": float(result.gpu_temp),
        "cpu_level_a": action_a.cpu_level,
        "gpu_level_a": action_a.gpu_level,
        "cpu_level_b": action_b.cpu_level,
        "gpu_level_b": action_b.gpu_level,
        "reward_even": float(rewards[0]),
        "reward_odd": float(rewards[1]),
        "eps": float(eps),
        "eps_t": float(eps_t),
    }


class Trainer:
    """
    Couples an agent to a device through decide / frame_done.

    Only the last PROGRESS_EVERY rows are held unless keep_rows is set;
    a served session may run indefinitely.
    """

    def __init__(self, agent, rewarder, iterations=None, max_frames=None, log=None,
                 keep_rows=False):
        self.agent = agent
        self.rewarder = rewarder
        self.iterations = agent.cfg.iterations if iterations is None else iterations
        self.max_frames = max_frames
        self.log = log
        self.frames = 0
        self.recent = deque(maxlen=PROGRESS_EVERY)
        self.rows = [] if keep_rows else None
        self._current = {}
        self._pending = None

    @property
    def done(self):
        if self.agent.iterations >= self.iterations:
            return True
        return self.max_frames is not None and self.frames >= self.max_frames

    def decide(self, obs):
        if obs.stage is Stage.FRAME_START:
            self._close_pending(obs)
            self._current = {"s0": obs, "a0": self.agent.act(obs)}
            return self._current["a0"]
        self._current["s1"] = obs
        self._current["a1"] = self.agent.act(obs)
        return self._current["a1"]

    def frame_done(self, result):
        cur = self._current
        if "a1" not in cur:
            raise RuntimeError("frame_done before both decisions of the frame")
        rewards = self.rewarder.score(result, (cur["s1"].cpu_temp, cur["s1"].gpu_temp))
        self._pending = (cur["s0"], cur["a0"], rewards[0], cur["s1"], cur["a1"], rewards[1])
        self._current = {}

        row = frame_row(self.frames, result, cur["a0"], cur["a1"], rewards,
                        self.agent.eps(), self.agent.eps_t())
        self.recent.append(row)
        if self.rows is not None:
            self.rows.append(row)
        if self.log is not None:
            self.log.write(row)

        self.frames += 1
        if self.frames % PROGRESS_EVERY == 0:
            mean_r = sum(r["reward_even"] + r["reward_odd"] for r in self.recent) / len(self.recent)
            logger.info(
                "frame %d iterations %d eps %.3f eps_t %.3f mean reward %.3f",
                self.frames, self.agent.iterations, self.agent.eps(),
                self.agent.eps_t(), mean_r,
            )
        return row

    def _close_pending(self, next_obs):
        if self._pending is None:
            return
        s0, a0, r0, s1, a1, r1 = self._pending
        self._pending = None
        self.agent.record_frame(s0, a0, r0, s1, a1, r1, next_obs)
        self.agent.learn()


def train(agent, device, rewarder, max_frames=None, log=None, keep_rows=True):
    """Run frames on a local device until the iteration (or frame) budget is met."""
    trainer = Trainer(agent, rewarder, max_frames=max_frames, log=log, keep_rows=keep_rows)
    logger.info(
        "Training %s: %d iterations on %s", agent.variant, trainer.iterations,
        getattr(device, "name", "device"),
    )
    while not trainer.done:
        trace = device.step(trainer.decide)
        trainer.frame_done(trace.result)
    logger.info("Training finished after %d frames, %d iterations",
                trainer.frames, agent.iterations)
    return trainer
