"""
Slimmable Q-network.

One 4-layer MLP (7 -> h -> h -> h -> actions) evaluated at two widths:

- FULL: every parameter, all 7 input features.
- NARROW: the first alpha*h hidden units of every layer and the first 6
  input features (no proposal count). The output layer keeps all actions.

Narrow evaluation multiplies each parameter by a 0/1 mask instead of
slicing, so NARROW and a FULL pass over a zeroed copy run the same
arithmetic. Gradients are masked the same way and Adam only moves
entries active at the trained width.
"""

import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.model import FEATURE_COUNT, Stage

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")
NARROW_FEATURES = FEATURE_COUNT - 1


class Width(Enum):
    NARROW = "narrow"
    FULL = "full"


def width_for(stage):
    return Width.NARROW if stage is Stage.FRAME_START else Width.FULL


class SlimmableMlp:
    def __init__(self, n_actions, hidden=128, width_alpha=0.75, seed=0,
                 in_features=FEATURE_COUNT):
        narrow = hidden * width_alpha
        if abs(narrow - round(narrow)) > 1e-9 or round(narrow) < 1:
            raise ValueError(f"width_alpha*hidden must be a positive integer, got {narrow}")
        self.n_actions = int(n_actions)
        self.hidden = int(hidden)
        self.width_alpha = float(width_alpha)
        self.in_features = int(in_features)
        self.narrow_hidden = int(round(narrow))
        self.params = self._init_params(np.random.default_rng(seed))
        self._narrow_mask = self._build_narrow_mask()

    def _init_params(self, rng):
        # kaiming-uniform with a=sqrt(5): weights and biases in +-1/sqrt(fan_in)
        shapes = [
            (self.hidden, self.in_features),
            (self.hidden, self.hidden),
            (self.hidden, self.hidden),
            (self.n_actions, self.hidden),
        ]
        params = {}
        for i, (fan_out, fan_in) in enumerate(shapes, start=1):
            bound = 1.0 / math.sqrt(fan_in)
            params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            params[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)
        return params

    def _build_narrow_mask(self):
        h = self.narrow_hidden
        mask = {name: np.zeros_like(p) for name, p in self.params.items()}
        mask["W1"][:h, :NARROW_FEATURES] = 1.0
        mask["b1"][:h] = 1.0
        for i in (2, 3):
            mask[f"W{i}"][:h, :h] = 1.0
            mask[f"b{i}"][:h] = 1.0
        mask["W4"][:, :h] = 1.0
        mask["b4"][:] = 1.0
        return mask

    def mask(self, width):
        """0/1 mask of active entries; None means everything is active."""
        return self._narrow_mask if width is Width.NARROW else None

    def effective_params(self, width):
        if width is Width.FULL:
            return self.params
        return {k: p * self._narrow_mask[k] for k, p in self.params.items()}

    def param_count(self):
        return int(sum(p.size for p in self.params.values()))

    def copy(self):
        clone = SlimmableMlp.__new__(SlimmableMlp)
        clone.__dict__.update(self.__dict__)
        clone.params = {k: p.copy() for k, p in self.params.items()}
        return clone

    def spec(self):
        return {
            "n_actions": self.n_actions,
            "hidden": self.hidden,
            "width_alpha": self.width_alpha,
            "in_features": self.in_features,
        }


# -------------------------------
# Forward / Backward
# -------------------------------

def _relu(z):
    return np.maximum(z, 0.0)


def _forward(net, x, width):
    p = net.effective_params(width)
    z1 = x @ p["W1"].T + p["b1"]
    h1 = _relu(z1)
    z2 = h1 @ p["W2"].T + p["b2"]
    h2 = _relu(z2)
    z3 = h2 @ p["W3"].T + p["b3"]
    h3 = _relu(z3)
    q = h3 @ p["W4"].T + p["b4"]
    return q, (p, x, z1, h1, z2, h2, z3, h3)


def forward(net, features, width):
    """Q-values for one feature vector (or a batch of them)."""
    x = np.asarray(features, dtype=np.float64)
    q, _ = _forward(net, np.atleast_2d(x), width)
    return q[0] if x.ndim == 1 else q


def td_loss(net, features, actions, targets, width):
    q = forward(net, np.atleast_2d(features), width)
    idx = np.arange(len(actions))
    diff = q[idx, np.asarray(actions)] - np.asarray(targets, dtype=np.float64)
    return float(np.mean(diff ** 2))


def backward(net, features, actions, targets, width):
    """
    Gradients of the mean squared TD error on the taken actions.

    Returns (grads, loss). Entries inactive at `width` get exactly zero.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("backward needs a non-empty batch")

    q, (p, x, z1, h1, z2, h2, z3, h3) = _forward(net, x, width)
    batch = len(x)
    idx = np.arange(batch)
    diff = q[idx, actions] - targets
    loss = float(np.mean(diff ** 2))

    dq = np.zeros_like(q)
    dq[idx, actions] = 2.0 * diff / batch

    grads = {"W4": dq.T @ h3, "b4": dq.sum(axis=0)}
    dz3 = (dq @ p["W4"]) * (z3 > 0)
    grads["W3"] = dz3.T @ h2
    grads["b3"] = dz3.sum(axis=0)
    dz2 = (dz3 @ p["W3"]) * (z2 > 0)
    grads["W2"] = dz2.T @ h1
    grads["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ p["W2"]) * (z1 > 0)
    grads["W1"] = dz1.T @ x
    grads["b1"] = dz1.sum(axis=0)

    mask = net.mask(width)
    if mask is not None:
        grads = {k: g * mask[k] for k, g in grads.items()}
    return grads, loss


# -------------------------------
# Optimizer
# -------------------------------

@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.99
    base_lr: float = 0.01
    total_steps: int = 10000
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net, **kwargs):
        return cls(
            m={k: np.zeros_like(p) for k, p in net.params.items()},
            v={k: np.zeros_like(p) for k, p in net.params.items()},
            **kwargs,
        )

    def lr(self, t=None):
        t = self.step if t is None else t
        if self.total_steps <= 0:
            return self.base_lr
        t = min(t, self.total_steps)
        return self.base_lr * 0.5 * (1.0 + math.cos(math.pi * t / self.total_steps))


def adam_step(net, grads, opt, mask=None):
    """Bias-corrected Adam with cosine-decayed rate; masked entries stay put."""
    lr = opt.lr()
    opt.step += 1
    t = opt.step
    c1 = 1.0 - opt.beta1 ** t
    c2 = 1.0 - opt.beta2 ** t

    for name, g in grads.items():
        m = opt.beta1 * opt.m[name] + (1.0 - opt.beta1) * g
        v = opt.beta2 * opt.v[name] + (1.0 - opt.beta2) * g * g
        delta = lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
        if mask is None:
            opt.m[name], opt.v[name] = m, v
            net.params[name] = net.params[name] - delta
        else:
            active = mask[name] > 0
            opt.m[name] = np.where(active, m, opt.m[name])
            opt.v[name] = np.where(active, v, opt.v[name])
            net.params[name] = np.where(active, net.params[name] - delta, net.params[name])
    return net


def hard_update(target, online):
    target.params = {k: p.copy() for k, p in online.params.items()}
    return target


def checksum(params, mask=None, keep=None):
    """Sum of |parameter| over the selected entries; keep(mask) picks them."""
    total = 0.0
    for name, p in params.items():
        if mask is None:
            total += float(np.abs(p).sum())
        else:
            sel = keep(mask[name])
            total += float(np.abs(p[sel]).sum())
    return total


# -------------------------------
# Checkpoints
# -------------------------------

def save_checkpoint(path, net, opt=None, meta=None):
    """Write parameters, optimizer state and metadata atomically (.npz)."""
    arrays = {f"param/{k}": p for k, p in net.params.items()}
    header = {"net": net.spec(), "meta": meta or {}}
    if opt is not None:
        arrays.update({f"adam_m/{k}": a for k, a in opt.m.items()})
        arrays.update({f"adam_v/{k}": a for k, a in opt.v.items()})
        header["adam"] = {
            "step": opt.step,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "base_lr": opt.base_lr,
            "total_steps": opt.total_steps,
            "eps": opt.eps,
        }
    arrays["header"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)

    buf = io.BytesIO()
    np.savez(buf, **arrays)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Returns (net, opt or None, meta)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode("utf-8"))
        net = SlimmableMlp(**header["net"])
        net.params = {k: data[f"param/{k}"].copy() for k in PARAM_NAMES}
        opt = None
        if "adam" in header:
            opt = AdamState(
                m={k: data[f"adam_m/{k}"].copy() for k in PARAM_NAMES},
                v={k: data[f"adam_v/{k}"].copy() for k in PARAM_NAMES},
                **header["adam"],
            )
    return net, opt, header["meta"]
