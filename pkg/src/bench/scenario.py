"""
Scripted evaluation scenarios.

A scenario is a list of events keyed by frame index. Each event changes
one thing right before that frame runs: the ambient temperature, the
workload profile, or the latency budget.

File format:
    {"name": "...", "events": [{"frame": 1000, "ambient_c": 0.0}, ...]}
"""

import json
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

from workload.workload import get_profile

EVENT_KINDS = ("ambient_c", "workload", "budget_ms")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioEvent:
    frame: int
    ambient_c: Optional[float] = None
    workload: Optional[str] = None
    budget_ms: Optional[float] = None

    def __post_init__(self):
        if self.frame < 0:
            raise ScenarioError("event frame must be non-negative")
        if sum(getattr(self, k) is not None for k in EVENT_KINDS) != 1:
            raise ScenarioError(f"event at frame {self.frame} must set exactly one of "
                                f"{', '.join(EVENT_KINDS)}")
        if self.workload is not None:
            get_profile(self.workload)
        if self.budget_ms is not None and not self.budget_ms > 0:
            raise ScenarioError("budget_ms must be positive")


@dataclass(frozen=True)
class Scenario:
    name: str
    events: Tuple[ScenarioEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        frames = [e.frame for e in self.events]
        if frames != sorted(frames):
            raise ScenarioError(f"scenario {self.name}: events must be sorted by frame")

    def events_at(self, frame):
        return [e for e in self.events if e.frame == frame]

    def initial_ambient(self, default_c):
        for e in self.events_at(0):
            if e.ambient_c is not None:
                return e.ambient_c
        return default_c


def scenario_from_dict(doc, name="custom"):
    if not isinstance(doc, dict) or not isinstance(doc.get("events"), list):
        raise ScenarioError("scenario document needs an 'events' list")
    events = []
    for raw in doc["events"]:
        unknown = set(raw) - {"frame", *EVENT_KINDS}
        if unknown or "frame" not in raw:
            raise ScenarioError(f"malformed scenario event: {raw!r}")
        try:
            events.append(ScenarioEvent(**raw))
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"malformed scenario event {raw!r}: {e}") from None
    return Scenario(doc.get("name", name), tuple(events))


def builtin_scenarios(budgets=None):
    budgets = budgets or {"visdrone-like": 650.0}
    return {
        "static": Scenario("static"),
        "warm-cold": Scenario("warm-cold", (
            ScenarioEvent(1000, ambient_c=0.0),
            ScenarioEvent(2000, ambient_c=25.0),
        )),
        "domain-change": Scenario("domain-change", (
            ScenarioEvent(1500, workload="visdrone-like"),
            ScenarioEvent(1500, budget_ms=budgets["visdrone-like"]),
        )),
    }


def load_scenario(name_or_path=None, budgets=None):
    """Built-in name, JSON path, or None for the static scenario."""
    builtins = builtin_scenarios(budgets)
    if name_or_path is None:
        return builtins["static"]
    if name_or_path in builtins:
        return builtins[name_or_path]
    if not os.path.exists(name_or_path):
        raise ScenarioError(f"Unknown scenario: {name_or_path}")
    with open(name_or_path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"scenario {name_or_path} is not JSON: {e}") from None
    base = os.path.splitext(os.path.basename(name_or_path))[0]
    return scenario_from_dict(doc, base)
