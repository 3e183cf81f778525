"""Termination policies for early-exit inference on sample streams.

The temporal policies (Difference Detection, Temporal Patience) group
consecutive samples into scenes. A scene starts with a full evaluation whose
label comes from a majority vote over all exits (or the final classifier);
later samples are compared with the scene's reference output at a single
exit and reuse the scene's result while they stay close enough.

The baselines (confidence, patience, a-priori and just-in-time budget, input
filtering) are included for comparison.

Every step function reads exits through an execution context (see
:mod:`temporal_ee.model`) so only the exits it asks for are computed, and
charges the cumulative cost of the deepest exit it touched.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .model import ExecutionContext, ExitReading
from .tensor import softmax

LABELING_MODES = ("majority_vote", "final_classifier")
CONFIDENCE_METRICS = ("max_prob", "score_margin", "entropy")
BUDGET_MODES = ("a_priori", "just_in_time")


def euclidean(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"score vectors differ in length: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


DISTANCES: dict[str, Callable[[np.ndarray, np.ndarray], float]] = {"euclidean": euclidean}


@dataclass(frozen=True)
class PolicyConfig:
    threshold: float = 0.0
    labeling_mode: str = "majority_vote"
    distance: str = "euclidean"
    confidence_metric: str = "max_prob"
    patience_window: int = 2
    budget: int | None = None

    def __post_init__(self):
        if not self.threshold >= 0:
            raise ConfigError(f"threshold must be >= 0, got {self.threshold}")
        if self.labeling_mode not in LABELING_MODES:
            raise ConfigError(f"labeling_mode must be one of {LABELING_MODES}")
        if self.distance not in DISTANCES:
            raise ConfigError(f"distance must be one of {tuple(DISTANCES)}")
        if self.confidence_metric not in CONFIDENCE_METRICS:
            raise ConfigError(f"confidence_metric must be one of {CONFIDENCE_METRICS}")
        if self.patience_window < 2:
            raise ConfigError("patience_window must be >= 2")

    def snapshot(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SceneState:
    reference_scores: np.ndarray
    selected_exit: int
    scene_label: int
    scene_id: int
    samples_in_scene: int = 1


@dataclass(frozen=True)
class Decision:
    """Outcome for one sample.

    ``terminated_at`` is the deepest executed exit, or None when the
    previous output was reused without running the network.
    """

    label: int
    terminated_at: int | None
    macs_spent: int
    new_scene: bool = False

    @property
    def reused(self) -> bool:
        return self.terminated_at is None


def change(current, reference, distance: str = "euclidean") -> float:
    return DISTANCES[distance](current, reference)


def argmax(scores) -> int:
    return int(np.argmax(scores))


def majority_vote(scores: Sequence) -> int:
    """Class predicted by most exits.

    Every exit, the final classifier included, has one vote. A tie goes to
    whichever tied class the deepest exit predicted, so a two-exit vote
    always equals the final classifier's label.
    """
    if len(scores) == 0:
        raise ValueError("majority vote over zero readings")
    labels = [argmax(_scores(s)) for s in scores]
    counts = np.bincount(labels)
    tied = set(np.flatnonzero(counts == counts.max()).tolist())
    return next(label for label in reversed(labels) if label in tied)


def _scores(item) -> np.ndarray:
    return item.scores if isinstance(item, ExitReading) else np.asarray(item)


def scene_label(readings: Sequence, labeling_mode: str) -> int:
    if labeling_mode == "final_classifier":
        return argmax(_scores(readings[-1]))
    return majority_vote(readings)


def select_exit(readings: Sequence, vote_label: int) -> int:
    """Shallowest exit whose prediction agrees with ``vote_label`` (final exit if none)."""
    for i, r in enumerate(readings):
        if argmax(_scores(r)) == vote_label:
            return i
    return len(readings) - 1


def _next_id(state: SceneState | None) -> int:
    return 0 if state is None else state.scene_id + 1


def _continue(state: SceneState) -> SceneState:
    return replace(state, samples_in_scene=state.samples_in_scene + 1)


def difference_detection_step(
    state: SceneState | None, ctx: ExecutionContext, config: PolicyConfig
) -> tuple[Decision, SceneState]:
    first = ctx.reading(0)
    if state is not None and change(first.scores, state.reference_scores, config.distance) < config.threshold:
        return Decision(state.scene_label, ctx.deepest, ctx.macs_spent), _continue(state)
    readings = ctx.readings()
    label = scene_label(readings, config.labeling_mode)
    new_state = SceneState(first.scores, 0, label, _next_id(state))
    return Decision(label, ctx.deepest, ctx.macs_spent, new_scene=True), new_state


def temporal_patience_step(
    state: SceneState | None, ctx: ExecutionContext, config: PolicyConfig
) -> tuple[Decision, SceneState]:
    if state is not None:
        current = ctx.reading(state.selected_exit)
        close = change(current.scores, state.reference_scores, config.distance) < config.threshold
        if close and current.label == argmax(state.reference_scores):
            return Decision(current.label, ctx.deepest, ctx.macs_spent), _continue(state)
    readings = ctx.readings()
    label = scene_label(readings, config.labeling_mode)
    selected = select_exit(readings, label)
    new_state = SceneState(readings[selected].scores, selected, label, _next_id(state))
    return Decision(label, ctx.deepest, ctx.macs_spent, new_scene=True), new_state


def confidence_metric(scores, metric: str, score_mode: str) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if metric == "score_margin":
        top = np.sort(scores)[::-1]
        return float(top[0] - top[1]) if top.size > 1 else math.inf
    probs = softmax(scores) if score_mode == "logits" else scores
    if metric == "max_prob":
        return float(np.max(probs))
    nz = probs[probs > 0]
    return float(-np.sum(nz * np.log(nz)))


def _confident(value: float, metric: str, threshold: float) -> bool:
    return value <= threshold if metric == "entropy" else value >= threshold


def confidence_step(ctx: ExecutionContext, config: PolicyConfig, score_mode: str = "probabilities") -> Decision:
    last = ctx.num_exits - 1
    for i in range(ctx.num_exits):
        r = ctx.reading(i)
        value = confidence_metric(r.scores, config.confidence_metric, score_mode)
        if i == last or _confident(value, config.confidence_metric, config.threshold):
            return Decision(r.label, i, ctx.macs_spent)
    raise AssertionError("unreachable")


def patience_step(ctx: ExecutionContext, config: PolicyConfig) -> Decision:
    w = config.patience_window
    labels: list[int] = []
    for i in range(ctx.num_exits):
        labels.append(ctx.reading(i).label)
        if len(labels) >= w and len(set(labels[-w:])) == 1:
            break
    return Decision(labels[-1], ctx.deepest, ctx.macs_spent)


def budget_step(ctx: ExecutionContext, config: PolicyConfig, mode: str) -> Decision:
    costs = ctx.model.cumulative_macs
    if config.budget is None:
        raise ConfigError("budget policies need a 'budget'")
    if config.budget < costs[0]:
        raise ConfigError(f"budget {config.budget} is below the cheapest exit's cost {costs[0]}")
    if mode not in BUDGET_MODES:
        raise ConfigError(f"budget mode must be one of {BUDGET_MODES}")
    deepest = max(i for i, c in enumerate(costs) if c <= config.budget)
    if mode == "a_priori":
        r = ctx.reading(deepest)
    else:
        for i in range(deepest + 1):
            r = ctx.reading(i)
    return Decision(r.label, deepest, ctx.macs_spent)


@dataclass(frozen=True)
class FilterState:
    reference_input: np.ndarray
    label: int
    scene_id: int = 0

    @property
    def footprint(self) -> int:
        """Number of values held as reference."""
        return int(self.reference_input.size)


def input_filter_step(
    current_input, state: FilterState | None, ctx: ExecutionContext, config: PolicyConfig
) -> tuple[Decision, FilterState]:
    """Skip inference entirely while the raw input stays close to the reference input."""
    x = np.asarray(current_input, dtype=np.float64)
    if state is not None:
        if state.reference_input.shape != x.shape:
            raise ValueError(f"input shape {x.shape} differs from reference {state.reference_input.shape}")
        if euclidean(x, state.reference_input) < config.threshold:
            return Decision(state.label, None, 0), state
    r = ctx.reading(ctx.num_exits - 1)
    new_state = FilterState(x.copy(), r.label, 0 if state is None else state.scene_id + 1)
    return Decision(r.label, ctx.deepest, ctx.macs_spent, new_scene=True), new_state


# -- stream runners ---------------------------------------------------------------

class Policy:
    """Binds a step function to its per-stream state. One instance per stream."""

    name = "policy"

    def __init__(self, config: PolicyConfig, score_mode: str = "logits"):
        self.config = config
        self.score_mode = score_mode
        self.state = None

    def reset(self) -> None:
        self.state = None

    def step(self, x, ctx: ExecutionContext) -> Decision:
        raise NotImplementedError


class DifferenceDetection(Policy):
    name = "difference_detection"

    def step(self, x, ctx):
        decision, self.state = difference_detection_step(self.state, ctx, self.config)
        return decision


class TemporalPatience(Policy):
    name = "temporal_patience"

    def step(self, x, ctx):
        decision, self.state = temporal_patience_step(self.state, ctx, self.config)
        return decision


class Confidence(Policy):
    name = "confidence"

    def step(self, x, ctx):
        return confidence_step(ctx, self.config, self.score_mode)


class Patience(Policy):
    name = "patience"

    def step(self, x, ctx):
        return patience_step(ctx, self.config)


class APrioriBudget(Policy):
    name = "budget_a_priori"

    def step(self, x, ctx):
        return budget_step(ctx, self.config, "a_priori")


class JustInTimeBudget(Policy):
    name = "budget_just_in_time"

    def step(self, x, ctx):
        return budget_step(ctx, self.config, "just_in_time")


class InputFilter(Policy):
    name = "input_filter"

    def step(self, x, ctx):
        decision, self.state = input_filter_step(x, self.state, ctx, self.config)
        return decision


POLICIES: dict[str, type[Policy]] = {
    cls.name: cls
    for cls in (
        DifferenceDetection,
        TemporalPatience,
        Confidence,
        Patience,
        APrioriBudget,
        JustInTimeBudget,
        InputFilter,
    )
}

# Which PolicyConfig field a sweep varies for each policy.
SWEEP_PARAMETER = {
    "difference_detection": "threshold",
    "temporal_patience": "threshold",
    "confidence": "threshold",
    "input_filter": "threshold",
    "patience": "patience_window",
    "budget_a_priori": "budget",
    "budget_just_in_time": "budget",
}


def make_policy(name: str, config: PolicyConfig, score_mode: str = "logits") -> Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ConfigError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(config, score_mode)


def with_parameter(name: str, config: PolicyConfig, value) -> PolicyConfig:
    field_name = SWEEP_PARAMETER[name]
    if field_name != "threshold":
        if not math.isfinite(value) or value != int(value):
            raise ConfigError(f"{name}: {field_name} must be an integer, got {value}")
        value = int(value)
    return replace(config, **{field_name: value})
