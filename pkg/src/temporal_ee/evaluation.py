"""Run policies over streams and summarise accuracy against MAC cost."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .policy import (
    SWEEP_PARAMETER,
    Decision,
    PolicyConfig,
    euclidean,
    majority_vote,
    make_policy,
    scene_label,
    with_parameter,
)
from .stream import StreamSample, stream_digest


@dataclass(frozen=True)
class SweepRecord:
    policy: str
    labeling_mode: str
    threshold: float
    accuracy: float
    mean_macs: float
    relative_macs: float
    exit_shares: tuple[float, ...]
    num_scenes: int
    stream_digest: str
    config: dict = field(default_factory=dict, compare=False)
    reuse_share: float = 0.0


def reference_cost(model) -> int:
    """MACs of the single-exit model: backbone plus final classifier, no branches."""
    return int(model.single_exit_macs)


def _check_labels(model, stream: Sequence[StreamSample]) -> None:
    if not stream:
        raise ConfigError("stream is empty")
    for t, s in enumerate(stream):
        if not 0 <= s.label < model.num_classes:
            raise ConfigError(f"sample {t}: label {s.label} out of range for {model.num_classes} classes")


def run_stream(model, stream: Sequence[StreamSample], name: str, config: PolicyConfig) -> list[Decision]:
    _check_labels(model, stream)
    policy = make_policy(name, config, model.score_mode)
    return [policy.step(s.input, model.context(s.input, s.label)) for s in stream]


def summarize(
    model,
    stream: Sequence[StreamSample],
    decisions: Sequence[Decision],
    name: str,
    config: PolicyConfig,
    digest: str | None = None,
) -> SweepRecord:
    n = len(stream)
    correct = sum(d.label == s.label for d, s in zip(decisions, stream))
    total_macs = sum(d.macs_spent for d in decisions)
    counts = np.zeros(model.num_exits, dtype=np.int64)
    reused = 0
    for d in decisions:
        if d.terminated_at is None:
            reused += 1
        else:
            counts[d.terminated_at] += 1
    executed = n - reused
    mean_macs = total_macs / n
    return SweepRecord(
        policy=name,
        labeling_mode=config.labeling_mode,
        threshold=float(getattr(config, SWEEP_PARAMETER[name]) or 0),
        accuracy=correct / n,
        mean_macs=mean_macs,
        relative_macs=mean_macs / reference_cost(model),
        exit_shares=tuple(float(c) / executed for c in counts),
        num_scenes=sum(d.new_scene for d in decisions),
        stream_digest=digest if digest is not None else stream_digest(stream),
        config=config.snapshot(),
        reuse_share=reused / n,
    )


def evaluate(model, stream: Sequence[StreamSample], name: str, config: PolicyConfig, digest: str | None = None) -> SweepRecord:
    decisions = run_stream(model, stream, name, config)
    return summarize(model, stream, decisions, name, config, digest)


def sweep(
    model,
    stream: Sequence[StreamSample],
    name: str,
    config: PolicyConfig,
    values: Sequence[float],
    workers: int = 1,
) -> list[SweepRecord]:
    """Evaluate ``name`` once per value of its sweep parameter.

    The parameter is the distance/confidence threshold for most policies, the
    window for ``patience`` and the MAC budget for the budget policies.
    """
    values = [float(v) for v in values]
    if not values:
        raise ConfigError(f"{name}: empty threshold grid")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name}: threshold grid must be strictly ascending")
    _check_labels(model, stream)
    digest = stream_digest(stream)
    configs = [with_parameter(name, config, v) for v in values]

    def one(cfg):
        return evaluate(model, stream, name, cfg, digest)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(one, configs))
    else:
        records = [one(c) for c in configs]
    return sorted(records, key=lambda r: r.threshold)


def check_joinable(records: Sequence[SweepRecord]) -> None:
    digests = {r.stream_digest for r in records}
    if len(digests) > 1:
        raise ConfigError(f"records come from different streams (digests {sorted(digests)})")


def exit_accuracies(model, stream: Sequence[StreamSample]) -> list[float]:
    """Stand-alone accuracy of every exit on the stream."""
    hits = np.zeros(model.num_exits)
    for s in stream:
        for r in model.context(s.input, s.label).readings():
            hits[r.exit_index] += r.label == s.label
    return (hits / len(stream)).tolist()


def labeling_accuracy(model, stream: Sequence[StreamSample], labeling_mode: str = "majority_vote") -> float:
    """Accuracy when every sample is labelled by a full evaluation."""
    hits = 0
    for s in stream:
        hits += scene_label(model.context(s.input, s.label).readings(), labeling_mode) == s.label
    return hits / len(stream)


def vote_accuracy(model, stream: Sequence[StreamSample]) -> float:
    hits = sum(majority_vote(model.context(s.input, s.label).readings()) == s.label for s in stream)
    return hits / len(stream)


def compare_labeling_modes(
    model,
    stream: Sequence[StreamSample],
    policies: Sequence[str],
    config: PolicyConfig,
    values: Sequence[float],
) -> list[dict]:
    """Sweep each policy under both scene-labelling modes and pair the records."""
    if model.num_exits < 2:
        raise ConfigError("labeling-mode comparison needs a model with at least two exits")
    rows = []
    for name in policies:
        vote = sweep(model, stream, name, replace(config, labeling_mode="majority_vote"), values)
        final = sweep(model, stream, name, replace(config, labeling_mode="final_classifier"), values)
        for a, b in zip(vote, final):
            rows.append(
                {
                    "policy": name,
                    "threshold": a.threshold,
                    "majority_vote": a,
                    "final_classifier": b,
                    "accuracy_delta": a.accuracy - b.accuracy,
                    "mean_macs_delta": a.mean_macs - b.mean_macs,
                }
            )
    return rows


def pareto_front(records: Sequence[SweepRecord]) -> list[SweepRecord]:
    """Records not dominated in (lower relative_macs, higher accuracy), cheapest first."""
    front = []
    best = -math.inf
    for r in sorted(records, key=lambda r: (r.relative_macs, -r.accuracy)):
        if r.accuracy > best:
            front.append(r)
            best = r.accuracy
    return front


def best_within(records: Sequence[SweepRecord], reference_accuracy: float, tolerance: float = 0.05):
    """Cheapest record whose accuracy is at least ``reference_accuracy - tolerance``."""
    ok = [r for r in records if r.accuracy >= reference_accuracy - tolerance - 1e-12]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.relative_macs, -r.accuracy, r.threshold))


def exit_distances(model, stream: Sequence[StreamSample], exit_index: int = 0) -> np.ndarray:
    """Distances between consecutive samples' outputs at one exit."""
    scores = [model.context(s.input, s.label).reading(exit_index).scores for s in stream]
    return np.array([euclidean(a, b) for a, b in zip(scores, scores[1:])])


def suggest_grid(model, stream: Sequence[StreamSample], count: int = 10, exit_index: int = 0) -> list[float]:
    """Threshold grid from percentiles of consecutive exit-output distances.

    The grid starts at 0 and ends at infinity so both degenerate regimes are
    always covered.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    d = exit_distances(model, stream, exit_index)
    if d.size == 0:
        return [0.0, math.inf]
    inner = np.percentile(d, np.linspace(0, 100, count + 2)[1:-1]).tolist()
    grid = sorted({0.0, *(float(v) for v in inner if v > 0), math.inf})
    return grid
