"""Early-exit networks: segmented graphs, incremental execution, oracle exits.

An :class:`ExitGraph` is a list of backbone segments with one exit branch
attached after each segment; the last exit is the final classifier. The
cumulative cost of exit ``i`` is the cost of segments ``0..i`` plus exit
branches ``0..i``, i.e. what a sequential early-exit inference has spent by
the time exit ``i`` produced its scores.

Models are executed through a per-sample context object that caches
backbone activations, so asking for exit 0 and later exit 2 never repeats
work. :class:`OracleExitModel` offers the same interface with synthetic,
calibrated exits instead of weights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor
from .errors import ConfigError
from .tensor import Layer

SCORE_MODES = ("logits", "probabilities")


@dataclass(frozen=True)
class ExitReading:
    exit_index: int
    scores: np.ndarray
    cumulative_macs: int

    @property
    def label(self) -> int:
        return int(np.argmax(self.scores))


@dataclass(frozen=True, eq=False)
class ExitGraph:
    segments: tuple[tuple[Layer, ...], ...]
    exits: tuple[tuple[Layer, ...], ...]
    num_classes: int
    input_shape: tuple[int, ...]
    score_mode: str = "logits"
    segment_macs: tuple[int, ...] = field(init=False)
    exit_macs: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        segments = tuple(tuple(s) for s in self.segments)
        exits = tuple(tuple(e) for e in self.exits)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "exits", exits)
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        if self.score_mode not in SCORE_MODES:
            raise ConfigError(f"score_mode must be one of {SCORE_MODES}, got {self.score_mode!r}")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be positive")
        if not segments:
            raise ConfigError("model needs at least one segment")
        if len(exits) != len(segments):
            raise ConfigError(
                f"model has {len(segments)} segments but {len(exits)} exits; one exit per segment"
            )
        seg_macs, exit_macs = [], []
        shape = self.input_shape
        for i, (segment, branch) in enumerate(zip(segments, exits)):
            try:
                cost, shape = tensor.sequence_cost(segment, shape)
            except ConfigError as exc:
                raise ConfigError(f"segment {i}: {exc}") from None
            try:
                branch_cost, out = tensor.sequence_cost(branch, shape)
            except ConfigError as exc:
                raise ConfigError(f"exit {i}: {exc}") from None
            if out != (self.num_classes,):
                raise ConfigError(
                    f"exit {i}: class-count mismatch, outputs shape {out} "
                    f"but num_classes is {self.num_classes}"
                )
            ends_softmax = bool(branch) and branch[-1].kind == "softmax"
            if ends_softmax != (self.score_mode == "probabilities"):
                raise ConfigError(
                    f"exit {i}: score_mode {self.score_mode!r} "
                    + ("forbids" if ends_softmax else "requires")
                    + " a trailing softmax layer"
                )
            seg_macs.append(cost)
            exit_macs.append(branch_cost)
        object.__setattr__(self, "segment_macs", tuple(seg_macs))
        object.__setattr__(self, "exit_macs", tuple(exit_macs))

    def __eq__(self, other):
        if not isinstance(other, ExitGraph):
            return NotImplemented
        return (
            self.segments == other.segments
            and self.exits == other.exits
            and self.num_classes == other.num_classes
            and self.input_shape == other.input_shape
            and self.score_mode == other.score_mode
        )

    @property
    def num_exits(self) -> int:
        return len(self.exits)

    @property
    def cumulative_macs(self) -> list[int]:
        out, total = [], 0
        for s, e in zip(self.segment_macs, self.exit_macs):
            total += s + e
            out.append(total)
        return out

    @property
    def full_macs(self) -> int:
        return self.cumulative_macs[-1]

    @property
    def single_exit_macs(self) -> int:
        """Cost of the backbone plus the final classifier, without early exits."""
        return sum(self.segment_macs) + self.exit_macs[-1]

    def context(self, x, label=None) -> "GraphContext":
        return GraphContext(self, x)

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "score_mode": self.score_mode,
            "input_shape": list(self.input_shape),
            "segments": [[tensor.layer_to_dict(l) for l in s] for s in self.segments],
            "exits": [[tensor.layer_to_dict(l) for l in e] for e in self.exits],
        }


class ExecutionContext:
    """Lazily computed exit readings for one sample.

    ``deepest`` is the deepest exit requested so far and ``macs_spent`` the
    cumulative cost charged for it.
    """

    def __init__(self, model):
        self.model = model
        self._readings: dict[int, ExitReading] = {}
        self.deepest = -1

    @property
    def num_exits(self) -> int:
        return self.model.num_exits

    @property
    def macs_spent(self) -> int:
        return 0 if self.deepest < 0 else self.model.cumulative_macs[self.deepest]

    def reading(self, index: int) -> ExitReading:
        if not 0 <= index < self.num_exits:
            raise IndexError(f"exit index {index} out of range 0..{self.num_exits - 1}")
        if index not in self._readings:
            scores = self._compute(index)
            self._readings[index] = ExitReading(index, scores, self.model.cumulative_macs[index])
        self.deepest = max(self.deepest, index)
        return self._readings[index]

    def readings(self) -> list[ExitReading]:
        return [self.reading(i) for i in range(self.num_exits)]

    def _compute(self, index: int) -> np.ndarray:
        raise NotImplementedError


class GraphContext(ExecutionContext):
    """Execution context for an :class:`ExitGraph`; caches segment outputs.

    ``executed_macs`` counts the work actually performed, which is never more
    than one full pass no matter in which order exits are requested.
    """

    def __init__(self, model: ExitGraph, x):
        super().__init__(model)
        x = np.asarray(x, dtype=np.float64)
        if x.shape != model.input_shape:
            raise ConfigError(f"model input: expected shape {model.input_shape}, got {x.shape}")
        self._activations = [x]
        self.executed_macs = 0

    def _compute(self, index: int) -> np.ndarray:
        model = self.model
        while len(self._activations) <= index + 1:
            i = len(self._activations) - 1
            self._activations.append(tensor.run_sequence(model.segments[i], self._activations[i]))
            self.executed_macs += model.segment_macs[i]
        self.executed_macs += model.exit_macs[index]
        return tensor.run_sequence(model.exits[index], self._activations[index + 1])


def run_to_exit(model, x, exit_index: int, label=None) -> ExitReading:
    return model.context(x, label).reading(exit_index)


def run_all_exits(model, x, label=None) -> list[ExitReading]:
    return model.context(x, label).readings()


def with_score_mode(model: ExitGraph, mode: str) -> ExitGraph:
    """Copy of ``model`` whose exits emit ``mode`` scores (adds or strips softmax)."""
    if mode == model.score_mode:
        return model
    if mode == "probabilities":
        exits = [tuple(e) + (Layer("softmax"),) for e in model.exits]
    else:
        exits = [tuple(e)[:-1] for e in model.exits]
    return ExitGraph(model.segments, exits, model.num_classes, model.input_shape, mode)


# -- oracle exits -------------------------------------------------------------

def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


class OracleExitModel:
    """Synthetic early-exit model with configured per-exit accuracies.

    Correctness of exit ``i`` on a sample is decided by a difficulty value in
    [0, 1) derived from a random projection of the input: the exit is right
    iff ``difficulty < accuracies[i]``. For inputs distributed as
    ``N(0, input_scale**2 * I)`` the difficulty is uniform, so the empirical
    accuracy matches the configured one. Because difficulty is a smooth
    function of the input, nearby inputs (same scene) are right or wrong
    together, and repeated evaluation of a sample gives the same reading.

    With ``nested`` (default) all exits share one difficulty, so a deeper
    exit with higher accuracy is right on a superset of samples. Exits with
    ``nested`` set to False get their own independent difficulty, which is
    how overthinking (a late exit beating the final classifier on different
    samples) is emulated.

    On error the predicted class is spread uniformly over the wrong classes,
    again via a smooth input projection. Scores are ``margin`` on the
    predicted class plus a bounded input embedding that never changes the
    argmax.
    """

    kind = "oracle"

    def __init__(
        self,
        accuracies: Sequence[float],
        cumulative_macs: Sequence[int],
        num_classes: int,
        input_dim: int,
        seed: int = 0,
        single_exit_macs: int | None = None,
        nested: bool | Sequence[bool] = True,
        score_mode: str = "logits",
        input_scale: float = 1.0,
        margin: float = 4.0,
    ):
        self.accuracies = tuple(float(p) for p in accuracies)
        self.cumulative_macs = [int(c) for c in cumulative_macs]
        self.num_classes = int(num_classes)
        self.input_dim = int(input_dim)
        self.seed = int(seed)
        self.score_mode = score_mode
        self.input_scale = float(input_scale)
        self.margin = float(margin)
        n = len(self.accuracies)
        if isinstance(nested, bool):
            nested = [nested] * n
        self.nested = tuple(bool(v) for v in nested)

        if n == 0:
            raise ConfigError("oracle needs at least one exit")
        if len(self.cumulative_macs) != n or len(self.nested) != n:
            raise ConfigError("oracle: accuracies, cumulative_macs and nested must have equal length")
        if any(not 0.0 <= p <= 1.0 for p in self.accuracies):
            raise ConfigError("oracle: accuracies must lie in [0, 1]")
        if any(c <= 0 for c in self.cumulative_macs) or any(
            b <= a for a, b in zip(self.cumulative_macs, self.cumulative_macs[1:])
        ):
            raise ConfigError("oracle: cumulative_macs must be positive and strictly increasing")
        if self.num_classes < 2:
            raise ConfigError("oracle: num_classes must be >= 2")
        if self.input_dim < 1 or self.input_scale <= 0 or self.margin <= 0:
            raise ConfigError("oracle: input_dim, input_scale and margin must be positive")
        if score_mode not in SCORE_MODES:
            raise ConfigError(f"score_mode must be one of {SCORE_MODES}, got {score_mode!r}")
        self.single_exit_macs = int(
            self.cumulative_macs[-1] if single_exit_macs is None else single_exit_macs
        )
        if not 0 < self.single_exit_macs <= self.cumulative_macs[-1]:
            raise ConfigError("oracle: single_exit_macs must be in (0, full cost]")

        rng = np.random.default_rng(self.seed)
        d, c = self.input_dim, self.num_classes
        self._shared_dir = _unit(rng.standard_normal(d))
        self._own_dirs = [_unit(rng.standard_normal(d)) for _ in range(n)]
        self._wrong_dirs = [_unit(rng.standard_normal(d)) for _ in range(n)]
        self._embeddings = [
            rng.standard_normal((c, d)) / np.sqrt(d) for _ in range(n)
        ]

    @property
    def num_exits(self) -> int:
        return len(self.accuracies)

    @property
    def full_macs(self) -> int:
        return self.cumulative_macs[-1]

    def context(self, x, label=None) -> "OracleContext":
        if label is None:
            raise ConfigError("oracle model needs the true label of every sample")
        return OracleContext(self, x, int(label))

    def difficulty(self, x, exit_index: int) -> float:
        direction = self._shared_dir if self.nested[exit_index] else self._own_dirs[exit_index]
        return min(_phi(float(direction @ x) / self.input_scale), np.nextafter(1.0, 0.0))

    def scores(self, x, label: int, exit_index: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.input_dim:
            raise ConfigError(f"oracle input: expected {self.input_dim} values, got {x.size}")
        if not 0 <= label < self.num_classes:
            raise ConfigError(f"label {label} outside 0..{self.num_classes - 1}")
        if self.difficulty(x, exit_index) < self.accuracies[exit_index]:
            predicted = label
        else:
            v = min(_phi(float(self._wrong_dirs[exit_index] @ x) / self.input_scale), 1.0 - 1e-12)
            predicted = (label + 1 + int(v * (self.num_classes - 1))) % self.num_classes
        embed = np.tanh(self._embeddings[exit_index] @ x / self.input_scale)
        logits = 0.4 * self.margin * embed
        logits[predicted] += self.margin
        return tensor.softmax(logits) if self.score_mode == "probabilities" else logits

    def to_dict(self) -> dict:
        return {
            "kind": "oracle",
            "accuracies": list(self.accuracies),
            "cumulative_macs": list(self.cumulative_macs),
            "single_exit_macs": self.single_exit_macs,
            "num_classes": self.num_classes,
            "input_dim": self.input_dim,
            "seed": self.seed,
            "nested": list(self.nested),
            "score_mode": self.score_mode,
            "input_scale": self.input_scale,
            "margin": self.margin,
        }

    def __eq__(self, other):
        if not isinstance(other, OracleExitModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class OracleContext(ExecutionContext):
    def __init__(self, model: OracleExitModel, x, label: int):
        super().__init__(model)
        self._x = np.asarray(x, dtype=np.float64).reshape(-1)
        self._label = label

    def _compute(self, index: int) -> np.ndarray:
        return self.model.scores(self._x, self._label, index)


# -- file format ----------------------------------------------------------------

def model_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise ConfigError("model document must be a JSON object")
    if doc.get("kind") == "oracle":
        fields = dict(doc)
        fields.pop("kind")
        try:
            return OracleExitModel(**fields)
        except TypeError as exc:
            raise ConfigError(f"oracle model: {exc}") from None
    for key in ("num_classes", "segments", "exits", "input_shape"):
        if key not in doc:
            raise ConfigError(f"model: missing top-level key {key!r}")
    segments = [
        [tensor.layer_from_dict(l, f"segment {i} layer {j}") for j, l in enumerate(seg)]
        for i, seg in enumerate(doc["segments"])
    ]
    exits = [
        [tensor.layer_from_dict(l, f"exit {i} layer {j}") for j, l in enumerate(ex)]
        for i, ex in enumerate(doc["exits"])
    ]
    return ExitGraph(
        segments,
        exits,
        int(doc["num_classes"]),
        tuple(doc["input_shape"]),
        doc.get("score_mode", "logits"),
    )


def load_model(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return model_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")
