"""Temporally correlated labelled streams.

Three generators are provided: scene-structured Gaussian streams, zoom
sequences over 2-D frames, and synthetic keyword recordings cut into
overlapping windows. Streams are stored as JSONL, one sample per line::

    {"input": [...], "label": 3, "scene": 0}
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class StreamSample:
    input: np.ndarray
    label: int
    scene: int | None = None

    def to_json(self) -> str:
        doc = {"input": self.input.tolist(), "label": int(self.label)}
        if self.scene is not None:
            doc["scene"] = int(self.scene)
        return json.dumps(doc, separators=(",", ":"))


@dataclass(frozen=True)
class SceneSpec:
    num_scenes: int
    samples_per_scene: int
    prototype_spread: float = 1.0
    jitter: float = 0.02
    input_dim: int = 16
    num_classes: int = 10
    classes: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_scenes < 1:
            raise ConfigError(f"num_scenes must be >= 1, got {self.num_scenes}")
        if self.samples_per_scene < 1:
            raise ConfigError(f"samples_per_scene must be >= 1, got {self.samples_per_scene}")
        if not self.prototype_spread > 0:
            raise ConfigError(f"prototype_spread must be > 0, got {self.prototype_spread}")
        if not self.jitter >= 0:
            raise ConfigError(f"jitter must be >= 0, got {self.jitter}")
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.classes is not None:
            object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
            if len(self.classes) != self.num_scenes:
                raise ConfigError("classes must list one class per scene")
            if any(not 0 <= c < self.num_classes for c in self.classes):
                raise ConfigError("classes must lie in 0..num_classes-1")


def generate_scene_stream(spec: SceneSpec) -> list[StreamSample]:
    rng = np.random.default_rng(spec.seed)
    d = spec.input_dim
    prototypes = spec.prototype_spread * rng.standard_normal((spec.num_scenes, d))
    if spec.classes is None:
        classes = rng.integers(0, spec.num_classes, size=spec.num_scenes)
    else:
        classes = spec.classes
    samples = []
    for s in range(spec.num_scenes):
        noise = spec.jitter * rng.standard_normal((spec.samples_per_scene, d))
        for row in prototypes[s] + noise:
            samples.append(StreamSample(row, int(classes[s]), s))
    return samples


# -- zoom sequences ---------------------------------------------------------------

def _bilinear(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = image.shape
    r0 = np.clip(np.floor(rows).astype(int), 0, h - 1)
    c0 = np.clip(np.floor(cols).astype(int), 0, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = image[np.ix_(r0, c0)] * (1 - fc) + image[np.ix_(r0, c1)] * fc
    bottom = image[np.ix_(r1, c0)] * (1 - fc) + image[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bottom * fr


def center_crop_resize(image, fraction: float) -> np.ndarray:
    """Crop the central ``fraction`` of each side and resize back bilinearly.

    Pixel centres of the output are mapped onto the crop so that
    ``fraction=1`` reproduces the image exactly.
    """
    image = np.asarray(image, dtype=np.float64)
    n = image.shape[0]
    c = (n - 1) / 2.0
    coords = c + (np.arange(n) - c) * fraction
    return _bilinear(image, coords, coords)


def zoom_sequence(image, steps: int = 10, max_zoom: float = 0.5) -> list[np.ndarray]:
    """Frames zooming into the image centre.

    Frame ``k`` crops ``1 - max_zoom * k / (steps - 1)`` of each side, so the
    first frame is the full image and the last keeps ``1 - max_zoom`` of each
    side (0.5 by default, i.e. a 50% zoom measured on side length).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ConfigError(f"zoom needs a square 2-D image, got shape {image.shape}")
    if image.shape[0] < 2:
        raise ConfigError("zoom needs an image of at least 2x2 pixels")
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    if not 0 <= max_zoom <= 0.5:
        raise ConfigError("max_zoom must lie in [0, 0.5]")
    if steps == 1:
        return [image.copy()]
    return [center_crop_resize(image, 1.0 - max_zoom * k / (steps - 1)) for k in range(steps)]


def generate_zoom_stream(
    num_images: int,
    size: int = 8,
    steps: int = 10,
    max_zoom: float = 0.5,
    num_classes: int = 10,
    seed: int = 0,
) -> list[StreamSample]:
    """Random smooth images, each expanded into a zoom sequence (frames flattened)."""
    if num_images < 1:
        raise ConfigError("num_images must be >= 1")
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(num_images):
        grid = np.linspace(0.0, 2.0, size)
        image = _bilinear(rng.standard_normal((3, 3)), grid, grid)
        image = image + 0.1 * rng.standard_normal((size, size))
        label = int(rng.integers(0, num_classes))
        for frame in zoom_sequence(image, steps, max_zoom):
            samples.append(StreamSample(frame.reshape(-1), label, i))
    return samples


# -- keyword recordings --------------------------------------------------------------

def overlap_segments(recording, window: int, stride: int) -> list[np.ndarray]:
    x = np.asarray(recording, dtype=np.float64)
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    if window < 1 or window > len(x):
        raise ConfigError(f"window {window} does not fit a recording of length {len(x)}")
    count = (len(x) - window) // stride + 1
    return [x[i * stride : i * stride + window].copy() for i in range(count)]


def segment_labels(timeline: Sequence[int], window: int, stride: int, background: int = 0) -> list[int]:
    """Label each window with the class covering most of it; ties go to background."""
    timeline = np.asarray(timeline)
    labels = []
    for seg in overlap_segments(timeline, window, stride):
        values, counts = np.unique(seg.astype(int), return_counts=True)
        top = counts.max()
        winners = values[counts == top]
        labels.append(int(winners[0]) if len(winners) == 1 else background)
    return labels


def command_signature(label: int, length: int, amplitude: float = 3.0) -> np.ndarray:
    """Class-specific bump: a windowed sinusoid whose frequency encodes the class."""
    t = np.arange(length)
    envelope = np.hanning(length + 2)[1:-1]
    return amplitude * envelope * np.sin(2 * np.pi * (label + 1) * t / (2 * length) + 0.3 * label)


def random_commands(count: int, length: int, num_classes: int, command_length: int, rng, background: int = 0):
    """Draw ``count`` non-overlapping (label, position) commands."""
    classes = [c for c in range(num_classes) if c != background]
    commands: list[tuple[int, int]] = []
    occupied: list[tuple[int, int]] = []
    for _ in range(count):
        pos = _place(occupied, length, command_length, rng)
        commands.append((int(rng.choice(classes)), pos))
    return commands


def _place(occupied: list[tuple[int, int]], length: int, span: int, rng, retries: int = 1000) -> int:
    for _ in range(retries):
        pos = int(rng.integers(0, length - span + 1))
        if all(pos + span <= a or b <= pos for a, b in occupied):
            occupied.append((pos, pos + span))
            return pos
    raise ConfigError(f"could not place an insertion of length {span} after {retries} attempts")


def plan_insertions(
    commands: Sequence[tuple[int, int]],
    noise_events: int,
    length: int,
    rng,
    command_length: int = 10,
    event_length: int = 10,
) -> list[tuple[int, int, int | None]]:
    """Validate command spans and draw non-overlapping noise-event spans.

    Returns ``(start, end, label)`` triples; noise events have label None.
    """
    occupied: list[tuple[int, int]] = []
    spans: list[tuple[int, int, int | None]] = []
    for label, pos in commands:
        if not 0 <= pos <= length - command_length:
            raise ConfigError(f"command at position {pos} does not fit a recording of length {length}")
        if any(pos < b and a < pos + command_length for a, b in occupied):
            raise ConfigError(f"command at position {pos} overlaps another command")
        occupied.append((pos, pos + command_length))
        spans.append((pos, pos + command_length, int(label)))
    for _ in range(noise_events):
        pos = _place(occupied, length, event_length, rng)
        spans.append((pos, pos + event_length, None))
    return spans


def synthesize_recording(
    commands: Sequence[tuple[int, int]],
    noise_events: int,
    length: int,
    seed: int = 0,
    command_length: int = 10,
    event_length: int = 10,
    noise_level: float = 0.1,
    event_amplitude: float = 2.0,
    background: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """White noise with command signatures and random noise events.

    Returns the series and the per-position label timeline (``background``
    outside commands, noise events included).
    """
    rng = np.random.default_rng(seed)
    series = noise_level * rng.standard_normal(length)
    timeline = np.full(length, background, dtype=int)
    for start, end, label in plan_insertions(commands, noise_events, length, rng, command_length, event_length):
        if label is not None:
            series[start:end] += command_signature(label, end - start)
            timeline[start:end] = label
        else:
            freq = rng.uniform(0.05, 0.5)
            phase = rng.uniform(0, 2 * np.pi)
            series[start:end] += event_amplitude * rng.uniform(0.5, 1.0) * np.sin(
                2 * np.pi * freq * np.arange(end - start) + phase
            )
    return series, timeline


def generate_keyword_stream(
    num_commands: int = 5,
    noise_events: int = 100,
    length: int = 3000,
    num_classes: int = 10,
    window: int = 10,
    stride: int = 1,
    seed: int = 0,
    command_length: int = 10,
    event_length: int = 10,
) -> list[StreamSample]:
    rng = np.random.default_rng(seed)
    commands = random_commands(num_commands, length, num_classes, command_length, rng)
    series, timeline = synthesize_recording(
        commands, noise_events, length, seed + 1, command_length, event_length
    )
    segments = overlap_segments(series, window, stride)
    labels = segment_labels(timeline, window, stride)
    return [StreamSample(seg, label) for seg, label in zip(segments, labels)]


# -- JSONL ------------------------------------------------------------------------------

def write_stream(samples: Iterable[StreamSample], path) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")


def read_stream(path) -> list[StreamSample]:
    samples = []
    shape = None
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                x = np.asarray(doc["input"], dtype=np.float64)
                label = doc["label"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{lineno}: malformed sample ({exc})") from None
            if not isinstance(label, int) or label < 0:
                raise ConfigError(f"{path}:{lineno}: label must be a non-negative integer")
            if shape is None:
                shape = x.shape
            elif x.shape != shape:
                raise ConfigError(f"{path}:{lineno}: input shape {x.shape} differs from {shape}")
            samples.append(StreamSample(x, label, doc.get("scene")))
    if not samples:
        raise ConfigError(f"{path}: stream is empty")
    return samples


def stream_digest(samples: Iterable[StreamSample]) -> str:
    h = hashlib.sha256()
    for s in samples:
        h.update(s.to_json().encode())
        h.update(b"\n")
    return h.hexdigest()[:16]
