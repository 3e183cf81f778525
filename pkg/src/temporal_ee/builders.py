"""Small randomly initialised early-exit networks for demos and tests."""
from __future__ import annotations

import numpy as np

from .model import ExitGraph
from .tensor import Layer, conv1d, dense, maxpool1d


def conv_eenn(
    input_length: int = 32,
    num_classes: int = 4,
    channels: tuple[int, ...] = (4, 8, 8),
    kernel_size: int = 3,
    seed: int = 0,
    score_mode: str = "logits",
) -> ExitGraph:
    """1-D convolutional backbone with one exit per conv block.

    Each exit branch is global average pooling followed by a dense
    classifier; the last branch is the final classifier.
    """
    rng = np.random.default_rng(seed)
    segments, exits = [], []
    c_in = 1
    for i, c_out in enumerate(channels):
        k = rng.standard_normal((kernel_size, c_in, c_out)) / np.sqrt(kernel_size * c_in)
        seg = [conv1d(k, 0.1 * rng.standard_normal(c_out), padding="same"), Layer("relu")]
        if i < len(channels) - 1:
            seg.append(maxpool1d(2))
        segments.append(seg)
        head = [Layer("avgpool_global"), dense(rng.standard_normal((c_out, num_classes)), np.zeros(num_classes))]
        if score_mode == "probabilities":
            head.append(Layer("softmax"))
        exits.append(head)
        c_in = c_out
    return ExitGraph(segments, exits, num_classes, (input_length,), score_mode)
