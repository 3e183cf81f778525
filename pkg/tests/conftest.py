import numpy as np
import pytest

from temporal_ee.model import ExecutionContext, ExitGraph
from temporal_ee.stream import StreamSample
from temporal_ee.tensor import Layer, dense


class TableModel:
    """Model whose exit scores come from a table indexed by sample number.

    Sample ``t`` of a stream built with :func:`table_stream` carries input
    ``[t]``; exit ``i`` then returns ``table[t][i]``.
    """

    def __init__(self, table, cumulative_macs, single_exit_macs=None, score_mode="logits"):
        self.table = [[np.asarray(s, dtype=float) for s in row] for row in table]
        self.cumulative_macs = list(cumulative_macs)
        self.single_exit_macs = single_exit_macs or self.cumulative_macs[-1]
        self.score_mode = score_mode
        self.num_classes = len(self.table[0][0])

    @property
    def num_exits(self):
        return len(self.cumulative_macs)

    def context(self, x, label=None):
        return TableContext(self, int(np.asarray(x).ravel()[0]))


class TableContext(ExecutionContext):
    def __init__(self, model, t):
        super().__init__(model)
        self.t = t

    def _compute(self, index):
        return self.model.table[self.t][index]


def onehot(label, n=3, scale=1.0):
    v = np.zeros(n)
    v[label] = scale
    return v


def table_stream(labels):
    return [StreamSample(np.array([float(t)]), int(y)) for t, y in enumerate(labels)]


@pytest.fixture
def identity_model():
    """Two segments of identity dense layers, identity exits, 3 classes."""
    eye = np.eye(3)
    return ExitGraph(
        segments=[[dense(eye, np.zeros(3))], [dense(eye), Layer("relu")]],
        exits=[[dense(eye)], [dense(eye)]],
        num_classes=3,
        input_shape=(3,),
    )


@pytest.fixture
def three_exit_model():
    rng = np.random.default_rng(7)
    return ExitGraph(
        segments=[
            [dense(rng.standard_normal((6, 8))), Layer("relu")],
            [dense(rng.standard_normal((8, 8))), Layer("relu")],
            [dense(rng.standard_normal((8, 5))), Layer("relu")],
        ],
        exits=[
            [dense(rng.standard_normal((8, 4)), np.zeros(4))],
            [dense(rng.standard_normal((8, 4)))],
            [dense(rng.standard_normal((5, 4)))],
        ],
        num_classes=4,
        input_shape=(6,),
    )
