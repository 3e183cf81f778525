"""Early-exit inference runtime with temporal termination policies."""
from .errors import ConfigError
from .evaluation import SweepRecord, evaluate, sweep
from .model import ExitGraph, ExitReading, OracleExitModel, load_model, run_all_exits, run_to_exit, save_model
from .policy import Decision, PolicyConfig, SceneState, make_policy
from .stream import SceneSpec, StreamSample, generate_scene_stream, read_stream, write_stream

__all__ = [
    "ConfigError",
    "Decision",
    "ExitGraph",
    "ExitReading",
    "OracleExitModel",
    "PolicyConfig",
    "SceneSpec",
    "SceneState",
    "StreamSample",
    "SweepRecord",
    "evaluate",
    "generate_scene_stream",
    "load_model",
    "make_policy",
    "read_stream",
    "run_all_exits",
    "run_to_exit",
    "save_model",
    "sweep",
    "write_stream",
]
