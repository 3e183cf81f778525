import json
import shutil
import subprocess
from pathlib import Path

import pytest
import yaml

from temporal_ee.cli import main
from temporal_ee.model import load_model

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
ORACLE = json.loads((CONFIGS / "models" / "oracle_standard.json").read_text())


def write_config(tmp_path, **overrides):
    doc = {
        "seed": 1,
        "output_dir": "out",
        "model": ORACLE,
        "generator": {"kind": "scenes", "num_scenes": 4, "samples_per_scene": 5, "input_dim": 16, "num_classes": 10},
        "policies": [
            {"name": "difference_detection", "thresholds": [0, 0.5, float("inf")]},
            {"name": "temporal_patience", "thresholds": [0, 0.5, float("inf")]},
        ],
    }
    doc.update(overrides)
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


class TestGenStream:
    def test_line_count(self, tmp_path):
        cfg = write_config(tmp_path, generator={"kind": "scenes", "num_scenes": 2, "samples_per_scene": 3})
        assert main(["gen-stream", str(cfg), "-o", str(tmp_path / "s.jsonl")]) == 0
        lines = (tmp_path / "s.jsonl").read_text().splitlines()
        assert len(lines) == 6
        assert all(set(json.loads(line)) >= {"input", "label"} for line in lines)

    def test_zero_length_names_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, generator={"kind": "scenes", "num_scenes": 2, "samples_per_scene": 0})
        assert main(["gen-stream", str(cfg), "-o", str(tmp_path / "s.jsonl")]) != 0
        assert "samples_per_scene" in capsys.readouterr().err

    def test_seed_reproducible(self, tmp_path):
        cfg = write_config(tmp_path)
        for name in ("a", "b"):
            main(["gen-stream", str(cfg), "-o", str(tmp_path / f"{name}.jsonl"), "--seed", "7"])
        main(["gen-stream", str(cfg), "-o", str(tmp_path / "c.jsonl"), "--seed", "8"])
        a, b, c = ((tmp_path / f"{n}.jsonl").read_bytes() for n in "abc")
        assert a == b and a != c


class TestInspect:
    def test_graph_rows(self, capsys):
        path = CONFIGS / "models" / "conv_eenn.json"
        assert main(["inspect", str(path)]) == 0
        lines = capsys.readouterr().out.splitlines()
        model = load_model(path)
        header = next(i for i, line in enumerate(lines) if line.split()[:1] == ["exit"])
        rows = [line.split() for line in lines[header + 1 : header + 1 + model.num_exits]]
        assert len(lines) == header + model.num_exits + 2
        backbone = 0
        for i, row in enumerate(rows):
            seg, branch, cum = int(row[1]), int(row[2]), int(row[3])
            backbone += seg
            assert cum == model.cumulative_macs[i]
            assert branch == model.exit_macs[i]
            assert cum - backbone - sum(model.exit_macs[:i]) == branch

    def test_corrupt_json_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "kind": "oracle",\n  "accuracies": [0.5,\n}\n')
        assert main(["inspect", str(bad)]) != 0
        assert "line 4" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["inspect", str(tmp_path / "nope.json")]) != 0
        assert "error:" in capsys.readouterr().err


class TestSweep:
    def test_rows_and_files(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["sweep", str(cfg)]) == 0
        out = tmp_path / "out"
        lines = (out / "sweep.csv").read_text().splitlines()
        assert len(lines) == 1 + 6
        assert (out / "sweep.svg").exists() and (out / "temporal_patience.csv").exists()
        summary = capsys.readouterr().out.splitlines()
        assert [s.split(":")[0] for s in summary] == ["difference_detection", "temporal_patience"]
        assert all("best threshold=" in s or "no configuration" in s for s in summary)

    def test_empty_grid_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, policies=[{"name": "difference_detection", "thresholds": []}])
        assert main(["sweep", str(cfg)]) == 2
        assert "non-empty" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_unknown_policy(self, tmp_path, capsys):
        cfg = write_config(tmp_path, policies=[{"name": "magic"}])
        assert main(["sweep", str(cfg)]) == 2
        assert "unknown policy" in capsys.readouterr().err

    def test_output_dir_override_bytes(self, tmp_path):
        cfg = write_config(tmp_path)
        main(["sweep", str(cfg), "--output-dir", str(tmp_path / "x")])
        main(["sweep", str(cfg), "--output-dir", str(tmp_path / "y"), "--workers", "2"])
        for name in ("sweep.csv", "sweep.svg"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


class TestRunAndGrid:
    def test_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["run", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "difference_detection: threshold=0" in out
        assert len((tmp_path / "out" / "run.csv").read_text().splitlines()) == 3

    def test_suggest_grid(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["suggest-grid", str(cfg), "--count", "4"]) == 0
        grid = json.loads(capsys.readouterr().out)
        assert grid[0] == 0 and grid[-1] == "inf" and len(grid) == 6

    def test_stream_file_config(self, tmp_path):
        cfg = write_config(tmp_path)
        main(["gen-stream", str(cfg), "-o", str(tmp_path / "s.jsonl")])
        cfg2 = write_config(tmp_path, generator=None, stream="s.jsonl")
        assert main(["run", str(cfg2)]) == 0


@pytest.mark.skipif(shutil.which("temporal-ee") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["temporal-ee", "inspect", str(CONFIGS / "models" / "oracle_standard.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "single-exit reference: 1000" in proc.stdout
