import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from temporal_ee.errors import ConfigError
from temporal_ee.stream import (
    SceneSpec,
    StreamSample,
    generate_keyword_stream,
    generate_scene_stream,
    generate_zoom_stream,
    overlap_segments,
    plan_insertions,
    random_commands,
    read_stream,
    segment_labels,
    stream_digest,
    synthesize_recording,
    write_stream,
    zoom_sequence,
)


class TestSceneStream:
    def test_zero_jitter(self):
        s = generate_scene_stream(SceneSpec(3, 4, jitter=0.0))
        for k in range(3):
            block = s[4 * k : 4 * k + 4]
            assert all(np.array_equal(b.input, block[0].input) for b in block)

    def test_construction(self):
        s = generate_scene_stream(SceneSpec(2, 3))
        assert len(s) == 6
        assert [x.scene for x in s] == [0, 0, 0, 1, 1, 1]
        assert len({x.label for x in s[:3]}) == 1

    def test_deterministic(self):
        a = generate_scene_stream(SceneSpec(4, 5, seed=9))
        b = generate_scene_stream(SceneSpec(4, 5, seed=9))
        assert stream_digest(a) == stream_digest(b)
        assert stream_digest(a) != stream_digest(generate_scene_stream(SceneSpec(4, 5, seed=10)))

    def test_explicit_classes(self):
        s = generate_scene_stream(SceneSpec(3, 2, classes=(2, 0, 1), num_classes=3))
        assert [x.label for x in s] == [2, 2, 0, 0, 1, 1]

    def test_separation_monte_carlo(self):
        ok = total = 0
        for seed in range(100):
            spec = SceneSpec(10, 5, prototype_spread=1.0, jitter=0.01, seed=seed)
            s = generate_scene_stream(spec)
            x = np.array([v.input for v in s])
            step = np.linalg.norm(np.diff(x, axis=0), axis=1)
            scenes = np.array([v.scene for v in s])
            boundary = scenes[1:] != scenes[:-1]
            intra_max = step[~boundary].max()
            ok += int(np.sum(step[boundary] > intra_max))
            total += int(boundary.sum())
        assert ok / total >= 0.99

    @pytest.mark.parametrize("field,kwargs", [
        ("samples_per_scene", dict(num_scenes=2, samples_per_scene=0)),
        ("jitter", dict(num_scenes=2, samples_per_scene=1, jitter=-1)),
        ("prototype_spread", dict(num_scenes=2, samples_per_scene=1, prototype_spread=0)),
    ])
    def test_validation_names_field(self, field, kwargs):
        with pytest.raises(ConfigError, match=field):
            SceneSpec(**kwargs)


class TestZoom:
    def test_noop(self):
        img = np.arange(16.0).reshape(4, 4)
        out = zoom_sequence(img, steps=1, max_zoom=0)
        assert len(out) == 1 and np.array_equal(out[0], img)

    def test_constant(self):
        for frame in zoom_sequence(np.full((5, 5), 2.5)):
            np.testing.assert_allclose(frame, 2.5, atol=1e-12)

    def test_ramp_half_crop(self):
        img = np.arange(16.0).reshape(4, 4)  # value 4*row + col
        last = zoom_sequence(img, steps=2, max_zoom=0.5)[-1]
        expected = [
            [3.75, 4.25, 4.75, 5.25],
            [5.75, 6.25, 6.75, 7.25],
            [7.75, 8.25, 8.75, 9.25],
            [9.75, 10.25, 10.75, 11.25],
        ]
        np.testing.assert_allclose(last, expected, atol=1e-12)

    def test_default_ten_frames_start_at_original(self):
        img = np.random.default_rng(0).standard_normal((6, 6))
        frames = zoom_sequence(img)
        assert len(frames) == 10
        np.testing.assert_allclose(frames[0], img, atol=1e-12)

    @pytest.mark.parametrize("img", [np.zeros((3, 4)), np.zeros((1, 1)), np.zeros(9)])
    def test_bad_images(self, img):
        with pytest.raises(ConfigError):
            zoom_sequence(img)

    def test_zoom_stream_labels_inherited(self):
        s = generate_zoom_stream(3, size=6, steps=10, seed=1)
        assert len(s) == 30
        for k in range(3):
            assert len({x.label for x in s[10 * k : 10 * k + 10]}) == 1
        assert s[0].input.shape == (36,)


class TestOverlap:
    def test_exact_fit(self):
        assert len(overlap_segments(np.arange(10), 10, 1)) == 1

    def test_overlap_nine(self):
        segs = overlap_segments(np.arange(12), 10, 1)
        assert len(segs) == 3
        for a, b in zip(segs, segs[1:]):
            assert len(set(a) & set(b)) == 9

    def test_disjoint(self):
        segs = overlap_segments(np.arange(30), 10, 10)
        assert len(segs) == 3
        assert not set(segs[0]) & set(segs[1])

    @given(st.integers(1, 60), st.integers(1, 60), st.integers(1, 15))
    def test_count_formula(self, length, window, stride):
        if window > length:
            with pytest.raises(ConfigError):
                overlap_segments(np.zeros(length), window, stride)
            return
        segs = overlap_segments(np.arange(length), window, stride)
        assert len(segs) == (length - window) // stride + 1
        for a, b in zip(segs, segs[1:]):
            assert b[0] - a[0] == stride

    def test_labels_majority_and_ties(self):
        timeline = [0, 0, 3, 3, 3, 0, 0, 0]
        assert segment_labels(timeline, 4, 1) == [0, 3, 3, 0, 0]
        # window [0, 3] and [3, 0] pairs tie -> background
        assert segment_labels([0, 3, 3, 0], 2, 1) == [0, 3, 0]


class TestRecording:
    def test_empty(self):
        series, timeline = synthesize_recording([], 0, 200, seed=1)
        assert series.shape == (200,) and np.all(timeline == 0)
        assert np.std(series) < 0.2

    def test_one_command(self):
        _, timeline = synthesize_recording([(4, 50)], 0, 200, command_length=12)
        assert np.array_equal(np.flatnonzero(timeline), np.arange(50, 62))
        assert set(timeline[50:62]) == {4}

    def test_five_commands_hundred_events(self):
        rng = np.random.default_rng(3)
        commands = random_commands(5, 3000, 10, 10, rng)
        spans = plan_insertions(commands, 100, 3000, np.random.default_rng(4))
        assert len(spans) == 105
        assert sum(label is None for _, _, label in spans) == 100
        ordered = sorted(spans)
        assert all(a[1] <= b[0] for a, b in zip(ordered, ordered[1:]))
        _, timeline = synthesize_recording(commands, 100, 3000, seed=4)
        assert (timeline != 0).sum() == 50
        for label, pos in commands:
            assert set(timeline[pos : pos + 10]) == {label}

    def test_infeasible(self):
        with pytest.raises(ConfigError, match="could not place"):
            synthesize_recording([], 20, 100, event_length=10)

    def test_command_out_of_range(self):
        with pytest.raises(ConfigError):
            synthesize_recording([(1, 195)], 0, 200, command_length=10)

    def test_keyword_stream(self):
        s = generate_keyword_stream(num_commands=3, noise_events=10, length=400, seed=2)
        assert len(s) == 400 - 10 + 1
        assert any(x.label != 0 for x in s)


class TestJsonl:
    def test_roundtrip(self, tmp_path):
        s = generate_scene_stream(SceneSpec(2, 3, seed=1))
        write_stream(s, tmp_path / "s.jsonl")
        back = read_stream(tmp_path / "s.jsonl")
        assert stream_digest(back) == stream_digest(s)
        assert all(np.array_equal(a.input, b.input) and a.label == b.label for a, b in zip(s, back))

    def test_line_format(self, tmp_path):
        write_stream([StreamSample(np.array([1.5, 2.0]), 1, 0)], tmp_path / "x.jsonl")
        assert (tmp_path / "x.jsonl").read_text() == '{"input":[1.5,2.0],"label":1,"scene":0}\n'

    def test_bad_line(self, tmp_path):
        (tmp_path / "b.jsonl").write_text('{"input":[1],"label":0}\n{"input":[1,2],"label":0}\n')
        with pytest.raises(ConfigError, match=":2:"):
            read_stream(tmp_path / "b.jsonl")
