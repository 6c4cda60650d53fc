"""Preference matrix, image degradation, and the evaluation run."""

import hashlib
import io
import json

import numpy as np
import pytest
from PIL import Image

from abcarm.errors import DecodeError, RangeError, SchemaError, UnknownStimulus
from abcarm.evaluate import (
    DegradationSpec,
    PreferenceMatrix,
    SCENARIO_LABELS,
    decode_image,
    default_scenarios,
    degrade_image,
    degrade_pixels,
    load_manifest,
    emit_report,
    run_eval,
    scenarios_by_label,
)
from abcarm.fixtures import (
    DEFAULT_STIMULI,
    EXTRA_RESPONSE_LABEL,
    build_eval_corpus,
    build_preference_matrix,
    corrupt_mock,
    make_stimulus_image,
)
from abcarm.recommend import MockVisionBackend


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


class TestPreferenceMatrix:
    def test_rank_sorts_by_score(self):
        matrix = PreferenceMatrix(
            {"greet": {"shake hand": 68, "wave hand": 40, "hug": 35, "pat": 20}}
        )
        assert matrix.rank("greet") == ["shake hand", "wave hand", "hug"]

    def test_ties_break_lexicographically(self):
        matrix = PreferenceMatrix({"x": {"b": 30, "a": 30, "c": 30, "d": 30}})
        assert matrix.rank("x") == ["a", "b", "c"]

    def test_unknown_stimulus(self):
        matrix = PreferenceMatrix({"x": {"a": 20, "b": 21}})
        with pytest.raises(UnknownStimulus):
            matrix.rank("y")

    def test_cell_range_enforced(self):
        with pytest.raises(RangeError):
            PreferenceMatrix({"x": {"a": 13}})  # below 14 participants * 1
        with pytest.raises(RangeError):
            PreferenceMatrix({"x": {"a": 71}})

    def test_rank_is_permutation_prefix(self):
        matrix = build_preference_matrix()
        for stimulus in matrix.stimuli:
            top3 = matrix.rank(stimulus)
            assert len(top3) == 3 and len(set(top3)) == 3
            assert set(top3) <= set(matrix.responses_for(stimulus))

    def test_mirrored_gesture_is_rank_one(self):
        matrix = build_preference_matrix()
        assert matrix.rank("wave hand")[0] == "wave hand"
        for stimulus in matrix.stimuli:
            assert matrix.rank(stimulus)[0] == stimulus

    def test_extra_response_participates_in_ranking(self):
        matrix = build_preference_matrix()
        extra_stimulus = DEFAULT_STIMULI[2]
        assert EXTRA_RESPONSE_LABEL in matrix.responses_for(extra_stimulus)
        assert matrix.rank(extra_stimulus)[1] == EXTRA_RESPONSE_LABEL

    def test_csv_round_trip(self, tmp_path):
        corpus = build_eval_corpus(tmp_path)
        matrix = PreferenceMatrix.load_csv(corpus["preferences"])
        reference = build_preference_matrix()
        assert matrix.stimuli == reference.stimuli
        for stimulus in matrix.stimuli:
            assert matrix.scores[stimulus] == reference.scores[stimulus]

    def test_csv_schema_errors(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("stimulus,a,a\nx,20,21\n")
        with pytest.raises(SchemaError):
            PreferenceMatrix.load_csv(path)
        path.write_text("stimulus,a,b\nx,twenty,21\n")
        with pytest.raises(SchemaError):
            PreferenceMatrix.load_csv(path)
        path.write_text("stimulus,a,b\nx,20,90\n")
        with pytest.raises(RangeError):
            PreferenceMatrix.load_csv(path)


class TestDegradation:
    def test_zero_gain_blacks_out(self):
        pixels = np.full((16, 16, 3), 200, dtype=np.uint8)
        out = degrade_pixels(pixels, DegradationSpec("underexposed", gain=0.0))
        assert out.shape == pixels.shape
        assert np.all(out == 0)

    def test_identity_pipeline_is_identity_on_pixels(self):
        rng = np.random.default_rng(3)
        pixels = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        out = degrade_pixels(pixels, DegradationSpec("normal"))
        assert np.array_equal(out, pixels)

    def test_identity_pipeline_byte_identical_bytes(self):
        data = make_stimulus_image("wave hand")
        assert degrade_image(data, DegradationSpec("normal")) == data

    def test_gain_two_clamps_mid_gray(self):
        # per-pixel oracle over a 16x16 synthetic image
        pixels = np.full((16, 16, 3), 128, dtype=np.uint8)
        out = degrade_pixels(pixels, DegradationSpec("overexposed", gain=2.0))
        oracle = np.clip(pixels.astype(float) * 2.0, 0, 255).astype(np.uint8)
        assert np.array_equal(out, oracle)
        assert np.all(out == 255)

    def test_gain_applied_per_pixel_with_clamp(self):
        rng = np.random.default_rng(4)
        pixels = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        out = degrade_pixels(pixels, DegradationSpec("overexposed", gain=1.5))
        oracle = np.rint(np.clip(pixels.astype(float) * 1.5, 0, 255)).astype(np.uint8)
        assert np.array_equal(out, oracle)

    def test_horizontal_motion_blur_averages_rows(self):
        # an image constant along x is invariant under horizontal blur
        pixels = np.tile(np.arange(0, 160, 10, dtype=np.uint8).reshape(-1, 1), (1, 16))
        out = degrade_pixels(pixels, DegradationSpec("low_motion_blur", blur_len=5))
        assert np.array_equal(out, pixels)
        # but a vertical-gradient image is NOT invariant under vertical blur
        spun = degrade_pixels(
            pixels, DegradationSpec("low_motion_blur", blur_len=5, blur_angle_deg=90.0)
        )
        assert not np.array_equal(spun, pixels)

    def test_crop_reduces_dimensions(self):
        pixels = np.zeros((40, 40, 3), dtype=np.uint8)
        out = degrade_pixels(pixels, DegradationSpec("partial_subject", crop=(0.25, 0.0, 0.5, 1.0)))
        assert out.shape == (40, 20, 3)

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            DegradationSpec("x", gain=5.0)
        with pytest.raises(ValueError):
            DegradationSpec("x", blur_len=0)
        with pytest.raises(ValueError):
            DegradationSpec("x", crop=(0.0, 0.0, 0.0, 1.0))

    def test_undecodable_input(self):
        with pytest.raises(DecodeError):
            decode_image(b"not an image at all")
        with pytest.raises(DecodeError):
            degrade_image(b"junk", DegradationSpec("overexposed", gain=2.0))

    def test_nine_scenarios_defined(self):
        labels = [s.label for s in default_scenarios()]
        assert labels == list(SCENARIO_LABELS)
        assert len(labels) == 9
        with pytest.raises(SchemaError):
            scenarios_by_label(["nonexistent"])

    def test_degradation_deterministic(self):
        data = make_stimulus_image("hug")
        spec = DegradationSpec("high_motion_blur", blur_len=31)
        assert degrade_image(data, spec) == degrade_image(data, spec)


class TestRunEval:
    @pytest.fixture
    def corpus(self, tmp_path):
        paths = build_eval_corpus(tmp_path)
        manifest = load_manifest(paths["manifest"])
        matrix = PreferenceMatrix.load_csv(paths["preferences"])
        mock = json.loads(paths["mock"].read_text())
        return manifest, matrix, mock

    def test_faithful_mock_gives_perfect_rate(self, corpus):
        manifest, matrix, mock = corpus
        report = run_eval(manifest, matrix, MockVisionBackend(mock))
        overall = report.overall()
        assert overall.cells == 11 * 9
        assert overall.failed == 0
        assert overall.top1_match_rate == 1.0

    def test_corrupted_mock_shape(self, corpus):
        manifest, matrix, mock = corpus
        blur = scenarios_by_label(["high_motion_blur"])[0]
        wrong = corrupt_mock(mock, manifest, matrix, blur, [e.stimulus for e in manifest[:3]])
        report = run_eval(manifest, matrix, MockVisionBackend(wrong))
        assert report.scenario_aggregate("high_motion_blur").top1_match_rate == pytest.approx(8 / 11)
        for label in SCENARIO_LABELS:
            if label != "high_motion_blur":
                assert report.scenario_aggregate(label).top1_match_rate == 1.0
        # (11*9 - 3) matches out of 99 evaluated cells
        assert report.overall().top1_matches == 96

    def test_backend_errors_marked_failed_not_fatal(self, corpus):
        manifest, matrix, mock = corpus
        # remove the "normal" digests: those cells fail, everything else runs
        for entry in manifest:
            digest = hashlib.sha256(entry.image.read_bytes()).hexdigest()
            mock.pop(digest, None)
        report = run_eval(manifest, matrix, MockVisionBackend(mock))
        normal = report.scenario_aggregate("normal")
        assert normal.failed == 11 and normal.top1_match_rate is None
        assert report.scenario_aggregate("overexposed").top1_match_rate == 1.0

    def test_empty_manifest_rate_is_null(self, corpus):
        _, matrix, mock = corpus
        report = run_eval([], matrix, MockVisionBackend(mock))
        assert report.cells == []
        assert report.overall().top1_match_rate is None
        assert json.loads(json.dumps(report.as_dict()))["overall"]["top1_match_rate"] is None

    def test_latency_mean_matches_independent_sum(self, corpus):
        manifest, matrix, mock = corpus
        report = run_eval(manifest, matrix, MockVisionBackend(mock))
        latencies = [c.latency_s for c in report.cells if c.error is None]
        assert report.overall().mean_latency_s == pytest.approx(sum(latencies) / len(latencies))

    def test_parallel_matches_serial(self, corpus):
        manifest, matrix, mock = corpus
        serial = run_eval(manifest, matrix, MockVisionBackend(mock), parallel=1)
        threaded = run_eval(manifest, matrix, MockVisionBackend(mock), parallel=4)
        key = lambda r: [(c.stimulus, c.scenario, c.suggestions, c.top1_match) for c in r.cells]
        assert key(serial) == key(threaded)

    def test_top3_overlap_counted(self, corpus):
        manifest, matrix, mock = corpus
        report = run_eval(manifest, matrix, MockVisionBackend(mock),
                          scenarios_by_label(["normal"]))
        for cell in report.cells:
            assert cell.top3_overlap == 2  # mock answers the human top two


class TestReports:
    def build_report(self, tmp_path):
        paths = build_eval_corpus(tmp_path)
        manifest = load_manifest(paths["manifest"])
        matrix = PreferenceMatrix.load_csv(paths["preferences"])
        mock = MockVisionBackend(json.loads(paths["mock"].read_text()))
        return run_eval(manifest, matrix, mock, scenarios_by_label(["normal", "overexposed"]))

    def test_json_report_deterministic_and_complete(self, tmp_path):
        report = self.build_report(tmp_path)
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        emit_report(report, "json", out1)
        doc = json.loads(out1.read_text())
        assert doc["overall"]["top1_match_rate"] == 1.0
        assert set(doc["scenarios"]) == {"normal", "overexposed"}
        assert len(doc["cells"]) == 22
        # latency varies run to run; determinism means same report -> same bytes
        emit_report(report, "json", out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_markdown_report_has_scenario_table(self, tmp_path):
        report = self.build_report(tmp_path)
        out = tmp_path / "report.md"
        emit_report(report, "markdown", out)
        text = out.read_text()
        assert "| scenario |" in text
        assert "| normal |" in text
        assert "| overexposed |" in text

    def test_manifest_validation(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps([{"image": "missing.png", "stimulus": "x"}]))
        with pytest.raises(SchemaError):
            load_manifest(path)
        path.write_text("{}")
        with pytest.raises(SchemaError):
            load_manifest(path)


class TestCli:
    def test_eval_cli_end_to_end(self, tmp_path, capsys):
        from abcarm.cli import eval_main

        paths = build_eval_corpus(tmp_path)
        out = tmp_path / "report.json"
        code = eval_main([
            "--manifest", str(paths["manifest"]),
            "--preferences", str(paths["preferences"]),
            "--backend", f"mock:{paths['mock']}",
            "--scenarios", "normal,underexposed,high_motion_blur",
            "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["overall"]["top1_match_rate"] == 1.0
        assert set(doc["scenarios"]) == {"normal", "underexposed", "high_motion_blur"}
        assert "top-1 match rate 1.000" in capsys.readouterr().out

    def test_eval_cli_markdown_and_parallel(self, tmp_path):
        from abcarm.cli import eval_main

        paths = build_eval_corpus(tmp_path)
        out = tmp_path / "report.md"
        code = eval_main([
            "--manifest", str(paths["manifest"]),
            "--preferences", str(paths["preferences"]),
            "--backend", f"mock:{paths['mock']}",
            "--out", str(out),
            "--format", "markdown",
            "--parallel", "4",
        ])
        assert code == 0
        assert "| scenario |" in out.read_text()

    def test_fixtures_module_cli(self, tmp_path, capsys):
        from abcarm.fixtures import main

        assert main(["--out", str(tmp_path / "corpus")]) == 0
        assert (tmp_path / "corpus" / "manifest.json").exists()
