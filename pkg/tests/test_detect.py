from __future__ import annotations

import io
import json

import numpy as np
import pytest

from oracles import brute_open_close, direct_blur
from setsense.detect import (
    BackgroundModel,
    DetectionStreamError,
    Detector,
    background_subtract,
    detection_stream_lines,
    find_contours,
    frame_from_array,
    gaussian_blur,
    ingest_detections,
    make_candidate,
    morph_clean,
    score_candidate,
    write_detections,
)
from setsense.geometry import NetCalibration


def _frame(pixels: np.ndarray, index: int = 0):
    return frame_from_array(pixels, index=index)


class TestGaussianBlur:
    def test_constant_frame_unchanged(self):
        frame = _frame(np.full((24, 32), 137.0))
        out = gaussian_blur(frame, 2.0)
        assert np.allclose(out.pixels, 137.0, atol=1e-9)

    def test_single_pixel_matches_direct_kernel(self):
        pixels = np.zeros((21, 21))
        pixels[10, 10] = 255.0
        out = gaussian_blur(_frame(pixels), 1.0)
        expected = direct_blur(pixels, 1.0)
        assert np.allclose(out.pixels, expected, atol=1e-9)
        # Center weight is the kernel's center value.
        assert out.pixels[10, 10] == pytest.approx(expected[10, 10])
        # Total intensity conserved well within 0.5%.
        assert out.pixels.sum() == pytest.approx(255.0, rel=5e-3)

    def test_tiny_sigma_is_near_identity(self):
        rng = np.random.default_rng(3)
        pixels = rng.uniform(0, 255, size=(16, 16))
        out = gaussian_blur(_frame(pixels), 0.1)
        assert np.max(np.abs(out.pixels - pixels)) < 1.0
        assert np.allclose(out.pixels, direct_blur(pixels, 0.1), atol=1e-9)

    def test_random_frames_match_direct_convolution(self):
        rng = np.random.default_rng(5)
        for sigma in (0.7, 1.3):
            pixels = rng.uniform(0, 255, size=(12, 17))
            out = gaussian_blur(_frame(pixels), sigma)
            assert np.allclose(out.pixels, direct_blur(pixels, sigma), atol=1e-8)

    def test_conserves_total_intensity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            pixels = rng.uniform(0, 255, size=(20, 30))
            out = gaussian_blur(_frame(pixels), float(rng.uniform(0.5, 4.0)))
            assert out.pixels.sum() == pytest.approx(pixels.sum(), rel=5e-3)

    def test_rejects_bad_sigma(self):
        frame = _frame(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            gaussian_blur(frame, 0.0)
        with pytest.raises(ValueError):
            gaussian_blur(frame, -1.0)


class TestBackgroundSubtract:
    def test_identical_frame_all_background(self):
        mean = np.full((10, 10), 100.0)
        frame = _frame(mean.copy())
        mask, _ = background_subtract(frame, BackgroundModel(mean=mean))
        assert not mask.any()

    def test_bright_pixel_is_foreground(self):
        mean = np.full((10, 10), 100.0)
        pixels = mean.copy()
        pixels[4, 7] += 50.0  # 2x the default threshold
        mask, _ = background_subtract(_frame(pixels), BackgroundModel(mean=mean))
        assert mask[4, 7]
        assert mask.sum() == 1

    def test_mean_converges_geometrically(self):
        target = np.full((8, 8), 200.0)
        model = BackgroundModel(mean=np.zeros((8, 8)), learning_rate=0.05)
        for _ in range(200):
            _, model = background_subtract(_frame(target.copy()), model)
        assert np.max(np.abs(model.mean - target)) < 1.0
        # Closed form: residual = (1 - lambda)^N * initial gap.
        expected_residual = 200.0 * (0.95**200)
        assert np.max(np.abs(model.mean - target)) == pytest.approx(expected_residual, rel=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            background_subtract(_frame(np.zeros((4, 4))), BackgroundModel(mean=np.zeros((5, 5))))


class TestMorphClean:
    def test_opening_removes_isolated_pixel(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[4, 4] = True
        out = morph_clean(mask, open_radius=1, close_radius=0)
        assert not out.any()

    def test_opening_preserves_solid_square(self):
        mask = np.zeros((30, 30), dtype=bool)
        mask[5:25, 5:25] = True
        out = morph_clean(mask, open_radius=1, close_radius=0)
        assert out[6:24, 6:24].all()

    def test_closing_merges_nearby_squares(self):
        mask = np.zeros((30, 30), dtype=bool)
        mask[10:20, 4:14] = True
        mask[10:20, 15:25] = True  # one-pixel gap
        out = morph_clean(mask, open_radius=0, close_radius=1)
        assert out[10:20, 4:25].all()
        assert np.array_equal(out, brute_open_close(mask, 0, 1))

    def test_zero_radii_identity(self):
        rng = np.random.default_rng(11)
        mask = rng.random((12, 12)) < 0.4
        assert np.array_equal(morph_clean(mask, 0, 0), mask)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            mask = rng.random((14, 18)) < rng.uniform(0.2, 0.6)
            for opens, closes in ((1, 0), (0, 1), (1, 1), (2, 1)):
                got = morph_clean(mask, opens, closes)
                expected = brute_open_close(mask, opens, closes)
                assert np.array_equal(got, expected)

    def test_opening_anti_extensive_closing_extensive(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            mask = rng.random((20, 24)) < rng.uniform(0.1, 0.7)
            opened = morph_clean(mask, open_radius=1, close_radius=0)
            closed = morph_clean(mask, open_radius=0, close_radius=1)
            assert not (opened & ~mask).any()  # opening never adds
            assert (mask & ~closed).sum() == 0  # closing never removes


class TestFindContours:
    def test_empty_mask(self):
        assert find_contours(np.zeros((10, 10), dtype=bool)) == []

    def test_disk_region(self):
        yy, xx = np.indices((64, 64))
        mask = (xx - 32) ** 2 + (yy - 32) ** 2 <= 100
        regions = find_contours(mask)
        assert len(regions) == 1
        region = regions[0]
        assert region.area == mask.sum()
        assert region.area == pytest.approx(np.pi * 100, rel=0.05)
        assert region.circularity > 0.8
        assert region.centroid.x == pytest.approx(32, abs=0.5)
        assert region.centroid.y == pytest.approx(32, abs=0.5)
        assert region.score == 0.0

    def test_two_disjoint_components(self):
        mask = np.zeros((20, 20), dtype=bool)
        mask[2:5, 2:5] = True
        mask[10:14, 10:14] = True
        regions = find_contours(mask)
        assert len(regions) == 2

    def test_diagonal_pixels_are_one_component(self):
        mask = np.zeros((6, 6), dtype=bool)
        mask[1, 1] = mask[2, 2] = mask[3, 3] = True
        assert len(find_contours(mask)) == 1

    def test_areas_sum_to_foreground_count(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            mask = rng.random((16, 16)) < 0.35
            regions = find_contours(mask)
            assert sum(r.area for r in regions) == mask.sum()


class TestScoreCandidate:
    def _region(self, area: float, circularity: float):
        return make_candidate(100.0, 100.0, area, circularity, 0.0)

    def test_circular_in_band(self):
        assert score_candidate(self._region(300, 0.9), min_area=40, max_area=1200) >= 0.8

    def test_huge_area_scores_zero(self):
        assert score_candidate(self._region(12000, 0.9), min_area=40, max_area=1200) == 0.0

    def test_zero_circularity_scores_zero(self):
        assert score_candidate(self._region(300, 0.0), min_area=40, max_area=1200) == 0.0

    def test_linear_decay_below_band(self):
        # Midpoint of [0.5 * min, min] decays to half.
        got = score_candidate(self._region(30, 1.0), min_area=40, max_area=1200)
        assert got == pytest.approx(0.5)

    def test_linear_decay_above_band(self):
        got = score_candidate(self._region(1800, 1.0), min_area=40, max_area=1200)
        assert got == pytest.approx(0.5)


class TestDetectionStream:
    def test_empty_stream(self):
        assert ingest_detections(io.StringIO(""), 720) == []

    def test_round_trip_identity(self, tmp_path):
        records = [
            type(r)(frame_index=r.frame_index, candidates=r.candidates)
            for r in ingest_detections(
                io.StringIO(
                    json.dumps({"frame": 0, "candidates": [
                        {"x": 100.5, "y": 200.25, "area": 310.0, "circularity": 0.84, "score": 0.91}
                    ]})
                    + "\n"
                    + json.dumps({"frame": 1, "candidates": []})
                ),
                720,
            )
        ]
        path = tmp_path / "stream.ndjson"
        write_detections(records, path, 720)
        assert ingest_detections(path, 720) == records

    def test_out_of_order_frames_rejected(self):
        lines = [
            json.dumps({"frame": 2, "candidates": []}),
            json.dumps({"frame": 1, "candidates": []}),
        ]
        with pytest.raises(DetectionStreamError, match="line 2"):
            ingest_detections(lines, 720)

    def test_malformed_line_names_line_number(self):
        lines = [json.dumps({"frame": 0, "candidates": []}), "{broken"]
        with pytest.raises(DetectionStreamError, match="line 2"):
            ingest_detections(lines, 720)

    def test_missing_fields_rejected(self):
        with pytest.raises(DetectionStreamError, match="line 1"):
            ingest_detections([json.dumps({"frame": 0})], 720)

    def test_candidate_out_of_frame_rejected(self):
        lines = [json.dumps({"frame": 0, "candidates": [
            {"x": 1, "y": 900, "area": 10, "circularity": 0.5, "score": 0.5}
        ]})]
        with pytest.raises(DetectionStreamError, match="outside"):
            ingest_detections(lines, 720)

    def test_y_axis_flipped_on_ingest(self):
        lines = [json.dumps({"frame": 0, "candidates": [
            {"x": 10, "y": 20, "area": 10, "circularity": 0.5, "score": 0.5}
        ]})]
        records = ingest_detections(lines, 720)
        assert records[0].candidates[0].centroid.y == 700

    def test_stream_lines_emit_image_coordinates(self):
        record = ingest_detections(
            [json.dumps({"frame": 0, "candidates": [
                {"x": 10.0, "y": 20.0, "area": 9.0, "circularity": 0.5, "score": 0.5}
            ]})],
            720,
        )[0]
        line = next(iter(detection_stream_lines([record], 720)))
        assert json.loads(line)["candidates"][0]["y"] == 20.0


class TestDetectorChain:
    def _ball_frames(self, n: int = 12, size=(120, 160)):
        """A bright disk marching across a static noisy background."""
        rng = np.random.default_rng(23)
        h, w = size
        yy, xx = np.indices((h, w), dtype=float)
        background = 90.0 + 20.0 * xx / w
        frames = []
        positions = []
        for i in range(n):
            cx, cy = 20.0 + 9.0 * i, 30.0 + 4.0 * i
            pixels = background + rng.normal(0, 2.0, size=(h, w))
            disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= 36.0
            pixels[disk] = 230.0
            frames.append(frame_from_array(np.clip(pixels, 0, 255), index=i))
            positions.append((cx, cy))
        return frames, positions

    def test_tracks_moving_disk(self):
        frames, positions = self._ball_frames()
        detector = Detector(min_area=40, max_area=400)
        records = [detector.process(f) for f in frames]
        assert records[0].candidates == ()  # first frame seeds the model
        h = frames[0].height
        # The model seed contains the ball, leaving a stationary ghost at the
        # start position; once the disk separates from it, every frame must
        # contain a well-scored candidate on the true position.
        for record, (cx, cy) in list(zip(records, positions))[2:]:
            assert len(record.candidates) >= 1
            best = min(
                record.candidates,
                key=lambda c: (c.centroid.x - cx) ** 2 + ((h - c.centroid.y) - cy) ** 2,
            )
            assert best.centroid.x == pytest.approx(cx, abs=3.0)
            assert h - best.centroid.y == pytest.approx(cy, abs=3.0)
            assert best.score > 0.5

    def test_chain_is_deterministic(self):
        frames, _ = self._ball_frames(n=6)
        first = [Detector(min_area=40, max_area=400).process(f) for f in frames]
        second = [Detector(min_area=40, max_area=400).process(f) for f in frames]
        assert first == second

    def test_candidate_cap(self):
        rng = np.random.default_rng(31)
        h, w = 120, 160
        base = np.full((h, w), 100.0)
        detector = Detector(min_area=1, max_area=200, max_candidates=5)
        detector.process(frame_from_array(base, index=0))
        speckled = base.copy()
        for _ in range(20):
            y, x = rng.integers(5, h - 5), rng.integers(5, w - 5)
            speckled[y : y + 3, x : x + 3] = 220.0
        record = detector.process(frame_from_array(speckled, index=1))
        assert len(record.candidates) <= 5
        scores = [c.score for c in record.candidates]
        assert scores == sorted(scores, reverse=True)


class TestEndToEndFromFrames:
    def test_rendered_round_classifies_to_truth(self):
        from setsense.classify import TacticLabel
        from setsense.config import EngineConfig, SimulatorConfig
        from setsense.rotation import RoundKey, Team
        from setsense.simulate import (
            LabeledRound,
            NoiseConfig,
            default_templates,
            generate_round,
            render_round_frames,
            run_pipeline,
        )
        from setsense.track import FilterMode

        cal = NetCalibration.from_image_coords(lnx=120, rnx=520, uny=90, lny=240, frame_height=360)
        sim = SimulatorConfig(frame_width=640.0)
        config = EngineConfig(calibration=cal, simulator=sim)
        template = default_templates(cal)[TacticLabel.QUICK]
        round_ = generate_round(
            template, NoiseConfig(seed=4), cal, RoundKey(1, 1, Team.B), sim=sim
        )
        frames = render_round_frames(round_, cal, sim)
        detector = Detector()
        records = [detector.process(f) for f in frames]
        detected_round = LabeledRound(
            records=tuple(records),
            truth=round_.truth,
            round_key=round_.round_key,
            truth_back_row=round_.truth_back_row,
        )
        assert run_pipeline(detected_round, FilterMode.PLUS, config) is TacticLabel.QUICK
