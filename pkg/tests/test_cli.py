from __future__ import annotations

import json

import cv2
import numpy as np
import pytest

from setsense.cli import main
from setsense.config import EngineConfig, SimulatorConfig
from setsense.classify import TacticLabel
from setsense.detect import ingest_detections
from setsense.geometry import NetCalibration
from setsense.rotation import RoundKey, Team
from setsense.simulate import NoiseConfig, default_templates, generate_round, render_round_frames


class TestSimulateAndEvaluate:
    def test_simulate_then_evaluate(self, tmp_path):
        dataset = tmp_path / "dataset"
        assert main(["simulate", "--count", "16", "--seed", "3", "--out", str(dataset)]) == 0
        assert (dataset / "manifest.json").exists()
        assert len(list(dataset.glob("*.ndjson"))) == 16

        report_path = tmp_path / "report.json"
        assert main([
            "evaluate", "--dataset", str(dataset), "--mode", "plus", "--report", str(report_path)
        ]) == 0
        report = json.loads(report_path.read_text())
        assert report["total"] == 16
        assert report["accuracy"] == 1.0

    def test_noise_file_applied(self, tmp_path):
        noise_path = tmp_path / "noise.json"
        noise_path.write_text(json.dumps({"tail_fp_count": 3, "clutter_rate": 0.5}))
        dataset = tmp_path / "dataset"
        assert main([
            "simulate", "--count", "8", "--seed", "5", "--noise", str(noise_path), "--out", str(dataset)
        ]) == 0
        manifest = json.loads((dataset / "manifest.json").read_text())
        assert manifest["noise"]["tail_fp_count"] == 3

        base_report = tmp_path / "baseline.json"
        plus_report = tmp_path / "plus.json"
        assert main(["evaluate", "--dataset", str(dataset), "--mode", "baseline", "--report", str(base_report)]) == 0
        assert main(["evaluate", "--dataset", str(dataset), "--mode", "plus", "--report", str(plus_report)]) == 0
        baseline = json.loads(base_report.read_text())
        plus = json.loads(plus_report.read_text())
        assert plus["accuracy"] > baseline["accuracy"]

    def test_template_overrides(self, tmp_path):
        overrides = tmp_path / "templates.json"
        overrides.write_text(json.dumps({"quick": {"duration_range": [24, 24]}}))
        dataset = tmp_path / "dataset"
        assert main([
            "simulate", "--count", "8", "--seed", "7", "--templates", str(overrides), "--out", str(dataset)
        ]) == 0


class TestBatch:
    def test_batch_clean_exit_zero(self, tmp_path, capsys):
        dataset = tmp_path / "dataset"
        main(["simulate", "--count", "8", "--seed", "11", "--out", str(dataset)])
        report_path = tmp_path / "report.json"
        code = main(["batch", "--in", str(dataset), "--mode", "plus", "--out", str(report_path)])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert len(report["rounds"]) == 8
        assert report["warnings"] == []

    def test_batch_warns_and_exits_two_on_bad_filename(self, tmp_path, capsys):
        dataset = tmp_path / "dataset"
        main(["simulate", "--count", "4", "--seed", "13", "--out", str(dataset)])
        (dataset / "oops.ndjson").write_text("{}\n")
        report_path = tmp_path / "report.json"
        code = main(["batch", "--in", str(dataset), "--out", str(report_path)])
        assert code == 2
        report = json.loads(report_path.read_text())
        assert len(report["rounds"]) == 4
        assert any("oops" in w for w in report["warnings"])
        assert "oops" in capsys.readouterr().err


class TestDetect:
    def test_detect_writes_ingestible_stream(self, tmp_path):
        cal = NetCalibration.from_image_coords(lnx=120, rnx=520, uny=90, lny=240, frame_height=360)
        sim = SimulatorConfig(frame_width=640.0)
        config = EngineConfig(calibration=cal, simulator=sim)
        template = default_templates(cal)[TacticLabel.OUTSIDE]
        round_ = generate_round(template, NoiseConfig(seed=2), cal, RoundKey(1, 1, Team.B), sim=sim)
        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        for i, frame in enumerate(render_round_frames(round_, cal, sim)):
            cv2.imwrite(str(frames_dir / f"frame_{i:04d}.png"), frame.pixels.astype(np.uint8))

        out = tmp_path / "stream.ndjson"
        assert main(["detect", "--video-frames", str(frames_dir), "--out", str(out)]) == 0
        records = ingest_detections(out, 360.0)
        assert len(records) == len(round_.records)
        assert sum(len(r.candidates) for r in records) > 0

    def test_detect_empty_dir_fails(self, tmp_path):
        empty = tmp_path / "frames"
        empty.mkdir()
        assert main(["detect", "--video-frames", str(empty), "--out", str(tmp_path / "s.ndjson")]) == 1
