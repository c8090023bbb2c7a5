"""Command-line entry points: serve, batch, detect, simulate, evaluate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EngineConfig, load_config
from .detect import Detector, frame_from_array, write_detections
from .session import SessionManager, process_batch
from .simulate import (
    NoiseConfig,
    TacticTemplate,
    default_templates,
    evaluate,
    generate_dataset,
    load_dataset,
    write_dataset,
)
from .track import FilterMode


def _load_engine_config(path: str | None) -> EngineConfig:
    return load_config(path) if path else EngineConfig.default()


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    manager = SessionManager(data_dir=args.data_dir)
    app = create_app(manager, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_batch(args: argparse.Namespace) -> int:
    config = _load_engine_config(args.config)
    report = process_batch(
        args.input,
        config,
        mode=FilterMode(args.mode),
        out_path=args.out,
        warn=lambda msg: print(f"warning: {msg}", file=sys.stderr),
    )
    print(
        f"processed {len(report['rounds'])} round(s), "
        f"{len(report['warnings'])} warning(s) -> {args.out or 'stdout'}"
    )
    if args.out is None:
        json.dump(report, sys.stdout, indent=2)
        print()
    return 2 if report["warnings"] else 0


def _cmd_detect(args: argparse.Namespace) -> int:
    import cv2

    frames_dir = Path(args.video_frames)
    paths = sorted(
        p for p in frames_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")
    )
    if not paths:
        print(f"no image frames found in {frames_dir}", file=sys.stderr)
        return 1
    config = _load_engine_config(args.config)
    det = config.detector
    detector = Detector(
        blur_sigma=det.blur_sigma,
        learning_rate=det.learning_rate,
        bg_threshold=det.bg_threshold,
        open_radius=det.open_radius,
        close_radius=det.close_radius,
        min_area=det.min_area,
        max_area=det.max_area,
        max_candidates=det.max_candidates,
    )
    records = []
    height = None
    for index, path in enumerate(paths):
        image = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
        if image is None:
            print(f"skipping unreadable image {path.name}", file=sys.stderr)
            continue
        height = image.shape[0]
        frame = frame_from_array(image, index=index, timestamp=index / args.fps)
        records.append(detector.process(frame))
    if height is None:
        print("no readable frames", file=sys.stderr)
        return 1
    write_detections(records, args.out, float(height))
    print(f"wrote {len(records)} record(s) to {args.out}")
    return 0


def _load_templates(path: str | None, config: EngineConfig):
    templates = default_templates(config.calibration)
    if path is None:
        return templates
    overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    for name, fields in overrides.items():
        label = _label(name)
        base = templates[label]
        templates[label] = TacticTemplate(
            label=label,
            start_x_range=tuple(fields.get("start_x_range", base.start_x_range)),
            end_x_range=tuple(fields.get("end_x_range", base.end_x_range)),
            apex_height_range=tuple(fields.get("apex_height_range", base.apex_height_range)),
            duration_range=tuple(fields.get("duration_range", base.duration_range)),
        )
    return templates


def _label(name: str):
    from .classify import TacticLabel

    return TacticLabel(name)


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_engine_config(args.config)
    noise = NoiseConfig()
    if args.noise:
        noise = NoiseConfig(**json.loads(Path(args.noise).read_text(encoding="utf-8")))
    templates = _load_templates(args.templates, config)
    rounds = generate_dataset(
        args.count, args.seed, config, noise=noise, templates=templates
    )
    manifest = write_dataset(rounds, config, args.out, noise=noise, seed=args.seed)
    print(f"wrote {len(rounds)} round(s) and {manifest.name} to {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    rounds, manifest = load_dataset(args.dataset)
    if args.config:
        config = load_config(args.config)
    else:
        from .config import engine_config_from_dict

        config = engine_config_from_dict(
            {
                "calibration": manifest["calibration"],
                "initial_positions": manifest.get("initial_positions"),
            }
        )
    report = evaluate(rounds, FilterMode(args.mode), config)
    Path(args.report).write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    print(
        f"{args.mode}: accuracy {report.accuracy:.2%} "
        f"({report.correct}/{report.total}, no-set {report.no_set}) -> {args.report}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setsense",
        description="Volleyball set-tactic detection and live match statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default="./setsense-data")
    p.add_argument("--static", default=None, help="optional console bundle to serve at /")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("batch", help="process a directory of detection streams")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--mode", choices=["baseline", "plus"], default="plus")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_batch)

    p = sub.add_parser("detect", help="run classical detection over decoded frames")
    p.add_argument("--video-frames", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--fps", type=float, default=24.0)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("simulate", help="generate a labeled synthetic dataset")
    p.add_argument("--templates", default=None, help="JSON template overrides")
    p.add_argument("--noise", default=None, help="JSON noise config")
    p.add_argument("--count", type=int, default=80)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="score a dataset against ground truth")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=["baseline", "plus"], default="plus")
    p.add_argument("--report", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
