"""Command-line entry point.

Subcommands: serve, simulate, rank, anchors, reliability, features, train,
evaluate, all. Global flags: --data-dir, --seed, --config (JSON file with
StudyConfig fields).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import MajornessError
from .pipeline import PipelineConfig, run_pipeline, simulate_study
from .service import StudyConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="majorness", description=__doc__)
    parser.add_argument("--data-dir", default="study", help="study data directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", default=None, help="JSON file with StudyConfig fields")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the annotation HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--frontend", default=None, help="built frontend directory to serve")

    sim = sub.add_parser("simulate", help="generate a synthetic study into the data dir")
    sim.add_argument("--items", type=int, default=100)
    sim.add_argument("--raters", type=int, default=10)
    sim.add_argument("--noise", type=float, default=0.1)
    sim.add_argument("--bias-sigma", type=float, default=0.0)

    for stage in ("rank", "anchors", "reliability", "features", "train", "evaluate", "all"):
        st = sub.add_parser(stage, help=f"run the {stage} pipeline stage")
        if stage in ("train", "all"):
            st.add_argument("--epochs", type=int, default=30)
            st.add_argument("--learning-rate", type=float, default=0.02)
            st.add_argument("--batch-size", type=int, default=16)
            st.add_argument("--holdout-frac", type=float, default=0.25)
    return parser


def _study_config(args) -> StudyConfig:
    if args.config:
        cfg = StudyConfig.from_file(args.config)
        return cfg
    return StudyConfig(data_dir=str(args.data_dir), seed=args.seed)


def _pipeline_config(args) -> PipelineConfig:
    cfg = PipelineConfig(
        data_dir=Path(args.data_dir),
        seed=args.seed,
        study=_study_config(args),
    )
    for attr in ("epochs", "learning_rate", "batch_size", "holdout_frac"):
        if hasattr(args, attr):
            setattr(cfg, attr, getattr(args, attr))
    return cfg


def _cmd_serve(args) -> int:
    import uvicorn

    from .ranking import anchors_from_text
    from .server import create_app
    from .service import StudyService

    data_dir = Path(args.data_dir)
    study_file = data_dir / "study.json"
    if not study_file.exists():
        print(f"no study.json in {data_dir}; run `majorness simulate` first", file=sys.stderr)
        return 2
    config = StudyConfig.from_file(study_file)
    item_ids = sorted(p.stem for p in (data_dir / "audio").glob("*.wav"))
    anchors_file = data_dir / "anchors.txt"
    anchors = anchors_from_text(anchors_file) if anchors_file.exists() else None
    service = StudyService(
        config,
        item_ids,
        anchors=anchors,
        audio_dir=data_dir / "audio",
        log_path=data_dir / "annotations.jsonl",
    )
    frontend = args.frontend or Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(service, frontend if Path(frontend).is_dir() else None)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        cfg = _pipeline_config(args)
        cfg.data_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            summary = simulate_study(
                cfg, args.items, args.raters, noise_sigma=args.noise, bias_sigma=args.bias_sigma
            )
        else:
            summary = run_pipeline(cfg, args.command)
        print(json.dumps(summary, sort_keys=True, indent=2))
        return 0
    except MajornessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
