"""Command-line entry point.

Subcommands: dataset, train, track, bench, serve, inspect.  A JSON config file
(--config or $HANDWAVE_CONFIG) supplies defaults; individual flags override.
Errors exit nonzero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, config as cfgmod, formats
from .bench import measure_latency, reference_profile, run_bench, run_variant
from .config import ConfigError
from .enhancer import FcnnModel, LabelParams, TrainSet, build_dataset, fcnn_train
from .pipeline import VARIANTS, PipelineSettings
from .service import NoteMap


def _fail(code: int, error: str, **extra):
    payload = {"error": error, **extra}
    print(json.dumps(payload), file=sys.stderr)
    raise SystemExit(code)


def _load_bundle(args):
    try:
        cfg = cfgmod.load_config(getattr(args, "config", None))
        overrides = {}
        if getattr(args, "seed", None) is not None:
            overrides["seed"] = args.seed
        if getattr(args, "noise_sigma", None) is not None:
            overrides["noise.sigma"] = args.noise_sigma
        if overrides:
            cfg = cfgmod.apply_overrides(cfg, overrides)
        return cfgmod.materialize(cfg)
    except ConfigError as exc:
        _fail(2, "invalid configuration", problems=exc.problems)
    except FileNotFoundError as exc:
        _fail(2, f"config file not found: {exc.filename}")
    except json.JSONDecodeError as exc:
        _fail(2, f"config file is not valid JSON: {exc}")


def _settings(bundle, model_path=None) -> PipelineSettings:
    raw = bundle.raw
    model = None
    if model_path:
        if not Path(model_path).exists():
            _fail(2, f"model file not found: {model_path}")
        model = formats.read_model(model_path)
    f = raw["filter"]
    return PipelineSettings(
        chirp=bundle.chirp, geometry=bundle.geometry, grid=bundle.grid,
        model=model, ring_capacity=raw["doppler"]["ring"],
        history=raw["doppler"]["history"], n_particles=f["particles"],
        gain_y=f["gain_y"], gain_z_base=f["gain_z_base"],
        diffusion_std=f["diffusion_std_m"], weight_std=f["weight_std_m"],
        resampler=f["resampler"])


def cmd_dataset(args):
    bundle = _load_bundle(args)
    raw = bundle.raw
    n_synth = args.n_synth if args.n_synth is not None else raw["enhancer"]["n_synthetic"]
    n_hifi = args.n_hifi if args.n_hifi is not None else raw["enhancer"]["n_hifi"]
    params = LabelParams(raw["enhancer"]["label_sigma_y_m"],
                         raw["enhancer"]["label_sigma_z_m"])
    train_set = build_dataset(
        n_synth, n_hifi, bundle.grid, bundle.chirp, bundle.geometry,
        noise_scale_range=(raw["noise"]["alpha_lo"], raw["noise"]["alpha_hi"]),
        p_range=(raw["noise"]["p_lo"], raw["noise"]["p_hi"]),
        seed=bundle.seed, label_params=params,
        noise_source=cfgmod.noise_source(raw))
    formats.write_dataset(args.out, train_set)
    print(json.dumps({"written": args.out, "pairs": len(train_set),
                      "synthetic": n_synth, "hifi": n_hifi, "seed": bundle.seed}))
    return 0


def cmd_train(args):
    bundle = _load_bundle(args)
    raw = bundle.raw
    enh = raw["enhancer"]
    if args.dataset:
        train_set = formats.read_dataset(args.dataset)
    else:
        n_synth = args.n_synth if args.n_synth is not None else enh["n_synthetic"]
        n_hifi = args.n_hifi if args.n_hifi is not None else enh["n_hifi"]
        params = LabelParams(enh["label_sigma_y_m"], enh["label_sigma_z_m"])
        train_set = build_dataset(
            n_synth, n_hifi, bundle.grid, bundle.chirp, bundle.geometry,
            noise_scale_range=(raw["noise"]["alpha_lo"], raw["noise"]["alpha_hi"]),
            p_range=(raw["noise"]["p_lo"], raw["noise"]["p_hi"]),
            seed=bundle.seed, label_params=params,
            noise_source=cfgmod.noise_source(raw))
    epochs = args.epochs if args.epochs is not None else enh["epochs"]
    model = FcnnModel.build(kernel_sizes=tuple(enh["kernel_sizes"]),
                            channels=tuple(enh["channels"]),
                            final_relu=enh["final_relu"], seed=bundle.seed)
    model, losses = fcnn_train(
        model, train_set, epochs=epochs, lr=enh["learning_rate"],
        batch_size=enh["batch_size"], seed=bundle.seed,
        log=lambda e, l: print(f"epoch {e}: loss {l:.6g}", file=sys.stderr))
    formats.write_model(args.out, model)
    print(json.dumps({"written": args.out, "epochs": epochs,
                      "pairs": len(train_set), "loss_curve": losses}))
    return 0


def cmd_track(args):
    bundle = _load_bundle(args)
    settings = _settings(bundle, args.model)
    if args.variant.startswith("fcnn") and settings.model is None:
        _fail(2, f"variant {args.variant} requires --model")
    profile = reference_profile(bundle.seed, n_samples=args.frames)
    raw = bundle.raw
    records, row = run_variant(
        profile, args.variant, settings, bundle.seed,
        noise_source=cfgmod.noise_source(raw),
        alpha_range=(raw["noise"]["alpha_lo"], raw["noise"]["alpha_hi"]),
        p_range=(raw["noise"]["p_lo"], raw["noise"]["p_hi"]))
    formats.write_track(args.out, records)
    print(json.dumps({"written": args.out, **row}))
    return 0


def cmd_bench(args):
    bundle = _load_bundle(args)
    settings = _settings(bundle, args.model)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            _fail(2, f"unknown variant {v!r}", known=list(VARIANTS))
        if v.startswith("fcnn") and settings.model is None:
            _fail(2, f"variant {v} requires --model")
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    else:
        seeds = [bundle.seed]
    raw = bundle.raw
    report = run_bench(seeds, variants, settings,
                       noise_source=cfgmod.noise_source(raw),
                       alpha_range=(raw["noise"]["alpha_lo"], raw["noise"]["alpha_hi"]),
                       p_range=(raw["noise"]["p_lo"], raw["noise"]["p_hi"]),
                       progress=(lambda row: print(json.dumps(row), file=sys.stderr))
                       if args.verbose else None)
    if args.out:
        formats.write_report(args.out, report)
    print(json.dumps(report["summary"], indent=2, sort_keys=True))
    return 0


def cmd_serve(args):
    bundle = _load_bundle(args)

    def factory(variant):
        settings = _settings(bundle, args.model)
        if variant.startswith("fcnn") and settings.model is None:
            raise FileNotFoundError(
                f"variant {variant} needs a model file; pass --model")
        return settings

    if args.replay:
        from .service import Session, replay_script
        settings = factory(args.variant)
        raw = bundle.raw
        session = Session("replay", args.variant, settings, seed=bundle.seed,
                          noise_scale=raw["service"]["noise_scale"],
                          hysteresis=raw["service"]["hysteresis"],
                          note_map=NoteMap.equal_lanes(
                              bundle.grid.z_min, bundle.grid.z_max,
                              raw["service"]["note_lanes"],
                              mode=raw["service"]["mode"]))
        out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
        try:
            count = 0
            for event in replay_script(args.replay, session):
                out.write(json.dumps(event) + "\n")
                count += 1
        finally:
            if args.out:
                out.close()
        print(json.dumps({"replayed": args.replay, "events": count}),
              file=sys.stderr)
        return 0

    import uvicorn

    from .server import create_app
    app = create_app(factory, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_inspect(args):
    try:
        summary = formats.inspect(args.path)
    except (ValueError, FileNotFoundError) as exc:
        _fail(2, str(exc))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="handwave",
        description="mmWave hand-tracking instrument: simulation, imaging, "
                    "enhancement, tracking, benchmarking, and the play service.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (default: $HANDWAVE_CONFIG)")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--noise-sigma", type=float,
                       help="override noise.sigma (Gaussian stand-in scale)")

    p = sub.add_parser("dataset", help="generate a training dataset directory")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-synth", type=int, default=None)
    p.add_argument("--n-hifi", type=int, default=None)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the enhancement network")
    common(p)
    p.add_argument("--dataset", help="existing dataset directory (else generated)")
    p.add_argument("--out", required=True, help="output .fcnn model path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--n-synth", type=int, default=None)
    p.add_argument("--n-hifi", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="track the reference profile offline")
    common(p)
    p.add_argument("--variant", default="dpf", choices=VARIANTS)
    p.add_argument("--model", help=".fcnn model for enhanced variants")
    p.add_argument("--frames", type=int, default=4096)
    p.add_argument("--out", required=True, help="output .track log path")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("bench", help="run the method-comparison benchmark")
    common(p)
    p.add_argument("action", nargs="?", default="run", choices=["run"],
                   help="benchmark action (default: run)")
    p.add_argument("--variants", default="simple,pf,dpf")
    p.add_argument("--seeds", help="comma-separated seeds (default: config seed)")
    p.add_argument("--model", help=".fcnn model for enhanced variants")
    p.add_argument("--out", help="write the full report JSON here")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the interactive play service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8137)
    p.add_argument("--variant", default="dpf", choices=VARIANTS,
                   help="variant for --replay mode")
    p.add_argument("--model", help=".fcnn model for enhanced variants")
    p.add_argument("--frontend", help="static frontend directory to serve")
    p.add_argument("--replay", help="headless mode: JSON-lines hand script")
    p.add_argument("--out", help="with --replay: write events here")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("inspect", help="summarize a handwave file")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except SystemExit:
        raise
    except Exception as exc:   # surface unexpected failures as machine-readable
        _fail(1, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
