"""ffgo command line: curate, dataset, lora, generate, cut, study.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or endpoint error.
Reports go to stdout (with --json variants); logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import canvas, frames, lora, manifest, pipeline, study, vlm
from .errors import FfgoError
from .study_server import StudyServer

log = logging.getLogger("ffgo")

CONFIG_NAME = "ffgo.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _load_workspace_config(workspace: str | None) -> dict:
    path = Path(workspace or ".") / CONFIG_NAME
    if path.is_file():
        return json.loads(path.read_text(encoding="utf-8"))
    return {}


def _resolve_backend(name: str, config: dict) -> pipeline.GeneratorBackend:
    if name == pipeline.MOCK_BACKEND:
        return pipeline.GeneratorBackend()
    entry = config.get("backends", {}).get(name)
    if entry is None:
        raise FfgoError(f"no backend profile named {name!r} (looked in {CONFIG_NAME})")
    return pipeline.GeneratorBackend(
        name=name,
        endpoint=entry["endpoint"],
        f_c=entry.get("f_c", 4),
        width=entry.get("width", 1280),
        height=entry.get("height", 720),
        timeout=entry.get("timeout", 600.0),
    )


def _resolve_vlm_client(args, config: dict) -> vlm.VlmClient:
    if args.mock:
        return vlm.MockVlmClient(seed=args.seed)
    profiles = config.get("adapters", [])
    for entry in profiles:
        if entry.get("name") == args.adapter:
            profile = vlm.AdapterProfile(
                name=entry["name"],
                base_url=entry["base_url"],
                auth_env_var=entry["auth_env_var"],
                model_id=entry["model_id"],
            )
            return vlm.HttpVlmClient(profile=profile)
    raise FfgoError(f"no adapter profile named {args.adapter!r} (use --mock for offline runs)")


def _parse_labels(raw: str) -> list[str]:
    labels = [part.strip() for part in raw.split(",") if part.strip()]
    if not labels:
        raise FfgoError(f"no usable labels in {raw!r}")
    return labels


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text.strip().lower()).strip("_") or "element"


# curate

def cmd_curate_crop(args) -> int:
    seq = frames.load_frames(args.input)
    cropped = frames.crop_head(seq, args.n)
    frames.write_frames(cropped, args.out, overwrite=args.force)
    print(f"wrote {cropped.frame_count} frames to {args.out}")
    return 0


def cmd_curate_extract(args, config) -> int:
    from .raster import load_rgb, save_png

    client = _resolve_vlm_client(args, config)
    image = load_rgb(args.image)
    names = _parse_labels(args.names)
    rasters = vlm.extract_elements(image, names, client)
    out_dir = Path(args.out_dir)
    written = []
    for i, (name, raster) in enumerate(zip(names, rasters)):
        path = out_dir / f"element_{i:02d}_{_slug(name)}.png"
        save_png(path, raster)
        written.append(str(path))
    print("\n".join(written))
    return 0


def cmd_curate_remove(args, config) -> int:
    from .raster import load_rgb, save_png

    client = _resolve_vlm_client(args, config)
    image = load_rgb(args.image)
    background = vlm.remove_objects(image, _parse_labels(args.names), client)
    save_png(args.out, background)
    print(args.out)
    return 0


def cmd_curate_key(args) -> int:
    from .raster import load_rgb, save_png

    layer = canvas.chroma_key(load_rgb(args.image), threshold=args.threshold, label=args.label)
    save_png(args.out, layer.pixels)
    print(args.out)
    return 0


def _load_element(spec_text: str) -> canvas.ElementLayer:
    from .raster import load_rgba

    if "=" in spec_text:
        label, _, path = spec_text.partition("=")
    else:
        label, path = Path(spec_text).stem, spec_text
    pixels = load_rgba(path)
    if (pixels[..., 3] == 255).all():
        # flat opaque input: key near-white so the cut-out floats on the canvas
        return canvas.chroma_key(pixels[..., :3], label=label)
    return canvas.ElementLayer.from_pixels(label, pixels)


def cmd_curate_compose(args) -> int:
    from .raster import load_rgb, save_png

    elements = [_load_element(e) for e in args.element]
    background = load_rgb(args.background)
    spec = canvas.CanvasSpec()
    plan = canvas.solve_layout(
        elements, (background.shape[1], background.shape[0]), spec
    )
    rendered = canvas.render_composite(plan, elements, background)
    save_png(args.out, rendered)
    if args.emit_plan:
        Path(args.emit_plan).write_text(plan.to_json() + "\n", encoding="utf-8")
    print(args.out)
    return 0


def cmd_curate_caption(args, config) -> int:
    from .raster import load_rgb

    client = _resolve_vlm_client(args, config)
    assets = [load_rgb(p) for p in args.asset]
    caption = vlm.generate_caption(assets, args.video_ref, client)
    print(caption)
    return 0


# dataset

def cmd_dataset_add(args) -> int:
    store = manifest.Manifest(args.manifest)
    caption = args.caption
    if args.caption_file:
        caption = Path(args.caption_file).read_text(encoding="utf-8").strip()
    sample = manifest.TrainingSample(
        composite_path=args.composite,
        caption=caption or "",
        category=args.category,
        source_video=args.source_video,
        frame_count=args.frame_count,
        element_labels=tuple(_parse_labels(args.labels)),
    )
    sample_id = store.add_sample(sample, check_files=not args.no_check_files)
    print(sample_id)
    return 0


def cmd_dataset_validate(args) -> int:
    store = manifest.Manifest(args.manifest)
    failures = {}
    for sample in store.samples:
        report = manifest.validate_sample(sample, check_files=not args.no_check_files)
        if report:
            failures[sample.id] = report
    if args.json:
        print(json.dumps({"samples": len(store), "failures": failures}, indent=2))
    else:
        for sid, report in failures.items():
            for violation in report:
                print(f"sample {sid}: {violation}")
        print(f"{len(store) - len(failures)}/{len(store)} samples valid")
    return 1 if failures else 0


def cmd_dataset_stats(args) -> int:
    store = manifest.Manifest(args.manifest)
    stats = manifest.category_stats(store)
    if args.json:
        print(json.dumps(stats, indent=2))
    else:
        for category, pct in stats.items():
            print(f"{category}: {pct}")
    return 0


def cmd_dataset_emit_config(args) -> int:
    store = manifest.Manifest(args.manifest) if args.manifest else None
    overrides = {}
    for item in args.set or []:
        key, _, value = item.partition("=")
        if not _:
            raise FfgoError(f"--set wants key=value, got {item!r}")
        overrides[key] = json.loads(value)
    text = manifest.emit_train_config(store, overrides, lora_alpha=args.alpha)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


# lora

def cmd_lora_init(args) -> int:
    adapter = lora.init_adapter(args.d, args.k, args.r, args.alpha, args.seed)
    lora.save_adapter(adapter, args.out)
    print(args.out)
    return 0


def cmd_lora_merge(args, direction: str) -> int:
    adapter = lora.load_adapter(args.adapter)
    weights = np.load(args.weights)
    op = lora.merge if direction == "merge" else lora.unmerge
    np.save(args.out, op(weights, adapter))
    print(args.out)
    return 0


def cmd_lora_check_grad(args) -> int:
    worst = 0.0
    for trial in range(args.trials):
        rng = np.random.Generator(np.random.PCG64(args.seed + trial))
        adapter = lora.LoraAdapter(
            a=rng.normal(size=(args.d, args.r)),
            b=rng.normal(size=(args.r, args.k)),
            alpha=args.alpha,
            rank=args.r,
        )
        upstream = rng.normal(size=(args.d, args.k))
        d_a, d_b = lora.grad(adapter, upstream)
        num_a, num_b = _finite_difference_grads(adapter, upstream, step=args.step)
        for analytic, numeric in ((d_a, num_a), (d_b, num_b)):
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
            worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    payload = {"trials": args.trials, "max_relative_error": worst, "pass": worst <= args.tolerance}
    if args.json:
        print(json.dumps(payload))
    else:
        print(f"max relative error {worst:.3e} over {args.trials} trials "
              f"({'OK' if payload['pass'] else 'FAIL'} at {args.tolerance})")
    return 0 if payload["pass"] else 1


def _finite_difference_grads(adapter, upstream, step=1e-5):
    """Central differences of L = <upstream, delta> wrt each factor entry."""

    def loss(a, b):
        m = lora.LoraAdapter(a=a, b=b, alpha=adapter.alpha, rank=adapter.rank)
        return float(np.sum(upstream * lora.delta(m)))

    num_a = np.zeros_like(adapter.a)
    for idx in np.ndindex(adapter.a.shape):
        bumped = adapter.a.copy()
        bumped[idx] += step
        up = loss(bumped, adapter.b)
        bumped[idx] -= 2 * step
        down = loss(bumped, adapter.b)
        num_a[idx] = (up - down) / (2 * step)
    num_b = np.zeros_like(adapter.b)
    for idx in np.ndindex(adapter.b.shape):
        bumped = adapter.b.copy()
        bumped[idx] += step
        up = loss(adapter.a, bumped)
        bumped[idx] -= 2 * step
        down = loss(adapter.a, bumped)
        num_b[idx] = (up - down) / (2 * step)
    return num_a, num_b


def cmd_lora_savings(args) -> int:
    lora_params, full_params, ratio = lora.param_savings(args.d, args.k, args.r)
    if args.json:
        print(json.dumps({"lora_params": lora_params, "full_params": full_params, "ratio": ratio}))
    else:
        print(f"adapter {lora_params:,} vs full {full_params:,} ({ratio:.4f})")
    return 0


# generate / cut

def cmd_generate(args, config) -> int:
    from .raster import load_rgba

    backend = _resolve_backend(args.backend, config)
    composite = load_rgba(args.composite)
    caption = Path(args.caption).read_text(encoding="utf-8").strip()
    request = pipeline.prepare_request(
        composite, caption, backend, args.seed, frames_requested=args.frames
    )
    raw = pipeline.invoke_generator(request, backend)
    if args.keep_raw:
        frames.write_frames(raw, Path(args.out).with_name(Path(args.out).name + "_raw"),
                            overwrite=args.force)
    cut = frames.clean_cut(raw, backend.f_c + args.extra_cut)
    frames.write_frames(cut, args.out, overwrite=args.force)
    print(f"wrote {cut.frame_count} frames to {args.out}")
    return 0


def cmd_cut(args) -> int:
    seq = frames.load_frames(args.input)
    cut = frames.clean_cut(seq, args.fc + args.extra_cut)
    frames.write_frames(cut, args.out, overwrite=args.force)
    print(f"wrote {cut.frame_count} frames to {args.out}")
    return 0


# study

def cmd_study_serve(args) -> int:
    server = StudyServer(
        args.data_dir, port=args.port, host=args.host, seed=args.seed, ui_dir=args.ui_dir
    )
    log.info("serving study on %s:%s", args.host, server.port)
    print(f"listening on http://{args.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_study_report(args) -> int:
    records = []
    for line in Path(args.annotations).read_text(encoding="utf-8").splitlines():
        if line.strip():
            record = study.AnnotationRecord.from_record(json.loads(line))
            study.validate_annotation(record)
            records.append(record)
    report = study.aggregate(records)
    text = report.to_json() if args.json else study.render_report(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="ffgo")
    parser.add_argument("--workspace", default=None, help="directory holding ffgo.json")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    curate = sub.add_parser("curate").add_subparsers(dest="curate_cmd", required=True)

    p = curate.add_parser("crop")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int, default=81)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")

    p = curate.add_parser("extract")
    p.add_argument("--image", required=True)
    p.add_argument("--names", required=True, help="comma-separated element names")
    p.add_argument("--adapter", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = curate.add_parser("remove")
    p.add_argument("--image", required=True)
    p.add_argument("--names", required=True)
    p.add_argument("--adapter", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = curate.add_parser("key")
    p.add_argument("--image", required=True)
    p.add_argument("--threshold", type=int, default=canvas.DEFAULT_CHROMA_THRESHOLD)
    p.add_argument("--label", default="")
    p.add_argument("--out", required=True)

    p = curate.add_parser("compose")
    p.add_argument("--element", action="append", required=True,
                   help="element PNG, optionally label=path; repeatable, order preserved")
    p.add_argument("--background", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-plan", default=None)

    p = curate.add_parser("caption")
    p.add_argument("--asset", action="append", required=True,
                   help="element / background PNG; repeatable")
    p.add_argument("--video-ref", default=None)
    p.add_argument("--adapter", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    dataset = sub.add_parser("dataset").add_subparsers(dest="dataset_cmd", required=True)

    p = dataset.add_parser("add")
    p.add_argument("--manifest", required=True)
    p.add_argument("--composite", required=True)
    p.add_argument("--caption", default=None)
    p.add_argument("--caption-file", default=None)
    p.add_argument("--category", required=True, choices=manifest.CATEGORIES)
    p.add_argument("--source-video", required=True)
    p.add_argument("--frame-count", type=int, default=81)
    p.add_argument("--labels", required=True)
    p.add_argument("--no-check-files", action="store_true")

    p = dataset.add_parser("validate")
    p.add_argument("--manifest", required=True)
    p.add_argument("--no-check-files", action="store_true")
    p.add_argument("--json", action="store_true")

    p = dataset.add_parser("stats")
    p.add_argument("--manifest", required=True)
    p.add_argument("--json", action="store_true")

    p = dataset.add_parser("emit-config")
    p.add_argument("--manifest", default=None)
    p.add_argument("--alpha", type=float, default=None, help="adapter scale (no default)")
    p.add_argument("--set", action="append", help="override, key=json-value")
    p.add_argument("--out", default=None)

    lora_cmd = sub.add_parser("lora").add_subparsers(dest="lora_cmd", required=True)

    p = lora_cmd.add_parser("init")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for name in ("merge", "unmerge"):
        p = lora_cmd.add_parser(name)
        p.add_argument("--weights", required=True, help=".npy weight matrix")
        p.add_argument("--adapter", required=True)
        p.add_argument("--out", required=True)

    p = lora_cmd.add_parser("check-grad")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--json", action="store_true")

    p = lora_cmd.add_parser("savings")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("generate")
    p.add_argument("--composite", required=True)
    p.add_argument("--caption", required=True, help="caption text file (unprefixed)")
    p.add_argument("--backend", default=pipeline.MOCK_BACKEND)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=pipeline.DEFAULT_FRAMES)
    p.add_argument("--extra-cut", type=int, default=0)
    p.add_argument("--keep-raw", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("cut")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fc", type=int, default=4)
    p.add_argument("--extra-cut", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")

    study_cmd = sub.add_parser("study").add_subparsers(dest="study_cmd", required=True)

    p = study_cmd.add_parser("serve")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--port", type=int, default=8777)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ui-dir", default=None)

    p = study_cmd.add_parser("report")
    p.add_argument("--annotations", required=True, help="annotations JSONL")
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    config = _load_workspace_config(args.workspace)
    if hasattr(args, "seed") and args.seed == 0 and "seed" in config:
        args.seed = int(config["seed"])

    try:
        if args.command == "curate":
            handlers = {
                "crop": lambda: cmd_curate_crop(args),
                "extract": lambda: cmd_curate_extract(args, config),
                "remove": lambda: cmd_curate_remove(args, config),
                "key": lambda: cmd_curate_key(args),
                "compose": lambda: cmd_curate_compose(args),
                "caption": lambda: cmd_curate_caption(args, config),
            }
            return handlers[args.curate_cmd]()
        if args.command == "dataset":
            handlers = {
                "add": lambda: cmd_dataset_add(args),
                "validate": lambda: cmd_dataset_validate(args),
                "stats": lambda: cmd_dataset_stats(args),
                "emit-config": lambda: cmd_dataset_emit_config(args),
            }
            return handlers[args.dataset_cmd]()
        if args.command == "lora":
            handlers = {
                "init": lambda: cmd_lora_init(args),
                "merge": lambda: cmd_lora_merge(args, "merge"),
                "unmerge": lambda: cmd_lora_merge(args, "unmerge"),
                "check-grad": lambda: cmd_lora_check_grad(args),
                "savings": lambda: cmd_lora_savings(args),
            }
            return handlers[args.lora_cmd]()
        if args.command == "generate":
            return cmd_generate(args, config)
        if args.command == "cut":
            return cmd_cut(args)
        if args.command == "study":
            handlers = {
                "serve": lambda: cmd_study_serve(args),
                "report": lambda: cmd_study_report(args),
            }
            return handlers[args.study_cmd]()
        parser.error(f"unknown command {args.command!r}")
    except FfgoError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return 2
    return 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
