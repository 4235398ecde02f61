"""Command-line driver: ``deepsum <command> [flags]``.

Commands pass plain files to each other::

    synth -> segments -> train -> embed -> summarize -> evaluate -> report
                                       \\-> plot

Flag defaults can come from a ``key=value`` config file given by
``--config`` or the ``DEEPSUM_CONFIG`` environment variable; flags on the
command line win. Exit status is 0 on success, 1 for invalid input and 2
for I/O failures.
"""

from __future__ import annotations

import argparse
import glob
import logging
import math
import os
import sys

import numpy as np

from . import diagnostics, evaluator, feature_io, segmenter, summarizer, trainer
from .embedding import embed_segments, mean_pool

logger = logging.getLogger("deepsum")

CONFIG_ENV = "DEEPSUM_CONFIG"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# --------------------------------------------------------------------------
# helpers

def _round(obj, digits):
    if digits is None:
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}") if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, digits) for v in obj]
    return obj


def _need(args, *names):
    for name in names:
        if getattr(args, name) in (None, []):
            raise UsageError(f"--{name.replace('_', '-')} is required for '{args.command}'")


def _positive(name, value, allow_zero=False):
    if value is None:
        return
    if not (value >= 0 if allow_zero else value > 0) or not math.isfinite(value):
        raise UsageError(f"--{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")


def _dims(text):
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(parts) != 3 or min(parts) < 1:
        raise argparse.ArgumentTypeError("dims must be three positive integers d_in,hidden,d_out")
    return parts


def _margin(text):
    if text == "derived":
        return text
    if text.startswith("fixed:"):
        try:
            value = float(text[6:])
        except ValueError:
            pass
        else:
            if value > 0 and math.isfinite(value):
                return text
    raise argparse.ArgumentTypeError("margin must be 'derived' or 'fixed:<positive value>'")


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _makedirs_for(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# --------------------------------------------------------------------------
# commands

def cmd_synth(args):
    _need(args, "out")
    cfg = diagnostics.SynthConfig(
        seed=args.seed, n_clusters=args.clusters, latent_dim=args.latent_dim,
        video_dim=args.video_dim, text_dim=args.text_dim, fps=args.fps,
        n_train=args.train_clips, n_heldout=args.heldout_clips, n_videos=args.videos,
        n_scenes=args.scenes, scene_block_s=args.scene_block, n_annotators=args.annotators,
        feature_scale=args.feature_scale,
    )
    world = diagnostics.make_synthetic_world(cfg)
    out = args.out
    for split, tracks, descs in (("train", world.train_tracks, world.train_descriptions),
                                 ("heldout", world.heldout_tracks, world.heldout_descriptions)):
        if not tracks:
            continue
        os.makedirs(os.path.join(out, split, "tracks"), exist_ok=True)
        for vid, track in tracks.items():
            feature_io.write_feature_track(os.path.join(out, split, "tracks", f"{vid}.jsonl"), track)
        feature_io.write_descriptions(os.path.join(out, split, "descriptions.jsonl"), descs)
    os.makedirs(os.path.join(out, "videos"), exist_ok=True)
    for vid, track in world.videos.items():
        feature_io.write_feature_track(os.path.join(out, "videos", f"{vid}.track.jsonl"), track)
        feature_io.write_references(os.path.join(out, "videos", f"{vid}.refs.jsonl"), world.references[vid])
        feature_io.write_jsonl(os.path.join(out, "videos", f"{vid}.scenes.jsonl"),
                               [{"frame": i, "scene": int(s)} for i, s in enumerate(world.scene_labels[vid])])
    feature_io.write_record(os.path.join(out, "world.json"), {"config": vars(cfg)})
    logger.info("synth: wrote %d training clips, %d held-out clips and %d videos to %s",
                len(world.train_descriptions), len(world.heldout_descriptions), len(world.videos), out)


def cmd_segments(args):
    _need(args, "track", "out")
    for name in ("window", "stride", "sample_fps"):
        _positive(name.replace("_", "-"), getattr(args, name))
    track = feature_io.read_feature_track(args.track)
    segs = segmenter.extract_segments(track, args.window, args.stride, args.sample_fps)
    header = {"video_id": track.video_id, "duration_s": track.duration_s, "window_s": args.window,
              "stride_s": args.stride, "sample_fps": args.sample_fps, "count": len(segs)}
    _makedirs_for(args.out)
    feature_io.write_segment_manifest(args.out, header, segs)
    logger.info("segments: %s -> %d segments (%d degenerate)", track.video_id, len(segs),
                sum(s.degenerate for s in segs))


def _load_training_dir(path, window, sample_fps):
    files = sorted(glob.glob(os.path.join(path, "tracks", "*.jsonl")))
    desc_path = os.path.join(path, "descriptions.jsonl")
    if not files:
        raise FileNotFoundError(f"no track files under {os.path.join(path, 'tracks')}")
    tracks = {}
    for f in files:
        t = feature_io.read_feature_track(f)
        tracks[t.video_id] = t
    descs = feature_io.read_descriptions(desc_path)
    return trainer.pairs_from_descriptions(tracks, descs, window, sample_fps)


def cmd_train(args):
    _need(args, "data", "out")
    for name in ("lr",):
        _positive(name, args.lr, allow_zero=True)
    _positive("window", args.window)
    _positive("sample-fps", args.sample_fps)
    margin = None if args.margin == "derived" else float(args.margin.split(":", 1)[1])
    try:
        config = trainer.TrainConfig(
            margin=margin, negatives_per_positive=args.negatives, learning_rate=args.lr,
            epochs=args.epochs, beta1=args.beta1, beta2=args.beta2, eps=args.eps,
            hidden=args.hidden, embed_dim=args.embed_dim, max_steps=args.max_steps, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    pairs = _load_training_dir(args.data, args.window, args.sample_fps)
    model_file, log = trainer.train(pairs, config)
    model_file.metadata.update({"window_s": args.window, "sample_fps": args.sample_fps})
    _makedirs_for(args.out)
    feature_io.write_model(args.out, model_file)
    log_path = args.log or os.path.splitext(args.out)[0] + ".log.jsonl"
    feature_io.write_jsonl(log_path, [_round(r, args.precision) for r in log.records]
                           + [{"epoch": e, "mean_loss": _round(l, args.precision)}
                              for e, l in enumerate(log.epoch_losses)])
    logger.info("train: %d pairs, %d steps, alpha=%.6g, final epoch loss %.6g -> %s",
                len(pairs), model_file.metadata["steps"], log.alpha, log.epoch_losses[-1], args.out)


def cmd_gradcheck(args):
    _positive("tolerance", args.tolerance)
    _positive("step", args.step)
    if args.frames < 1 or args.trials < 1:
        raise UsageError("--frames and --trials must be >= 1")
    worst = 0.0
    records = []
    for s in range(args.seed, args.seed + args.trials):
        rep = trainer.gradient_check(s, args.dims, args.text_dim, args.frames, args.tolerance, args.step)
        records.append(rep)
        worst = max(worst, rep["worst"])
        for name, err in rep["max_relative_error"].items():
            print(f"seed {s} {name:10s} max relative error {err:.3e}")
    if args.out:
        _makedirs_for(args.out)
        feature_io.write_jsonl(args.out, records)
    ok = worst <= args.tolerance
    logger.info("gradcheck: worst relative error %.3e (tolerance %.1e): %s", worst, args.tolerance,
                "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_embed(args):
    _need(args, "manifest", "track", "out")
    if not args.raw:
        _need(args, "model")
    header, rows = feature_io.read_segment_manifest(args.manifest)
    track = feature_io.read_feature_track(args.track)
    if track.video_id != header["video_id"]:
        raise UsageError(f"manifest is for {header['video_id']!r} but track is {track.video_id!r}")
    segs = segmenter.segments_from_manifest(track, rows)
    if args.raw:
        # clustering baseline on the upstream descriptors themselves
        X = np.stack([mean_pool(s.frames) for s in segs])
    else:
        X = embed_segments(segs, feature_io.read_model(args.model).model.video)
    _makedirs_for(args.out)
    feature_io.write_points(args.out, {"video_id": track.video_id, "dim": int(X.shape[1]), "count": len(segs)},
                            [s.index for s in segs], np.asarray(_round(X.tolist(), args.precision)))
    logger.info("embed: %d segments of %s -> %d-d points", len(segs), track.video_id, X.shape[1])


def cmd_summarize(args):
    _need(args, "points", "manifest", "out")
    _positive("ratio", args.ratio)
    if args.ratio > 1:
        raise UsageError("--ratio must be at most 1")
    if args.k is not None and args.k < 1:
        raise UsageError("--k must be >= 1")
    pheader, idx, X = feature_io.read_points(args.points)
    mheader, rows = feature_io.read_segment_manifest(args.manifest)
    track_stub = {int(r["index"]): r for r in rows}
    missing = [int(i) for i in idx if int(i) not in track_stub]
    if missing:
        raise UsageError(f"points reference segments missing from the manifest: {missing[:5]}")
    rows = [track_stub[int(i)] for i in idx]
    points = summarizer.PointSet(idx, X, [float(r.get("cost", r["end_s"] - r["start_s"])) for r in rows],
                                 [float(r["start_s"]) for r in rows], [float(r["end_s"]) for r in rows])
    K = args.k if args.k is not None else summarizer.budget_k(mheader["duration_s"], mheader["window_s"], args.ratio)
    if args.algorithm == "exhaustive" and math.comb(len(points), min(K, len(points))) > 5_000_000:
        raise UsageError("exhaustive search is limited to small instances")
    summary = summarizer.summarize(points, K, args.algorithm, cost_aware=args.cost_aware,
                                   no_overlap=args.no_overlap)
    timeline = summarizer.merge_intervals((track_stub[i]["start_s"], track_stub[i]["end_s"]) for i in summary.selected)
    record = {"video_id": mheader["video_id"], "algorithm": args.algorithm, "K": K,
              "selected": summary.selected, "order": summary.order,
              "objective": summary.objective_value, "gains": summary.gains,
              "timeline": [list(iv) for iv in timeline],
              "cost_aware": args.cost_aware, "no_overlap": args.no_overlap}
    _makedirs_for(args.out)
    feature_io.write_record(args.out, _round(record, args.precision))
    logger.info("summarize: %s K=%d via %s, F(S)=%.6g, %d merged intervals", mheader["video_id"], K,
                args.algorithm, summary.objective_value, len(timeline))


def cmd_evaluate(args):
    _need(args, "summary", "refs", "out")
    summary = feature_io.read_record(args.summary)
    refs = feature_io.read_references(args.refs)
    if summary.get("video_id") != refs.video_id:
        raise UsageError(f"summary is for {summary.get('video_id')!r} but references are for {refs.video_id!r}")
    name = args.name or summary.get("algorithm", "summary")
    report = evaluator.evaluate_summary([tuple(iv) for iv in summary["timeline"]], refs, name)
    _makedirs_for(args.out)
    feature_io.write_record(args.out, _round(report.to_record(), args.precision))
    logger.info("evaluate: %s [%s] mean f=%.3f (min %.3f, max %.3f) over %d references", refs.video_id, name,
                report.f_mean, report.f_min, report.f_max, len(refs.references))


def _external_scores(spec):
    """Read NAME=CSV where the CSV has columns video_id,f."""
    import csv

    if "=" not in spec:
        raise UsageError(f"--external expects NAME=PATH, got {spec!r}")
    name, path = spec.split("=", 1)
    out = {}
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                out[row["video_id"]] = float(row["f"])
            except (KeyError, ValueError):
                raise UsageError(f"{path}: rows need video_id and numeric f columns") from None
    return name, out


def cmd_report(args):
    _need(args, "scores", "out_dir")
    reports = [evaluator.ScoreReport.from_record(feature_io.read_record(p)) for p in args.scores]
    for spec in args.external or []:
        name, scores = _external_scores(spec)
        for vid, f in scores.items():
            reports.append(evaluator.ScoreReport(vid, name, [], f, f, f))
    columns = args.columns.split(",") if args.columns else None
    table = evaluator.emit_report(reports, args.out_dir, columns, args.timelines_for)
    logger.info("report: %d videos x %d columns -> %s", len(table.rows), len(table.header) - 1, args.out_dir)


def cmd_plot(args):
    _need(args, "points", "out")
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    header, idx, X = feature_io.read_points(args.points)
    coords = diagnostics.pca_project(X)
    labels = [str(int(i)) if j % max(1, args.label_every) == 0 else "" for j, i in enumerate(idx)]
    svg = diagnostics.scatter_svg(coords, None, labels, k=args.k, seed=args.seed,
                                  title=f"{header.get('video_id', '')} segment embeddings (PCA)")
    _makedirs_for(args.out)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    logger.info("plot: %d points -> %s", len(idx), args.out)


COMMANDS = {
    "synth": cmd_synth, "segments": cmd_segments, "train": cmd_train, "gradcheck": cmd_gradcheck,
    "embed": cmd_embed, "summarize": cmd_summarize, "evaluate": cmd_evaluate,
    "report": cmd_report, "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--precision", type=int, default=None,
                        help="significant digits for reals in text outputs (default: exact round-trip)")
    common.add_argument("--config", default=None, help=f"key=value defaults file (env {CONFIG_ENV})")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="deepsum", description="Video summarisation with joint video/text embeddings.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    p.add_argument("--out")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--latent-dim", type=int, default=4)
    p.add_argument("--video-dim", type=int, default=16)
    p.add_argument("--text-dim", type=int, default=12)
    p.add_argument("--fps", type=float, default=1.0)
    p.add_argument("--train-clips", type=int, default=200)
    p.add_argument("--heldout-clips", type=int, default=50)
    p.add_argument("--videos", type=int, default=2)
    p.add_argument("--scenes", type=int, default=3)
    p.add_argument("--scene-block", type=float, default=20.0)
    p.add_argument("--annotators", type=int, default=5)
    p.add_argument("--feature-scale", type=float, default=0.05)

    p = sub.add_parser("segments", parents=[common], help="cut a track into sliding windows")
    p.add_argument("--track")
    p.add_argument("--out")
    p.add_argument("--window", type=float, default=5.0)
    p.add_argument("--stride", type=float, default=1.0)
    p.add_argument("--sample-fps", type=float, default=1.0)

    p = sub.add_parser("train", parents=[common], help="train the joint embedding")
    p.add_argument("--data", help="directory with tracks/*.jsonl and descriptions.jsonl")
    p.add_argument("--out")
    p.add_argument("--log")
    p.add_argument("--margin", type=_margin, default="derived")
    p.add_argument("--negatives", type=int, default=20)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--hidden", type=int, default=1000)
    p.add_argument("--embed-dim", type=int, default=300)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--window", type=float, default=5.0)
    p.add_argument("--sample-fps", type=float, default=1.0)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("--dims", type=_dims, default=(16, 8, 4))
    p.add_argument("--text-dim", type=int, default=None)
    p.add_argument("--frames", type=int, default=3)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--out")

    p = sub.add_parser("embed", parents=[common], help="map segments into the semantic space")
    p.add_argument("--model")
    p.add_argument("--raw", action="store_true", help="mean-pool the input descriptors instead of using a model")
    p.add_argument("--manifest")
    p.add_argument("--track")
    p.add_argument("--out")

    p = sub.add_parser("summarize", parents=[common], help="select representative segments")
    p.add_argument("--points")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--ratio", type=float, default=0.15)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--no-overlap", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--cost-aware", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--algorithm", choices=sorted(summarizer.ALGORITHMS), default="lazy")

    p = sub.add_parser("evaluate", parents=[common], help="score a summary against references")
    p.add_argument("--summary")
    p.add_argument("--refs")
    p.add_argument("--out")
    p.add_argument("--name", help="column name for this summary in reports")

    p = sub.add_parser("report", parents=[common], help="tabulate many score reports")
    p.add_argument("--scores", nargs="+")
    p.add_argument("--out-dir")
    p.add_argument("--external", action="append", help="NAME=CSV of externally computed video_id,f scores")
    p.add_argument("--columns", help="comma-separated column order")
    p.add_argument("--timelines-for", help="algorithm whose selections are drawn on timeline strips")

    p = sub.add_parser("plot", parents=[common], help="PCA scatter of embedded segments")
    p.add_argument("--points")
    p.add_argument("--out")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--label-every", type=int, default=5)
    return parser


def load_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(parser, args, argv):
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        return args
    values = load_config(path)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        if key not in actions:
            raise UsageError(f"{path}: unknown key {key!r} for '{args.command}'")
        act = actions[key]
        conv = act.type or (lambda s: s)
        try:
            if act.nargs in ("+", "*"):
                defaults[key] = [conv(v) for v in raw.split()]
            else:
                defaults[key] = conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}: bad value for {key!r}: {exc}") from None
        if act.choices is not None and defaults[key] not in act.choices:
            raise UsageError(f"{path}: {key!r} must be one of {sorted(act.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, args, argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"deepsum: cannot read config: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", force=True)
    if args.precision is not None and not 1 <= args.precision <= 17:
        print("deepsum: --precision must lie in 1..17", file=sys.stderr)
        return 1
    try:
        code = COMMANDS[args.command](args)
    except OSError as exc:
        target = getattr(exc, "filename", None)
        print(f"deepsum {args.command}: I/O error: {exc.strerror or exc}" + (f": {target}" if target else ""),
              file=sys.stderr)
        return 2
    except (ValueError, trainer.TrainingError) as exc:
        print(f"deepsum {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0 if code is None else code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
