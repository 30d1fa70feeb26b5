"""Command-line front end: one subcommand per pipeline stage.

Stages talk to each other only through files.  Every subcommand accepts
``--config FILE`` plus long-form overrides of any pipeline setting, and
every artifact it writes embeds the resulting configuration.

Exit status: 0 on success, 1 on a data error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import io
from .activations import MODES
from .config import PipelineConfig
from .errors import InsufficientSamples, KeyPoseError, MissingModel
from .evaluation import curve, match
from .geometry import JointConfiguration, kmeans_temporal
from .pictorial import frame_descriptor
from .pipeline import analyse_scores, fit_model, predict, with_fused
from .synthetic import (
    SyntheticMotionSpec, benchmark_spec, generate, render_frames, second_view_pairing,
    second_view_spec,
)
from .training import TrainingOptions, arm_joints, frame_pyramids, train_mixture


# --------------------------------------------------------------------------
# configuration flags
# --------------------------------------------------------------------------

def _top_k(text: str):
    if text.lower() in ("all", "none"):
        return "all"
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("top-k must be positive or 'all'")
    return value


def _flag_type(name: str, default):
    if name == "top_k":
        return _top_k
    if name == "mode":
        return str
    if isinstance(default, bool):
        return _bool
    if isinstance(default, int):
        return int
    return float


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def config_parser() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("pipeline settings")
    group.add_argument("--config", metavar="FILE", help="JSON file with pipeline settings")
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        kwargs = {"dest": f.name, "default": None, "type": _flag_type(f.name, f.default),
                  "help": f"(default {f.default})"}
        if f.name == "mode":
            kwargs["choices"] = MODES
        group.add_argument(flag, **kwargs)
    return parent


def resolve_config(args) -> PipelineConfig:
    base = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    changes = {f.name: getattr(args, f.name, None) for f in fields(PipelineConfig)}
    if changes.get("top_k") == "all":
        changes["top_k"] = None
        base = replace(base, top_k=None)
    return base.override(**changes)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_synth(args, config: PipelineConfig) -> None:
    out = Path(args.out)
    changes = {"seed": config.seed, "mode": config.mode}
    for key in ("period", "n_poselets", "duration", "noise_sigma", "dropout_rate", "spurious_rate"):
        if getattr(args, key) is not None:
            changes[key] = getattr(args, key)
    if args.keypose_phases:
        changes["keypose_phases"] = tuple(args.keypose_phases)
    if args.benchmark:
        spec = benchmark_spec(**changes)
    else:
        spec = replace(SyntheticMotionSpec(), **changes)
    spec.validate()
    meta = config.to_dict()
    spec_dict = _spec_dict(spec)

    ds = generate(spec)
    io.write_scores(out / "scores.csv", ds.scores, ds.poselet_ids, 0, meta, spec=spec_dict)
    io.write_ground_truth(out / "ground_truth.json", ds.keypose_frames, meta)
    truth = [{"poselet": pid, "activations": a.tolist()} for pid, a in zip(ds.poselet_ids,
                                                                            ds.activations)]
    io.dump_json(out / "truth.json", {"series": truth, "period": spec.period, "spec": spec_dict,
                                      "config": meta})
    if args.second_view:
        view = second_view_spec(spec)
        ds2 = generate(view, ds.timeline)
        io.write_scores(out / "scores_view2.csv", ds2.scores, ds2.poselet_ids, 0, meta,
                        spec=_spec_dict(view))
        io.dump_json(out / "pairing.json", {"pairs": [list(p) for p in second_view_pairing(view)],
                                            "config": meta})
    if args.render is not None:
        n = args.render if args.render > 0 else None
        frames, configs = render_frames(spec, (args.canvas[1], args.canvas[0]), n)
        width = max(5, len(str(len(frames) - 1)))
        for t, img in enumerate(frames):
            io.write_pgm(out / "frames" / f"frame_{t:0{width}d}.pgm", img)
        io.write_configurations(out / "configurations.json", configs, meta)


def _spec_dict(spec: SyntheticMotionSpec) -> dict:
    d = {}
    for f in fields(spec):
        v = getattr(spec, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


def cmd_cluster(args, config: PipelineConfig) -> None:
    configs = io.read_configurations(args.configs)
    if args.arm != "all":
        if configs and configs[0].joints.shape[0] < 7:
            raise InsufficientSamples("arm selection needs full-figure configurations (7 joints)")
        configs = [JointConfiguration(arm_joints(c, args.arm), c.frame_index, c.video)
                   for c in configs]
    result = kmeans_temporal(configs, args.k, seed=config.seed, max_iter=args.max_iter)
    io.write_clusters(args.out, result, config.to_dict())


def cmd_train_detectors(args, config: PipelineConfig) -> None:
    configs = io.read_configurations(args.configs)
    clusters = io.read_clusters(args.clusters)
    paths = io.frame_paths(args.frames)
    by_frame = {c.frame_index: i for i, c in enumerate(configs)}
    frames, cfgs, labels = [], [], []
    label_of = {m: c["cluster"] for c in clusters for m in c["members"]}
    for t, path in enumerate(paths):
        if t not in by_frame:
            continue
        frames.append(io.read_pgm(path))
        cfgs.append(configs[by_frame[t]])
        labels.append(label_of.get(t, -1))
    if not frames:
        raise InsufficientSamples("no frame has a joint annotation")
    options = TrainingOptions(cell_size=config.cell_size, part_cells=tuple(args.part_cells),
                              root_cells=tuple(args.root_cells), epochs=args.epochs, lr=args.lr,
                              reg=args.reg, gamma=config.gamma, seed=config.seed)
    mixture, accs = train_mixture(frames, cfgs, labels, [c["centroid"] for c in clusters], options)
    mixture.all_levels = config.part_all_levels
    io.write_mixture(args.out, mixture, config.to_dict(), training_accuracy=accs)


def cmd_score(args, config: PipelineConfig) -> None:
    mixture = io.read_mixture(args.mixture)
    mixture.gamma = config.gamma
    mixture.all_levels = config.part_all_levels
    paths = io.frame_paths(args.frames)
    biggest = max([mixture.root] + [p.filter for p in mixture.parts], key=lambda f: f.h * f.w)
    pyramids = frame_pyramids((io.read_pgm(p) for p in paths), config.pyramid_levels,
                              config.scale_step, config.cell_size, (biggest.h, biggest.w))
    rows = [frame_descriptor(mixture, pyr, t).scores for t, pyr in enumerate(pyramids)]
    ids = list(range(1, len(mixture.parts) + 1))
    io.write_scores(args.out, np.stack(rows), ids, 0, config.to_dict())


def cmd_activations(args, config: PipelineConfig) -> None:
    scores, ids, start = io.read_scores(args.scores)
    if start != 0:
        scores = np.vstack([np.full((start, scores.shape[1]), np.nan), scores])
    analysis = analyse_scores(scores, config, ids, config.mode)
    io.write_activations(args.out, analysis, config.to_dict())


def _load_analyses(paths, secondary, pairing_path, config):
    analyses = [io.read_activations(p) for p in paths]
    if not secondary:
        return analyses
    if len(secondary) != len(analyses):
        raise InsufficientSamples("give one --secondary file per --activations file")
    if not pairing_path:
        raise InsufficientSamples("--secondary needs --pairing")
    pairs = [tuple(p) for p in io.load_json(pairing_path)["pairs"]]
    return [with_fused(a, io.read_activations(s), pairs, config)
            for a, s in zip(analyses, secondary)]


def cmd_fit_keypose(args, config: PipelineConfig) -> None:
    if len(args.activations) != len(args.ground_truth):
        raise InsufficientSamples("give one --ground-truth file per --activations file")
    analyses = _load_analyses(args.activations, args.secondary, args.pairing, config)
    training = [(a, io.read_ground_truth(g, args.keypose))
                for a, g in zip(analyses, args.ground_truth)]
    model = fit_model(training, config, args.keypose)
    io.write_model(args.out, model, config.to_dict())


def cmd_predict(args, config: PipelineConfig) -> None:
    if args.model is None or not Path(args.model).is_file():
        where = "no --model given" if args.model is None else f"{args.model} does not exist"
        raise MissingModel(f"prediction needs a fitted model file ({where}); run fit-keypose first")
    model = io.read_model(args.model)
    analysis = _load_analyses([args.activations], [args.secondary] if args.secondary else None,
                              args.pairing, config)[0]
    if args.top_k is None:
        # the model's own setting applies; record that one
        config = replace(config, top_k=model.top_k)
    preds = predict(model, analysis, config, args.annotation, config.top_k, None, not args.prior_only)
    io.write_predictions(args.out, preds, config.to_dict(), f_stroke=analysis.f_stroke,
                         keypose=model.keypose)


def cmd_evaluate(args, config: PipelineConfig) -> None:
    preds = io.read_predictions(args.predictions)
    gts = io.read_ground_truth(args.ground_truth, args.keypose)
    f_stroke = args.f_stroke
    if f_stroke is None and args.activations:
        f_stroke = io.read_activations(args.activations).f_stroke
    if f_stroke is None:
        doc = io.load_json(args.predictions)
        f_stroke = doc.get("f_stroke") if isinstance(doc, dict) else None
    if f_stroke is None:
        raise InsufficientSamples("stroke length unknown: pass --f-stroke or --activations")
    result = match(preds, gts, config.match_window, f_stroke)
    c = curve(result)
    meta = config.to_dict()
    if args.curve:
        io.write_curve(args.curve, c, meta)
    summary = c.summary()
    summary["f_stroke"] = float(f_stroke)
    io.write_summary(args.out, summary, meta)
    if not args.quiet:
        print(f"recall@0.03={summary['recall_at_003']:.3f} precision={summary['precision']:.3f} "
              f"tp={c.tp} fp={c.fp} fn={c.fn}")


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parent = config_parser()
    parser = argparse.ArgumentParser(prog="keypose", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", parents=[parent], help="write a synthetic video with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--period", type=float)
    p.add_argument("--n-poselets", type=int)
    p.add_argument("--duration", type=int)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--dropout-rate", type=float)
    p.add_argument("--spurious-rate", type=float)
    p.add_argument("--keypose-phases", type=float, nargs="+")
    p.add_argument("--benchmark", action="store_true",
                   help="mixed-quality detectors with timing and per-video variation")
    p.add_argument("--second-view", action="store_true",
                   help="also write a clean symmetric second view and its pairing")
    p.add_argument("--render", type=int, nargs="?", const=0, metavar="N",
                   help="also render PGM frames (first N, default all) and joint annotations")
    p.add_argument("--canvas", type=int, nargs=2, default=(96, 96), metavar=("W", "H"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", parents=[parent], help="k-means over joint configurations")
    p.add_argument("--configs", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--arm", choices=("left", "right", "all"), default="left",
                   help="joints to cluster (all: every joint of the file)")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train-detectors", parents=[parent], help="train root and part filters")
    p.add_argument("--frames", required=True, help="directory of PGM frames")
    p.add_argument("--configs", required=True)
    p.add_argument("--clusters", required=True)
    p.add_argument("--part-cells", type=int, nargs=2, default=(5, 5), metavar=("H", "W"))
    p.add_argument("--root-cells", type=int, nargs=2, default=(3, 6), metavar=("H", "W"))
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--reg", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_detectors)

    p = sub.add_parser("score", parents=[parent], help="constrained part scores for every frame")
    p.add_argument("--mixture", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("activations", parents=[parent],
                       help="activation series and stroke length from a score CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_activations)

    p = sub.add_parser("fit-keypose", parents=[parent], help="fit per-poselet likelihoods")
    p.add_argument("--activations", nargs="+", required=True)
    p.add_argument("--ground-truth", nargs="+", required=True)
    p.add_argument("--keypose", type=int, default=0)
    p.add_argument("--secondary", nargs="+", help="second-view activations, one per video")
    p.add_argument("--pairing", help="JSON with the second-view pairs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_keypose)

    p = sub.add_parser("predict", parents=[parent], help="key-pose frames of one video")
    p.add_argument("--model", help="fitted model from fit-keypose")
    p.add_argument("--activations", required=True)
    p.add_argument("--annotation", type=int, help="one annotated key-pose frame (adds the prior)")
    p.add_argument("--prior-only", action="store_true", help="use the prior without the model")
    p.add_argument("--secondary", help="second-view activations")
    p.add_argument("--pairing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[parent], help="recall curve and summary")
    p.add_argument("--predictions", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--keypose", type=int, default=0)
    p.add_argument("--activations", help="activations file supplying the stroke length")
    p.add_argument("--f-stroke", type=float)
    p.add_argument("--curve", help="CSV output deviation,recall")
    p.add_argument("--out", required=True, help="summary JSON")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "predict" and args.prior_only and args.annotation is None:
            parser.error("--prior-only needs --annotation")
        args.func(args, config)
    except (KeyPoseError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
