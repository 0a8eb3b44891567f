"""Command-line entry point wiring the modules into experiment pipelines.

Subcommands: ``embed`` (learn embeddings), ``synth`` (generate the
synthetic two-view family), ``jaccard`` (cross-view agreement report),
``eval`` (downstream protocol), ``sweep`` (hyperparameter grids),
``rerun`` (replay a manifest), ``bench`` (compare kernel backends), and
``prepare-twitter`` / ``prepare-youtube`` (public dump conversion).
Every artifact-writing command drops a ``manifest.json`` beside its
outputs. ``MVEMBED_THREADS`` provides a default for ``--threads``.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .evaluate import (MetricReport, load_task_spec, run_protocol,
                       write_reports_csv)
from .graph import (NetworkBuilder, ParseError, ValidationError, load_network,
                    save_network, save_node_dictionary)
from .manifest import MANIFEST_NAME, RunManifest, build_manifest
from .store import (PER_VIEW_VARIANTS, UsageError, VARIANTS,
                    load_embeddings_text, save_embeddings_binary,
                    save_embeddings_text)
from .synth import LabeledNetwork, SynthConfig, generate, write_labels
from .train import TrainConfig, run_embedding
from .viewstats import agreement_report, write_agreement_csv, write_histogram_csv
from .walks import WalkConfig

logger = logging.getLogger("mvembed.cli")


def _default_threads() -> int:
    env = os.environ.get("MVEMBED_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"MVEMBED_THREADS={env!r} is not an integer") from None
    return 1


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _add_embed_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", required=True, help="edge-list TSV")
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--theta", type=float, default=None,
                   help="context sharing strength (con only)")
    p.add_argument("--gamma", type=float, default=None,
                   help="cross-view regularization strength (reg only)")
    p.add_argument("--dim", type=int, default=None,
                   help="total dimension; default 128 per view for per-view "
                        "variants, 128 otherwise")
    p.add_argument("--walk-len", type=int, default=20)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--walks-mult", type=int, default=50)
    p.add_argument("--neg", type=int, default=5)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--alpha-min", type=float, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--binarize", action="store_true",
                   help="reset ingested edge weights to 1.0")
    p.add_argument("--appendix-gradients", action="store_true",
                   help="alternative constrained-blend coefficients")
    p.add_argument("--view", default=None, help="view name for single-view")
    p.add_argument("--dump-walks", default=None, metavar="PATH")


def _resolve_embed_config(args, num_views: int) -> tuple[TrainConfig, WalkConfig]:
    if args.theta is not None and args.variant != "con":
        raise UsageError("--theta applies only to --variant con")
    if args.gamma is not None and args.variant != "reg":
        raise UsageError("--gamma applies only to --variant reg")
    if args.variant == "single-view" and not args.view:
        raise UsageError("--variant single-view requires --view")
    dim = args.dim
    if dim is None:
        dim = 128 * num_views if args.variant in PER_VIEW_VARIANTS else 128
    threads = args.threads if args.threads is not None else _default_threads()
    cfg = TrainConfig(
        variant=args.variant, dim=dim,
        theta=args.theta if args.theta is not None else 0.0,
        gamma=args.gamma if args.gamma is not None else 0.0,
        negatives=args.neg, epochs=args.epochs, alpha0=args.alpha,
        alpha_min=args.alpha_min, seed=args.seed, threads=threads,
        appendix_gradients=args.appendix_gradients)
    wcfg = WalkConfig(walk_length=args.walk_len, window=args.window,
                      walks_multiplier=args.walks_mult, seed=args.seed)
    return cfg, wcfg


def cmd_embed(args) -> int:
    net = load_network(args.network, binarize=args.binarize)
    cfg, wcfg = _resolve_embed_config(args, net.num_views)
    out = _ensure_outdir(args.out)
    started = time.perf_counter()
    store, table = run_embedding(net, cfg, wcfg, view=args.view,
                                 dump_walks=args.dump_walks)
    logger.info("trained %s on %s in %.1fs (%d nodes, dim %d)",
                cfg.variant, args.network, time.perf_counter() - started,
                len(table), table.shape[1])
    text_path = os.path.join(out, "embeddings.txt")
    bin_path = os.path.join(out, "embeddings.bin")
    nodes_path = os.path.join(out, "nodes.tsv")
    save_embeddings_text(text_path, store.node_labels, table)
    save_embeddings_binary(bin_path, store.node_labels, table)
    save_node_dictionary(net, nodes_path)
    outputs = [text_path, bin_path, nodes_path]
    if args.dump_walks:
        outputs.append(args.dump_walks)
    build_manifest("embed", _manifest_args(args), [args.network],
                   outputs).write(os.path.join(out, MANIFEST_NAME))
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(intrusion=args.p, nodes_per_class=args.nodes_per_class,
                      attach_edges=args.edges_per_node, seed=args.seed)
    labeled = generate(cfg)
    out = _ensure_outdir(args.out)
    edges_path = os.path.join(out, "edges.tsv")
    labels_path = os.path.join(out, "labels.tsv")
    save_network(labeled.net, edges_path)
    write_labels(labeled, labels_path)
    build_manifest("synth", _manifest_args(args), [],
                   [edges_path, labels_path]).write(
        os.path.join(out, MANIFEST_NAME))
    return 0


def cmd_jaccard(args) -> int:
    net = load_network(args.network, binarize=args.binarize)
    report = agreement_report(net, threshold=args.threshold)
    out = _ensure_outdir(args.out)
    csv_path = os.path.join(out, "agreement.csv")
    write_agreement_csv(report, csv_path)
    outputs = [csv_path]
    if args.histogram:
        hist_path = os.path.join(out, "histogram.csv")
        write_histogram_csv(report, hist_path)
        outputs.append(hist_path)
    build_manifest("jaccard", _manifest_args(args), [args.network],
                   outputs).write(os.path.join(out, MANIFEST_NAME))
    return 0


def _spec_with_paths(task_path: str, runs=None, seed=None):
    spec = load_task_spec(task_path)
    base = os.path.dirname(os.path.abspath(task_path))
    resolve = lambda p: None if p is None else (
        p if os.path.isabs(p) else os.path.join(base, p))
    spec.network = resolve(spec.network)
    spec.edges = resolve(spec.edges)
    spec.labels = resolve(spec.labels)
    if runs is not None:
        spec.runs = runs
    if seed is not None:
        spec.seed = seed
    if spec.network is None:
        raise ValidationError("task spec must name the network file")
    return spec


def cmd_eval(args) -> int:
    spec = _spec_with_paths(args.task, runs=args.runs, seed=args.seed)
    labels, table = load_embeddings_text(args.embeddings)
    net = load_network(spec.network)
    name = args.model_name or os.path.splitext(
        os.path.basename(args.embeddings))[0]
    report = run_protocol(labels, table, net, spec, model_name=name,
                          n_jobs=args.jobs, logreg_max_iter=args.logreg_max_iter)
    out = _ensure_outdir(args.out)
    csv_path = os.path.join(out, "results.csv")
    write_reports_csv([report], csv_path)
    inputs = [args.embeddings, args.task, spec.network]
    inputs += [p for p in (spec.edges, spec.labels) if p]
    build_manifest("eval", _manifest_args(args), inputs,
                   [csv_path]).write(os.path.join(out, MANIFEST_NAME))
    for metric in report.metrics:
        logger.info("%s %s %s: %.4f +- %.4f", name, spec.task, metric,
                    report.mean(metric), report.stderr(metric))
    return 0


def cmd_sweep(args) -> int:
    if not args.grid:
        raise UsageError("--grid must list at least one value")
    values = [float(x) for x in args.grid.split(",") if x != ""]
    if not values:
        raise UsageError("--grid must list at least one value")
    # the training seed is independent of the protocol's split seed
    spec = _spec_with_paths(args.task, runs=args.runs)
    net = load_network(args.network, binarize=args.binarize)
    out = _ensure_outdir(args.out)
    rows = []
    for value in values:
        sweep_args = argparse.Namespace(**vars(args))
        if args.grid_param == "theta":
            sweep_args.theta = value
        elif args.grid_param == "gamma":
            sweep_args.gamma = value
        else:
            sweep_args.dim = int(value)
        cfg, wcfg = _resolve_embed_config(sweep_args, net.num_views)
        store, table = run_embedding(net, cfg, wcfg, view=args.view)
        name = f"{args.variant}[{args.grid_param}={value:g}]"
        report = run_protocol(store.node_labels, table, net, spec,
                              model_name=name, n_jobs=args.jobs,
                              logreg_max_iter=args.logreg_max_iter)
        for metric in report.metrics:
            rows.append((args.grid_param, value, name, spec.task, metric,
                         report.mean(metric), report.stderr(metric)))
        logger.info("sweep %s=%g done", args.grid_param, value)
    csv_path = os.path.join(out, "sweep.csv")
    with io.open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("param,value,model,task,metric,mean,stderr\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    inputs = [args.network, args.task, spec.network]
    inputs += [p for p in (spec.edges, spec.labels) if p]
    build_manifest("sweep", _manifest_args(args), inputs,
                   [csv_path]).write(os.path.join(out, MANIFEST_NAME))
    return 0


def cmd_rerun(args) -> int:
    man = RunManifest.read(args.manifest)
    handler = _HANDLERS.get(man.command)
    if handler is None:
        raise UsageError(f"manifest command {man.command!r} cannot be rerun")
    replay = argparse.Namespace(**man.args)
    if args.out:
        replay.out = args.out
    return handler(replay)


def cmd_bench(args) -> int:
    from .bench import run_benchmark
    run_benchmark(num_nodes=args.nodes, dim=args.dim, n_pairs=args.pairs,
                  negatives=args.neg, out=sys.stdout)
    return 0


def _symmetrize_file(builder: NetworkBuilder, path: str, view: str,
                     skipped: list[int]) -> set[str]:
    """Whitespace-separated ``src dst [weight]`` lines into one view."""
    seen: set[str] = set()
    with io.open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 2:
                raise ParseError(f"expected 'src dst [weight]': {line!r}",
                                 line_no)
            src, dst = parts[0], parts[1]
            if src == dst:
                skipped.append(line_no)
                continue
            weight = float(parts[2]) if len(parts) > 2 else 1.0
            builder.add_edge(view, src, dst, weight)
            seen.add(src)
            seen.add(dst)
    return seen


def cmd_prepare_twitter(args) -> int:
    builder = NetworkBuilder(binarize=args.binarize)
    skipped: list[int] = []
    core = _symmetrize_file(builder, args.reply, "reply", skipped)
    core |= _symmetrize_file(builder, args.mention, "mention", skipped)
    net = builder.build()
    out = _ensure_outdir(args.out)
    edges_path = os.path.join(out, "edges.tsv")
    friends_path = os.path.join(out, "friends.tsv")
    save_network(net, edges_path)
    n_friends = 0
    written = set()
    with io.open(args.social, "r", encoding="utf-8") as fh, \
            io.open(friends_path, "w", encoding="utf-8") as out_fh:
        for line in fh:
            parts = line.split()
            if len(parts) < 2 or parts[0].startswith("#"):
                continue
            a, b = parts[0], parts[1]
            if a == b or a not in core or b not in core:
                continue
            key = (a, b) if a < b else (b, a)
            if key in written:
                continue
            written.add(key)
            out_fh.write(f"{key[0]}\t{key[1]}\n")
            n_friends += 1
    logger.info("twitter: %d nodes, %d views, %d friend pairs, "
                "%d self-loops skipped", net.num_nodes, net.num_views,
                n_friends, len(skipped))
    build_manifest("prepare-twitter", _manifest_args(args),
                   [args.reply, args.mention, args.social],
                   [edges_path, friends_path]).write(
        os.path.join(out, MANIFEST_NAME))
    return 0


def cmd_prepare_youtube(args) -> int:
    mapping = {}
    for part in args.rel_views.split(","):
        rel, _, name = part.partition(":")
        mapping[rel.strip()] = name.strip()
    builder = NetworkBuilder(binarize=args.binarize)
    for name in mapping.values():
        builder.ensure_view(name)
    friends = []
    with io.open(args.multirel, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").replace("\t", " ").split()
            if len(parts) < 3:
                continue
            src, dst, rel = parts[0], parts[1], parts[2]
            weight = float(parts[3]) if len(parts) > 3 else 1.0
            if src == dst:
                continue
            if rel in mapping:
                builder.add_edge(mapping[rel], src, dst, weight)
            elif rel == args.friends_rel:
                friends.append((src, dst))
    net = builder.build()
    out = _ensure_outdir(args.out)
    edges_path = os.path.join(out, "edges.tsv")
    friends_path = os.path.join(out, "friends.tsv")
    save_network(net, edges_path)
    core = set(net.node_labels)
    written = set()
    with io.open(friends_path, "w", encoding="utf-8") as fh:
        for a, b in friends:
            if a in core and b in core:
                key = (a, b) if a < b else (b, a)
                if key not in written:
                    written.add(key)
                    fh.write(f"{key[0]}\t{key[1]}\n")
    logger.info("youtube: %d nodes, %d views, %d friend pairs",
                net.num_nodes, net.num_views, len(written))
    build_manifest("prepare-youtube", _manifest_args(args), [args.multirel],
                   [edges_path, friends_path]).write(
        os.path.join(out, MANIFEST_NAME))
    return 0


def _manifest_args(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvembed",
        description="Multi-view network embedding and evaluation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="learn node embeddings")
    _add_embed_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("synth", help="generate a synthetic two-view network")
    p.add_argument("--p", type=float, required=True,
                   help="intrusion probability in [0, 0.5]")
    p.add_argument("--nodes-per-class", type=int, default=1000)
    p.add_argument("--edges-per-node", type=int, default=1)
    p.add_argument("--seed", type=int, default=97)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("jaccard", help="cross-view agreement report")
    p.add_argument("--network", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--histogram", action="store_true")
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_jaccard)

    p = sub.add_parser("eval", help="run the downstream evaluation protocol")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--task", required=True, help="task spec file")
    p.add_argument("--model-name", default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--logreg-max-iter", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train and evaluate over a grid")
    _add_embed_flags(p)
    p.add_argument("--task", required=True, help="task spec file")
    p.add_argument("--grid-param", required=True,
                   choices=("theta", "gamma", "dim"))
    p.add_argument("--grid", required=True,
                   help="comma-separated grid values")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--logreg-max-iter", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rerun", help="replay a recorded manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rerun)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--nodes", type=int, default=2000)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--pairs", type=int, default=200_000)
    p.add_argument("--neg", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("prepare-twitter",
                       help="convert the public reply/mention dumps")
    p.add_argument("--reply", required=True)
    p.add_argument("--mention", required=True)
    p.add_argument("--social", required=True,
                   help="follower edges used as friend labels")
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare_twitter)

    p = sub.add_parser("prepare-youtube",
                       help="convert the public multi-relation dump")
    p.add_argument("--multirel", required=True,
                   help="file of 'src dst relation [weight]' records")
    p.add_argument("--rel-views", default="2:cmn-fnd,3:cmn-sub,5:cmn-vid",
                   help="relation-id to view-name mapping")
    p.add_argument("--friends-rel", default="1",
                   help="relation id providing friend labels")
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare_youtube)

    return parser


_HANDLERS = {
    "embed": cmd_embed,
    "synth": cmd_synth,
    "jaccard": cmd_jaccard,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "prepare-twitter": cmd_prepare_twitter,
    "prepare-youtube": cmd_prepare_youtube,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
        level=logging.WARNING if args.quiet else logging.INFO)
    try:
        return args.func(args)
    except (UsageError, ParseError) as exc:
        print(f"mvembed: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, OSError) as exc:
        print(f"mvembed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
