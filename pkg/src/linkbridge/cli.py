"""Command-line interface: every pipeline stage as a subcommand.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
Heavy imports happen inside the command handlers so that ``--threads`` can
pin the BLAS pool size before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _apply_threads(threads: int | None) -> None:
    if threads is None:
        return
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ[var] = str(threads)


def _read_json(path: str) -> dict:
    from .errors import ConfigError

    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


# ---------------------------------------------------------------------------
# command handlers

def cmd_ingest(args) -> int:
    from .graph import build_graph
    from .io import read_edge_tsv, read_features, read_sides_tsv, save_graph

    pairs = []
    for path in args.edges:
        p, _ = read_edge_tsv(path)
        pairs.extend(p)
    features = None
    if args.features:
        features = {}
        for path in args.features:
            features.update(read_features(path))
    sides = read_sides_tsv(args.sides) if args.sides else None
    extra = list(features.keys()) if features else []
    g = build_graph(pairs, features=features, sides=sides, extra_nodes=extra)
    save_graph(g, args.out, feature_format=args.feature_format)
    stats = g.build_stats
    print(
        f"ingested {g.num_nodes} nodes, {g.num_edges} edges "
        f"(dropped {stats.self_loops_dropped} self-loops, "
        f"{stats.duplicates_dropped} duplicates) -> {args.out}"
    )
    return 0


def cmd_split_temporal(args) -> int:
    from .datasets import temporal_split
    from .io import (
        read_edge_tsv,
        read_features,
        write_edge_tsv,
        write_features_csv,
    )

    pairs, years = read_edge_tsv(args.edges)
    if any(y is None for y in years):
        from .errors import DataError

        raise DataError(f"{args.edges}: every edge needs a year column")
    features = read_features(args.features) if args.features else None
    edges = [(u, v, y) for (u, v), y in zip(pairs, years)]
    src, tar = temporal_split(edges, args.y_low, args.y_high, features=features)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_tsv(out / "source.tsv", src.edge_keys())
    write_edge_tsv(out / "target.tsv", tar.edge_keys())
    if src.features is not None:
        write_features_csv(out / "source.features.csv", list(src.keys), src.features)
        write_features_csv(out / "target.features.csv", list(tar.keys), tar.features)
    print(
        f"source: {src.num_nodes} nodes / {src.num_edges} edges; "
        f"target: {tar.num_nodes} nodes / {tar.num_edges} edges -> {out}"
    )
    return 0


def cmd_gen_synmodel(args) -> int:
    from .datasets import SyntheticSpec, generate_synthetic
    from .io import write_edge_tsv, write_features_bin, write_features_csv

    spec = SyntheticSpec(**_read_json(args.spec))
    src, tar, heldout = generate_synthetic(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_tsv(out / "source.tsv", src.edge_keys())
    write_edge_tsv(out / "target.tsv", tar.edge_keys())
    write_edge_tsv(out / "heldout.tsv", heldout)
    if args.feature_format == "csv":
        write_features_csv(out / "source.features.csv", list(src.keys), src.features)
        write_features_csv(out / "target.features.csv", list(tar.keys), tar.features)
    else:
        write_features_bin(out / "source.features.json", list(src.keys), src.features)
        write_features_bin(out / "target.features.json", list(tar.keys), tar.features)
    print(
        f"synthetic pair written to {out}: source {src.num_nodes}n/{src.num_edges}e, "
        f"target {tar.num_nodes}n/{tar.num_edges}e, {len(heldout)} held-out edges"
    )
    return 0


def cmd_make_split(args) -> int:
    from .io import load_graph
    from .selection import Regime, make_split

    src = load_graph(args.src)
    tar = load_graph(args.tar)
    manifest = make_split(
        Regime.parse(args.regime),
        src,
        tar,
        neg_ratio=args.neg_ratio,
        train_frac_outside=args.train_frac,
        seed=args.seed,
    )
    manifest.save(args.out)
    sizes = {k: len(v) for k, v in manifest.splits().items()}
    print(f"manifest -> {args.out} {json.dumps(sizes)}")
    return 0


def _load_training_graph(graph_path: str, manifest):
    from .io import load_graph
    from .selection import training_graph_from_universe

    universe = load_graph(graph_path)
    return training_graph_from_universe(manifest, universe)


def cmd_train_scorer(args) -> int:
    from .checkpoint import save_scorer
    from .io import write_features_bin, write_scores_tsv
    from .scorer import ScorerConfig, embed, score_edges, train_scorer
    from .selection import SplitManifest

    manifest = SplitManifest.load(args.manifest)
    g_train = _load_training_graph(args.graph, manifest)
    payload = _read_json(args.config) if args.config else {}
    if args.seed is not None:
        payload["seed"] = args.seed
    config = ScorerConfig(**payload)
    model = train_scorer(config, g_train, manifest)
    save_scorer(args.out, model)
    print(
        f"model -> {args.out} (final epoch loss "
        f"{model.loss_trace[-1]:.6f})" if model.loss_trace else f"model -> {args.out}"
    )
    if args.emit_logits or args.emit_embeddings:
        y = embed(model, g_train)
        if args.emit_logits:
            pairs = manifest.all_edges()
            ids = g_train.ids_for([k for pair in pairs for k in pair]).reshape(-1, 2)
            write_scores_tsv(args.emit_logits, pairs, score_edges(y, ids))
        if args.emit_embeddings:
            write_features_bin(args.emit_embeddings, list(g_train.keys), y)
    return 0


def cmd_propagate(args) -> int:
    import numpy as np

    from .checkpoint import load_scorer
    from .errors import ConfigError, DataError
    from .evaluation import node_centric_lp_ablation
    from .io import read_scores_tsv, write_scores_tsv
    from .propagation import DiffusionConfig, emb_lp, logit_lp, xmc_scores
    from .scorer import embed, score_edges
    from .selection import SplitManifest

    manifest = SplitManifest.load(args.manifest)
    g_train = _load_training_graph(args.graph, manifest)
    cfg = DiffusionConfig(
        alpha=args.alpha, k_max=args.kmax, tol=args.tol, degree_cap=args.degree_cap
    )
    pairs = manifest.all_edges()
    ids = g_train.ids_for([k for pair in pairs for k in pair]).reshape(-1, 2)

    y = None
    z = None
    if args.model:
        model = load_scorer(args.model, g_train)
        y = embed(model, g_train)
        z = score_edges(y, ids)
    if args.logits:
        table = read_scores_tsv(args.logits)
        try:
            z = np.array([table[pair] for pair in pairs])
        except KeyError as exc:
            raise DataError(
                f"logits file is missing manifest edge {exc.args[0]}"
            ) from None

    if args.variant == "logit":
        if z is None:
            raise ConfigError("logit variant needs --logits or --model")
        scores = logit_lp(g_train, manifest, z, cfg)
    elif args.variant == "node":
        if z is None:
            raise ConfigError("node variant needs --logits or --model")
        scores = node_centric_lp_ablation(g_train, manifest, z, cfg)
    elif args.variant == "emb":
        if y is None:
            raise ConfigError("emb variant needs --model")
        pos_ids = g_train.ids_for(
            [k for pair in manifest.train_pos for k in pair]
        ).reshape(-1, 2)
        scores = emb_lp(g_train, pos_ids, y, cfg, ids)
    else:
        if y is None:
            raise ConfigError("xmc variant needs --model")
        scores = xmc_scores(g_train, y, cfg, ids)
    write_scores_tsv(args.out, pairs, scores)
    print(f"{args.variant} scores for {len(pairs)} edges -> {args.out}")
    return 0


def cmd_distill(args) -> int:
    from .checkpoint import load_scorer, save_student
    from .distill import DistillConfig, finetune_linkpred, imitate
    from .scorer import embed
    from .selection import SplitManifest

    manifest = SplitManifest.load(args.manifest)
    g_train = _load_training_graph(args.graph, manifest)
    teacher = load_scorer(args.teacher, g_train)
    payload = _read_json(args.config) if args.config else {}
    if args.train_xprime:
        payload["train_xprime"] = True
    config = DistillConfig(**payload)
    y = embed(teacher, g_train)
    student = imitate(y, g_train, config, x_prime=teacher.x_prime)
    mse = student.imitation_mse
    student = finetune_linkpred(student, manifest, g_train, config)
    save_student(args.out, student)
    print(f"student -> {args.out} (imitation mse {mse:.6f})")
    return 0


def cmd_baseline(args) -> int:
    from .heuristics import PprConfig, adamic_adar, common_neighbors, ppr_scores
    from .io import load_graph, read_pairs_tsv, write_scores_tsv

    g = load_graph(args.graph)
    pairs = read_pairs_tsv(args.edges)
    ids = g.ids_for([k for pair in pairs for k in pair]).reshape(-1, 2)
    if args.method == "cn":
        scores = common_neighbors(g, ids).astype(float)
    elif args.method == "aa":
        scores = adamic_adar(g, ids)
    else:
        cfg = PprConfig(teleport=args.teleport, iterations=args.iterations)
        scores = ppr_scores(g, ids, cfg)
    write_scores_tsv(args.out, pairs, scores)
    print(f"{args.method} scores for {len(pairs)} pairs -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    import numpy as np

    from .errors import ConfigError, DataError
    from .evaluation import EvalReport, evaluate_scores, shuffle_eval_order
    from .io import read_scores_tsv
    from .selection import SplitManifest

    manifest = SplitManifest.load(args.manifest)
    if args.split == "valid":
        pos, neg = manifest.valid_pos, manifest.valid_neg
    elif args.split == "test":
        pos, neg = manifest.test_pos, manifest.test_neg
    else:
        pos = manifest.valid_pos + manifest.test_pos
        neg = manifest.valid_neg + manifest.test_neg
    eval_pairs, labels = shuffle_eval_order(list(pos), list(neg), args.seed)

    rows = []
    for item in args.scores:
        if "=" not in item:
            raise ConfigError(f"--scores wants METHOD=FILE, got {item!r}")
        method, path = item.split("=", 1)
        table = read_scores_tsv(path)
        try:
            scores = np.array([table[pair] for pair in eval_pairs])
        except KeyError as exc:
            raise DataError(
                f"{path} is missing evaluation edge {exc.args[0]}"
            ) from None
        threshold = (
            args.threshold
            if args.threshold is not None
            else (0.5 if method in ("logit_lp", "node_lp") else 0.0)
        )
        row = {
            "regime": manifest.regime.value,
            "method": method,
            "split": args.split,
            "threshold": threshold,
        }
        row.update(
            evaluate_scores(scores, labels, tuple(args.k_mult), threshold, args.seed)
        )
        rows.append(row)
    report = EvalReport(
        rows=rows,
        config={"split": args.split, "k_multipliers": args.k_mult},
        seed=args.seed,
        runtime_seconds=0.0,
    )
    report.save(args.report, args.table)
    print(report.text_table(), end="")
    return 0


def cmd_run(args) -> int:
    from .errors import ConfigError
    from .pipeline import load_run_config, run_pipeline, validate_config

    config = load_run_config(args.config)
    base = Path(args.config).resolve().parent
    problems = validate_config(config, base)
    if problems:
        raise ConfigError("invalid run config: " + "; ".join(problems))
    report = run_pipeline(config, base_dir=base)
    print(report.text_table(), end="")
    print(f"report content hash: {report.content_hash()}")
    return 0


def cmd_cost(args) -> int:
    from .errors import ConfigError
    from .propagation import cost_formulas, estimate_line_graph_cost

    if args.graph and args.manifest:
        from .selection import SplitManifest

        manifest = SplitManifest.load(args.manifest)
        g_train = _load_training_graph(args.graph, manifest)
        pos_pairs = (
            list(manifest.train_pos) + list(manifest.valid_pos) + list(manifest.test_pos)
        )
        neg_pairs = (
            list(manifest.train_neg) + list(manifest.valid_neg) + list(manifest.test_neg)
        )
        pos = g_train.ids_for([k for p in pos_pairs for k in p]).reshape(-1, 2)
        neg = g_train.ids_for([k for p in neg_pairs for k in p]).reshape(-1, 2)
        cost = estimate_line_graph_cost(g_train, pos, neg, d=args.d)
        payload = {
            "num_edge_nodes": cost.num_edge_nodes,
            "num_nodes": cost.num_nodes,
            "mean_degree": cost.mean_degree,
            "exact_line_edges": cost.exact_line_edges,
            "exact_directed_incidences": cost.exact_directed_incidences,
            "approx_line_edges": cost.approx_line_edges,
            "multiplies": cost.multiplies,
        }
    elif args.ne is not None:
        if args.mean_deg is None or args.nnodes is None:
            raise ConfigError("formula mode needs --ne, --mean-deg, --d, --nnodes")
        payload = cost_formulas(args.ne, args.mean_deg, args.d, args.nnodes)
    else:
        raise ConfigError("use either --graph/--manifest or --ne/--mean-deg/--nnodes")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkbridge",
        description="Cross-graph link prediction via overlap-selected training "
        "and edge-centric score propagation.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="canonicalize edge lists into a graph dir")
    p.add_argument("--edges", action="append", required=True)
    p.add_argument("--features", action="append", default=None)
    p.add_argument("--sides", default=None)
    p.add_argument("--feature-format", choices=("csv", "bin"), default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split-temporal", help="cut a timestamped edge list "
                       "into source/target graphs")
    p.add_argument("--edges", required=True)
    p.add_argument("--y-low", type=int, required=True)
    p.add_argument("--y-high", type=int, required=True)
    p.add_argument("--features", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split_temporal)

    p = sub.add_parser("gen-synmodel", help="generate the synthetic benchmark pair")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--feature-format", choices=("csv", "bin"), default="csv")
    p.set_defaults(func=cmd_gen_synmodel)

    p = sub.add_parser("make-split", help="build a train/valid/test manifest")
    p.add_argument("--regime", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tar", required=True)
    p.add_argument("--neg-ratio", type=float, default=2.0)
    p.add_argument("--train-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_split)

    p = sub.add_parser("train-scorer", help="fit the pairwise link scorer")
    p.add_argument("--graph", required=True,
                   help="graph covering all manifest nodes (e.g. the union)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-logits", default=None)
    p.add_argument("--emit-embeddings", default=None)
    p.set_defaults(func=cmd_train_scorer)

    p = sub.add_parser("propagate", help="broadcast scores over the graph")
    p.add_argument("--variant", choices=("logit", "emb", "xmc", "node"),
                   required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--logits", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--kmax", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--degree-cap", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("distill", help="train the MLP student from a teacher")
    p.add_argument("--teacher", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--train-xprime", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("baseline", help="heuristic edge scores")
    p.add_argument("--method", choices=("cn", "aa", "ppr"), required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--teleport", type=float, default=0.15)
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="rank-evaluate score files against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scores", action="append", required=True,
                   help="METHOD=FILE, repeatable")
    p.add_argument("--split", choices=("test", "valid", "pooled"), default="test")
    p.add_argument("--k-mult", type=float, action="append", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.add_argument("--table", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline from a JSON run config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("cost", help="line-graph size and per-iteration costs")
    p.add_argument("--graph", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--ne", type=float, default=None)
    p.add_argument("--mean-deg", type=float, default=None)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--nnodes", type=int, default=None)
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_threads(args.threads)
    if getattr(args, "k_mult", None) is not None and not args.k_mult:
        args.k_mult = None
    if hasattr(args, "k_mult") and args.k_mult is None:
        args.k_mult = [1.0, 1.25]

    from .errors import ConfigError, DataError, NumericError

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
