"""Regime orchestration, ranking evaluation and report emission.

``run_regime_suite`` drives the full comparison: for every requested regime
it builds the split, trains the scorer on that regime's training graph,
broadcasts with each requested method, and evaluates everything on the
regime's held-out edges. Reports carry every knob so a rerun from the same
config and seed reproduces them bit for bit (modulo wall-clock fields,
which stay out of the content hash).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .distill import DistillConfig, finetune_linkpred, imitate, student_embed
from .errors import ConfigError, DataError
from .graph import Graph, union_graph
from .heuristics import PprConfig, adamic_adar, common_neighbors, ppr_scores
from .metrics import precision_accuracy, recall_at
from .propagation import (
    DiffusionConfig,
    diffuse,
    emb_lp,
    logit_lp,
    sigmoid,
    sym_norm_adjacency,
    xmc_scores,
)
from .scorer import ScorerConfig, embed, score_edges, train_scorer
from .seeds import derive_seed
from .selection import Regime, make_split, manifest_training_graph

__all__ = [
    "SuiteConfig",
    "EvalReport",
    "run_regime_suite",
    "node_centric_lp_ablation",
    "evaluate_scores",
    "shuffle_eval_order",
    "KNOWN_METHODS",
    "recall_at",
    "precision_accuracy",
]

KNOWN_METHODS = (
    "scorer",
    "logit_lp",
    "emb_lp",
    "xmc_lp",
    "node_lp",
    "mlp",
    "cn",
    "aa",
    "ppr",
)

# methods whose scores live in [0, 1]; the rest emit raw logits
_CALIBRATED = {"logit_lp", "node_lp"}


def node_centric_lp_ablation(
    g: Graph, manifest, z: np.ndarray, cfg: DiffusionConfig
) -> np.ndarray:
    """Node-level residual diffusion, the deliberately weak LP baseline.

    Each node starts from the mean residual (label - sigmoid(z)) of its
    incident training edges; the residuals diffuse over the original graph
    and each edge receives the mean propagated increment of its endpoints
    on top of its sigmoid prediction. At alpha -> 0 the increment vanishes
    and the raw predictions come back unchanged.
    """
    z = np.asarray(z, dtype=np.float64)
    pairs = manifest.all_edges()
    if z.shape[0] != len(pairs):
        raise DataError("logit vector does not align with manifest edges")
    ids = g.ids_for([k for pair in pairs for k in pair]).reshape(-1, 2)
    p = sigmoid(z)
    n_tp, n_tn = len(manifest.train_pos), len(manifest.train_neg)
    labels = np.zeros(len(pairs))
    labels[:n_tp] = 1.0

    resid_sum = np.zeros(g.num_nodes)
    resid_cnt = np.zeros(g.num_nodes)
    train_ids = ids[: n_tp + n_tn]
    train_resid = labels[: n_tp + n_tn] - p[: n_tp + n_tn]
    np.add.at(resid_sum, train_ids[:, 0], train_resid)
    np.add.at(resid_sum, train_ids[:, 1], train_resid)
    np.add.at(resid_cnt, train_ids[:, 0], 1.0)
    np.add.at(resid_cnt, train_ids[:, 1], 1.0)
    node_resid = np.zeros(g.num_nodes)
    touched = resid_cnt > 0
    node_resid[touched] = resid_sum[touched] / resid_cnt[touched]

    z_final = diffuse(sym_norm_adjacency(g), node_resid, node_resid, cfg)
    increment = z_final - node_resid
    edge_corr = 0.5 * (increment[ids[:, 0]] + increment[ids[:, 1]])
    return np.clip(p + edge_corr, 0.0, 1.0)


@dataclass(frozen=True)
class SuiteConfig:
    """Every knob of one regime-comparison run."""

    seed: int = 0
    neg_ratio: float = 2.0
    train_frac_outside: float = 0.2
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    ppr: PprConfig = field(default_factory=PprConfig)
    k_multipliers: tuple[float, ...] = (1.0, 1.25)
    eval_split: str = "test"

    def validate(self) -> None:
        if self.eval_split not in ("test", "valid", "pooled"):
            raise ConfigError(f"unknown eval_split {self.eval_split!r}")
        if not self.k_multipliers:
            raise ConfigError("need at least one recall multiplier")
        self.scorer.validate()
        self.diffusion.validate()
        self.distill.validate()
        self.ppr.validate()

    def echo(self) -> dict:
        return {
            "seed": self.seed,
            "neg_ratio": self.neg_ratio,
            "train_frac_outside": self.train_frac_outside,
            "scorer": vars(self.scorer) | {},
            "diffusion": vars(self.diffusion) | {},
            "distill": vars(self.distill) | {},
            "ppr": vars(self.ppr) | {},
            "k_multipliers": list(self.k_multipliers),
            "eval_split": self.eval_split,
        }


@dataclass
class EvalReport:
    """Per (regime, method) metric rows plus the config echo."""

    rows: list[dict]
    config: dict
    seed: int
    runtime_seconds: float

    def content_hash(self) -> str:
        """Digest of everything deterministic (wall-clock fields excluded)."""
        rows = [
            {k: v for k, v in row.items() if not k.startswith("runtime")}
            for row in self.rows
        ]
        payload = json.dumps(
            {"rows": rows, "config": self.config, "seed": self.seed},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_json(self) -> str:
        return json.dumps(
            {
                "rows": self.rows,
                "config": self.config,
                "seed": self.seed,
                "content_hash": self.content_hash(),
                "runtime_seconds": self.runtime_seconds,
            },
            sort_keys=True,
            indent=2,
        )

    def text_table(self) -> str:
        """Aligned-column table, one row per (regime, method, split)."""
        if not self.rows:
            return "(empty report)\n"
        metric_keys: list[str] = []
        for row in self.rows:
            for key in row:
                if key.startswith("recall_at_") and key not in metric_keys:
                    metric_keys.append(key)
        header = ["regime", "method", "split"] + metric_keys + ["precision", "accuracy"]
        table = [header]
        for row in self.rows:
            table.append(
                [str(row.get("regime")), str(row.get("method")), str(row.get("split"))]
                + [f"{row.get(k, float('nan')):.4f}" for k in metric_keys]
                + [f"{row.get('precision', float('nan')):.4f}",
                   f"{row.get('accuracy', float('nan')):.4f}"]
            )
        widths = [max(len(r[c]) for r in table) for c in range(len(header))]
        lines = []
        for i, row in enumerate(table):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def save(self, json_path=None, table_path=None) -> None:
        from pathlib import Path

        if json_path is not None:
            Path(json_path).write_text(self.to_json() + "\n", encoding="utf-8")
        if table_path is not None:
            Path(table_path).write_text(self.text_table(), encoding="utf-8")


def _mult_key(mult: float) -> str:
    return f"recall_at_{mult:g}x"


def evaluate_scores(
    scores: np.ndarray,
    labels: np.ndarray,
    k_multipliers: tuple[float, ...],
    threshold: float,
    seed: int,
) -> dict:
    """Recall at each multiplier of |positives| plus balanced precision/accuracy."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    out: dict = {"n_pos": n_pos, "n_neg": int(labels.size - n_pos)}
    for mult in k_multipliers:
        k = min(int(round(mult * n_pos)), scores.size)
        out[_mult_key(mult)] = recall_at(scores, labels, k)
    # balanced subset: all positives plus an equal-count negative subsample
    pos_idx = np.flatnonzero(labels == 1)
    neg_idx = np.flatnonzero(labels != 1)
    rng = np.random.default_rng(derive_seed(seed, "balanced-eval"))
    if neg_idx.size > pos_idx.size:
        neg_idx = neg_idx[np.sort(rng.permutation(neg_idx.size)[: pos_idx.size])]
    subset = np.concatenate([pos_idx, neg_idx])
    precision, accuracy = precision_accuracy(
        scores[subset], labels[subset], threshold=threshold
    )
    out["precision"] = precision
    out["accuracy"] = accuracy
    return out


def _eval_pairs(manifest, split: str):
    if split == "valid":
        pos, neg = manifest.valid_pos, manifest.valid_neg
    elif split == "test":
        pos, neg = manifest.test_pos, manifest.test_neg
    else:
        pos = manifest.valid_pos + manifest.test_pos
        neg = manifest.valid_neg + manifest.test_neg
    return list(pos), list(neg)


def shuffle_eval_order(pos_eval: list, neg_eval: list, seed: int):
    """Seeded interleave of evaluation edges.

    recall_at breaks score ties by input position, so a positives-first
    layout would hand methods with many tied scores (e.g. all-zero common
    neighbors) a free perfect ranking. A fixed shuffled order keeps ties
    honest and the run deterministic.
    """
    pairs = list(pos_eval) + list(neg_eval)
    labels = np.concatenate(
        [np.ones(len(pos_eval), dtype=np.int8), np.zeros(len(neg_eval), dtype=np.int8)]
    )
    rng = np.random.default_rng(derive_seed(seed, "eval-order"))
    perm = rng.permutation(len(pairs))
    return [pairs[i] for i in perm], labels[perm]


def method_scores(
    method: str,
    g_train: Graph,
    manifest,
    model,
    y: np.ndarray,
    z_all: np.ndarray,
    eval_ids: np.ndarray,
    config: SuiteConfig,
) -> np.ndarray:
    """Scores for the evaluation edges under one broadcast method.

    ``logit_lp`` and ``node_lp`` score every manifest edge at once and
    return the full vector in manifest order; the caller slices the
    evaluation block. All other methods score ``eval_ids`` directly.
    """
    if method == "scorer":
        return score_edges(y, eval_ids)
    if method == "logit_lp":
        return logit_lp(g_train, manifest, z_all, config.diffusion)
    if method == "node_lp":
        return node_centric_lp_ablation(g_train, manifest, z_all, config.diffusion)
    if method == "emb_lp":
        train_pos_ids = g_train.ids_for(
            [k for pair in manifest.train_pos for k in pair]
        ).reshape(-1, 2)
        return emb_lp(g_train, train_pos_ids, y, config.diffusion, eval_ids)
    if method == "xmc_lp":
        return xmc_scores(g_train, y, config.diffusion, eval_ids)
    if method == "mlp":
        student = imitate(
            y, g_train, config.distill, x_prime=model.x_prime
        )
        student = finetune_linkpred(student, manifest, g_train, config.distill)
        y_s = student_embed(student)
        return np.einsum("ij,ij->i", y_s[eval_ids[:, 0]], y_s[eval_ids[:, 1]])
    if method == "cn":
        return common_neighbors(g_train, eval_ids).astype(np.float64)
    if method == "aa":
        return adamic_adar(g_train, eval_ids)
    if method == "ppr":
        return ppr_scores(g_train, eval_ids, config.ppr)
    raise ConfigError(f"unknown method {method!r}")


def run_regime_suite(
    src: Graph,
    tar: Graph,
    methods: list[str],
    regimes: list[Regime],
    config: SuiteConfig,
) -> EvalReport:
    """Full comparison: one report row per (regime, method).

    Splits are seeded from the suite seed, the scorer trains on each
    regime's training-positive graph, and every method within a regime is
    evaluated on the same held-out edges.
    """
    config.validate()
    for method in methods:
        if method not in KNOWN_METHODS:
            raise ConfigError(f"unknown method {method!r}; options: {KNOWN_METHODS}")
    if not regimes:
        raise ConfigError("need at least one regime")
    started = time.perf_counter()
    union = union_graph(src, tar)
    rows: list[dict] = []
    for regime in regimes:
        manifest = make_split(
            regime,
            src,
            tar,
            neg_ratio=config.neg_ratio,
            train_frac_outside=config.train_frac_outside,
            seed=derive_seed(config.seed, "split"),
            union=union,
        )
        g_train = manifest_training_graph(manifest, src, tar, union=union)
        scorer_cfg = replace(config.scorer, seed=derive_seed(config.seed, "scorer"))
        model = train_scorer(scorer_cfg, g_train, manifest)
        y = embed(model, g_train)
        all_pairs = manifest.all_edges()
        all_ids = g_train.ids_for([k for pair in all_pairs for k in pair]).reshape(-1, 2)
        z_all = score_edges(y, all_ids)

        pos_eval, neg_eval = _eval_pairs(manifest, config.eval_split)
        eval_pairs, labels = shuffle_eval_order(pos_eval, neg_eval, config.seed)
        index_of = {pair: i for i, pair in enumerate(all_pairs)}
        eval_positions = np.array([index_of[p] for p in eval_pairs], dtype=np.int64)
        eval_ids = all_ids[eval_positions]

        for method in methods:
            t0 = time.perf_counter()
            full = method_scores(
                method, g_train, manifest, model, y, z_all, eval_ids, config
            )
            scores = full[eval_positions] if method in ("logit_lp", "node_lp") else full
            threshold = 0.5 if method in _CALIBRATED else 0.0
            row = {
                "regime": regime.value,
                "method": method,
                "split": config.eval_split,
                "threshold": threshold,
            }
            row.update(
                evaluate_scores(
                    scores, labels, config.k_multipliers, threshold, config.seed
                )
            )
            row["runtime_seconds"] = round(time.perf_counter() - t0, 6)
            rows.append(row)
    runtime = time.perf_counter() - started
    return EvalReport(
        rows=rows, config=config.echo(), seed=config.seed, runtime_seconds=runtime
    )
