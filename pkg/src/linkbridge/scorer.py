"""Base link scorer: trainable node table, inner-product edge logits.

Each node's representation concatenates its frozen feature row with a
trainable row; an optional one-hop encoder adds the neighborhood mean and
projects through a shared weight matrix. An edge logit is the inner product
of its endpoint embeddings, and training minimizes the squared pairwise
ranking loss (1 - z_pos + z_neg)^2 over matched positive/negative batches
with plain (optionally momentum) SGD. Gradients are closed-form; no autodiff
framework is involved, which keeps runs deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import DataError, NumericError
from .graph import Graph
from .metrics import recall_at

__all__ = [
    "ScorerConfig",
    "ScorerModel",
    "init_model",
    "embed",
    "score_edges",
    "auc_loss",
    "train_scorer",
    "training_loss_and_grads",
    "mean_aggregator",
]

ENCODERS = ("embedding_only", "one_hop_mean")


@dataclass(frozen=True)
class ScorerConfig:
    d_trainable: int = 64
    encoder: str = "embedding_only"
    learning_rate: float = 0.05
    batch_size: int = 512
    epochs: int = 30
    seed: int = 0
    l2_weight: float = 0.0
    momentum: float = 0.0
    d_out: int | None = None

    def validate(self) -> None:
        if self.d_trainable < 1:
            raise DataError("d_trainable must be >= 1")
        if self.learning_rate < 0:
            raise DataError("learning_rate must be >= 0")
        if self.encoder not in ENCODERS:
            raise DataError(f"unknown encoder {self.encoder!r}; options: {ENCODERS}")
        if self.batch_size < 1 or self.epochs < 0:
            raise DataError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise DataError("momentum must be in [0, 1)")


@dataclass
class ScorerModel:
    """Trainable state plus a handle on the frozen feature matrix."""

    config: ScorerConfig
    x_prime: np.ndarray
    encoder_weights: np.ndarray | None
    features: np.ndarray | None
    loss_trace: list[float] = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return int(self.x_prime.shape[0])

    @property
    def d_in(self) -> int:
        d_x = 0 if self.features is None else self.features.shape[1]
        return int(d_x + self.x_prime.shape[1])

    def input_matrix(self) -> np.ndarray:
        """Per-node encoder input [X, X'] as float64."""
        xp = self.x_prime.astype(np.float64, copy=False)
        if self.features is None:
            return xp
        return np.concatenate([self.features.astype(np.float64), xp], axis=1)


def init_model(config: ScorerConfig, g: Graph) -> ScorerModel:
    """Seeded init: X' uniform in [-1/sqrt(d), 1/sqrt(d)], likewise W."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    bound = 1.0 / np.sqrt(config.d_trainable)
    x_prime = rng.uniform(-bound, bound, size=(g.num_nodes, config.d_trainable))
    weights = None
    if config.encoder == "one_hop_mean":
        d_x = g.feature_dim
        d_in = d_x + config.d_trainable
        d_out = config.d_out if config.d_out is not None else d_in
        wb = 1.0 / np.sqrt(d_in)
        weights = rng.uniform(-wb, wb, size=(d_in, d_out))
    return ScorerModel(
        config=config,
        x_prime=x_prime,
        encoder_weights=weights,
        features=g.features,
    )


def mean_aggregator(g: Graph) -> sp.csr_array:
    """Row-normalized adjacency D^-1 A; isolated nodes get a zero row."""
    n = g.num_nodes
    degs = g.degrees().astype(np.float64)
    inv = np.zeros(n)
    nz = degs > 0
    inv[nz] = 1.0 / degs[nz]
    rows = np.repeat(np.arange(n), g.degrees())
    data = inv[rows]
    return sp.csr_array((data, g.indices.copy(), g.indptr.copy()), shape=(n, n))


def embed(model: ScorerModel, g: Graph) -> np.ndarray:
    """Per-node embeddings Y for the whole graph."""
    if model.num_nodes != g.num_nodes:
        raise DataError(
            f"model has {model.num_nodes} node rows, graph has {g.num_nodes}"
        )
    h = model.input_matrix()
    if model.config.encoder == "embedding_only":
        return h
    agg = mean_aggregator(g)
    return (h + agg @ h) @ model.encoder_weights


def score_edges(y: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Inner-product logits for an (m, 2) array of node index pairs."""
    edges = np.asarray(edges)
    if edges.size == 0:
        return np.zeros(0)
    if edges.max(initial=-1) >= y.shape[0] or edges.min(initial=0) < 0:
        raise DataError("edge endpoint index out of range")
    return np.einsum("ij,ij->i", y[edges[:, 0]], y[edges[:, 1]])


def auc_loss(z_pos: np.ndarray, z_neg: np.ndarray) -> float:
    """Squared pairwise ranking loss, summed over index-matched pairs.

    The shorter logit vector cycles so every entry of the longer one is
    paired exactly once.
    """
    z_pos, z_neg = np.asarray(z_pos, dtype=np.float64), np.asarray(z_neg, dtype=np.float64)
    if z_pos.size == 0 or z_neg.size == 0:
        raise DataError("need at least one positive and one negative logit")
    length = max(z_pos.size, z_neg.size)
    idx = np.arange(length)
    diff = 1.0 - z_pos[idx % z_pos.size] + z_neg[idx % z_neg.size]
    return float(np.sum(diff * diff))


def _pair_indices(n_pos: int, n_neg: int, rng: np.random.Generator | None):
    """Index-matched (pos, neg) id arrays covering the longer list once."""
    length = max(n_pos, n_neg)
    if rng is None:
        pp, pn = np.arange(n_pos), np.arange(n_neg)
    else:
        pp, pn = rng.permutation(n_pos), rng.permutation(n_neg)
    idx = np.arange(length)
    return pp[idx % n_pos], pn[idx % n_neg]


def _batch_loss_and_grads(
    h: np.ndarray,
    weights: np.ndarray | None,
    agg: sp.csr_matrix | None,
    encoder: str,
    pos_edges: np.ndarray,
    neg_edges: np.ndarray,
    d_x: int,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray | None]:
    """Mean pair loss and gradients w.r.t. X' (dense) and W for one batch."""
    b = pos_edges.shape[0]
    nodes = np.concatenate([pos_edges.ravel(), neg_edges.ravel()])
    rows, inv = np.unique(nodes, return_inverse=True)
    r = rows.size

    if encoder == "embedding_only":
        y_rows = h[rows]
    else:
        agg_rows = agg[rows, :]
        p_rows = h[rows] + agg_rows @ h
        y_rows = p_rows @ weights

    pu, pv = inv[0:b], inv[b : 2 * b]
    nu, nv = inv[2 * b : 3 * b], inv[3 * b :]
    z_pos = np.einsum("ij,ij->i", y_rows[pu], y_rows[pv])
    z_neg = np.einsum("ij,ij->i", y_rows[nu], y_rows[nv])
    resid = 1.0 - z_pos + z_neg
    loss = float(np.mean(resid * resid))

    dz_pos = -2.0 * resid / b
    dz_neg = 2.0 * resid / b
    dy_rows = np.zeros_like(y_rows)
    np.add.at(dy_rows, pu, dz_pos[:, None] * y_rows[pv])
    np.add.at(dy_rows, pv, dz_pos[:, None] * y_rows[pu])
    np.add.at(dy_rows, nu, dz_neg[:, None] * y_rows[nv])
    np.add.at(dy_rows, nv, dz_neg[:, None] * y_rows[nu])

    n, d_in = h.shape
    if encoder == "embedding_only":
        dh = np.zeros((n, d_in))
        np.add.at(dh, rows, dy_rows)
        dw = None
    else:
        dw = p_rows.T @ dy_rows
        dp_rows = dy_rows @ weights.T
        dh = np.zeros((n, d_in))
        np.add.at(dh, rows, dp_rows)
        dh += agg_rows.T @ dp_rows
        if l2:
            dw += 2.0 * l2 * weights
            loss += l2 * float(np.sum(weights * weights))

    dxp = dh[:, d_x:]
    if l2:
        xp = h[:, d_x:]
        dxp = dxp + 2.0 * l2 * xp
        loss += l2 * float(np.sum(xp * xp))
    return loss, dxp, dw


def training_loss_and_grads(
    model: ScorerModel,
    g: Graph,
    pos_edges: np.ndarray,
    neg_edges: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients over index-matched pos/neg edge arrays.

    The shorter list is cycled to the longer one's length (no shuffling),
    so the value is a pure deterministic function of the model parameters;
    finite-difference tests probe exactly this.
    """
    pos_edges = np.asarray(pos_edges, dtype=np.int64)
    neg_edges = np.asarray(neg_edges, dtype=np.int64)
    if pos_edges.size == 0 or neg_edges.size == 0:
        raise DataError("need nonempty positive and negative edge arrays")
    pp, pn = _pair_indices(pos_edges.shape[0], neg_edges.shape[0], rng=None)
    h = model.input_matrix()
    d_x = 0 if model.features is None else model.features.shape[1]
    agg = mean_aggregator(g) if model.config.encoder == "one_hop_mean" else None
    loss, dxp, dw = _batch_loss_and_grads(
        h,
        model.encoder_weights,
        agg,
        model.config.encoder,
        pos_edges[pp],
        neg_edges[pn],
        d_x,
        model.config.l2_weight,
    )
    grads = {"x_prime": dxp}
    if dw is not None:
        grads["encoder_weights"] = dw
    return loss, grads


def _valid_recall(
    h: np.ndarray,
    weights: np.ndarray | None,
    agg: sp.csr_matrix | None,
    encoder: str,
    valid_pos: np.ndarray,
    valid_neg: np.ndarray,
) -> float:
    y = h if encoder == "embedding_only" else (h + agg @ h) @ weights
    z = np.concatenate([score_edges(y, valid_pos), score_edges(y, valid_neg)])
    labels = np.concatenate(
        [np.ones(len(valid_pos), dtype=np.int8), np.zeros(len(valid_neg), dtype=np.int8)]
    )
    return recall_at(z, labels, len(valid_pos))


def train_scorer(config: ScorerConfig, g_train: Graph, manifest) -> ScorerModel:
    """Fit the scorer on a manifest's training edges.

    Mini-batch SGD over shuffled index-matched pos/neg pairs; after each
    epoch the model is scored on the validation split and the best
    checkpoint (recall at |valid_pos|) is returned. The per-epoch mean batch
    loss lands in ``model.loss_trace``.
    """
    config.validate()
    if len(manifest.train_pos) == 0 or len(manifest.train_neg) == 0:
        raise DataError("manifest has empty training splits")
    model = init_model(config, g_train)

    def ids(pairs) -> np.ndarray:
        if not pairs:
            return np.zeros((0, 2), dtype=np.int64)
        flat = g_train.ids_for([k for pair in pairs for k in pair])
        return flat.reshape(-1, 2)

    pos = ids(manifest.train_pos)
    neg = ids(manifest.train_neg)
    valid_pos = ids(manifest.valid_pos)
    valid_neg = ids(manifest.valid_neg)

    d_x = 0 if g_train.features is None else g_train.features.shape[1]
    h = model.input_matrix().copy()
    weights = None if model.encoder_weights is None else model.encoder_weights.copy()
    agg = mean_aggregator(g_train) if config.encoder == "one_hop_mean" else None

    vel_xp = np.zeros_like(h[:, d_x:])
    vel_w = np.zeros_like(weights) if weights is not None else None
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5C0E]))

    best: tuple[float, np.ndarray, np.ndarray | None] | None = None
    trace: list[float] = []
    for _epoch in range(config.epochs):
        pp, pn = _pair_indices(pos.shape[0], neg.shape[0], rng)
        epoch_pos, epoch_neg = pos[pp], neg[pn]
        losses = []
        for start in range(0, epoch_pos.shape[0], config.batch_size):
            bp = epoch_pos[start : start + config.batch_size]
            bn = epoch_neg[start : start + config.batch_size]
            loss, dxp, dw = _batch_loss_and_grads(
                h, weights, agg, config.encoder, bp, bn, d_x, config.l2_weight
            )
            if not np.isfinite(loss):
                raise NumericError(
                    f"training diverged: non-finite loss {loss} at epoch {_epoch}"
                )
            losses.append(loss)
            if config.momentum > 0:
                vel_xp *= config.momentum
                vel_xp += dxp
                h[:, d_x:] -= config.learning_rate * vel_xp
                if dw is not None:
                    vel_w *= config.momentum
                    vel_w += dw
                    weights -= config.learning_rate * vel_w
            else:
                h[:, d_x:] -= config.learning_rate * dxp
                if dw is not None:
                    weights -= config.learning_rate * dw
        trace.append(float(np.mean(losses)) if losses else 0.0)
        if len(valid_pos) and len(valid_neg):
            rec = _valid_recall(h, weights, agg, config.encoder, valid_pos, valid_neg)
            if best is None or rec > best[0]:
                best = (rec, h[:, d_x:].copy(), None if weights is None else weights.copy())

    if best is not None:
        x_final, w_final = best[1], best[2]
    else:
        x_final, w_final = h[:, d_x:].copy(), None if weights is None else weights.copy()
    return replace(
        model, x_prime=x_final, encoder_weights=w_final, loss_trace=trace
    )
