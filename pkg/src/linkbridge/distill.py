"""Pointwise MLP student distilled from the scorer's embeddings.

The student is a 2-layer rectifier MLP mapping each node's [X, X'] input to
the teacher's embedding space. It first imitates the teacher embeddings
under mean squared error, then fine-tunes on the pairwise ranking loss over
its own inner-product logits. Inference touches node features only, never
the adjacency, so isolated and low-degree nodes score exactly like any
other node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, NumericError
from .graph import Graph
from .metrics import recall_at

__all__ = [
    "DistillConfig",
    "MlpModel",
    "student_embed",
    "imitate",
    "finetune_linkpred",
    "imitation_loss_and_grads",
    "finetune_loss_and_grads",
]


@dataclass(frozen=True)
class DistillConfig:
    hidden: int = 128
    learning_rate: float = 0.02
    batch_size: int = 256
    max_epochs: int = 200
    seed: int = 0
    train_xprime: bool = False
    plateau_tol: float = 1e-4
    plateau_epochs: int = 5
    finetune_epochs: int = 20
    finetune_lr: float = 0.01
    finetune_batch_size: int = 256

    def validate(self) -> None:
        if self.hidden < 1:
            raise DataError("hidden width must be >= 1")
        if self.learning_rate < 0 or self.finetune_lr < 0:
            raise DataError("learning rates must be >= 0")
        if self.max_epochs < 0 or self.finetune_epochs < 0:
            raise DataError("epoch budgets must be >= 0")


@dataclass
class MlpModel:
    """2-layer student: [X, X'] -> hidden (relu) -> teacher embedding dim."""

    config: DistillConfig
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    x_prime: np.ndarray
    features: np.ndarray | None
    imitation_mse: float | None = None
    loss_trace: list[float] = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return int(self.x_prime.shape[0])

    def input_matrix(self) -> np.ndarray:
        xp = self.x_prime.astype(np.float64, copy=False)
        if self.features is None:
            return xp
        return np.concatenate([self.features.astype(np.float64), xp], axis=1)


def _init_mlp(config: DistillConfig, d_in: int, d_out: int, rng) -> tuple:
    s1 = np.sqrt(2.0 / d_in)
    s2 = np.sqrt(2.0 / config.hidden)
    w1 = rng.normal(0.0, s1, size=(d_in, config.hidden))
    b1 = np.zeros(config.hidden)
    w2 = rng.normal(0.0, s2, size=(config.hidden, d_out))
    b2 = np.zeros(d_out)
    return w1, b1, w2, b2


def student_embed(model: MlpModel, rows: np.ndarray | None = None) -> np.ndarray:
    """Student embeddings from node inputs alone (no adjacency access)."""
    h = model.input_matrix()
    if rows is not None:
        h = h[np.asarray(rows, dtype=np.int64)]
    hidden = np.maximum(h @ model.w1 + model.b1, 0.0)
    return hidden @ model.w2 + model.b2


def _imitation_pass(
    model: MlpModel, teacher_y: np.ndarray, rows: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    h_full = model.input_matrix()
    h = h_full[rows]
    a = h @ model.w1 + model.b1
    z1 = np.maximum(a, 0.0)
    out = z1 @ model.w2 + model.b2
    err = out - teacher_y[rows]
    denom = err.size
    loss = float(np.sum(err * err) / denom)
    d_out = 2.0 * err / denom
    grads = {
        "w2": z1.T @ d_out,
        "b2": d_out.sum(axis=0),
    }
    dz1 = d_out @ model.w2.T
    da = dz1 * (a > 0)
    grads["w1"] = h.T @ da
    grads["b1"] = da.sum(axis=0)
    if model.config.train_xprime:
        dh = da @ model.w1.T
        d_x = 0 if model.features is None else model.features.shape[1]
        dxp = np.zeros_like(model.x_prime, dtype=np.float64)
        np.add.at(dxp, rows, dh[:, d_x:])
        grads["x_prime"] = dxp
    return loss, grads


def imitation_loss_and_grads(
    model: MlpModel, teacher_y: np.ndarray, rows: np.ndarray | None = None
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared imitation error and analytic gradients (for checks)."""
    if rows is None:
        rows = np.arange(model.num_nodes)
    return _imitation_pass(model, teacher_y, np.asarray(rows, dtype=np.int64))


def _apply_grads(model: MlpModel, grads: dict[str, np.ndarray], lr: float) -> None:
    model.w1 -= lr * grads["w1"]
    model.b1 -= lr * grads["b1"]
    model.w2 -= lr * grads["w2"]
    model.b2 -= lr * grads["b2"]
    if "x_prime" in grads:
        model.x_prime = model.x_prime - lr * grads["x_prime"]


def imitate(
    teacher_y: np.ndarray,
    g: Graph,
    config: DistillConfig,
    x_prime: np.ndarray,
) -> MlpModel:
    """Fit the student to the teacher embeddings until the loss plateaus.

    ``x_prime`` is the teacher's trained table; it stays frozen unless
    ``config.train_xprime`` asks for joint optimization. The fitted model
    records the final imitation MSE and the per-epoch loss trace.
    """
    config.validate()
    if teacher_y.shape[0] != g.num_nodes:
        raise DataError("teacher embeddings do not cover all nodes")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xD157]))
    d_x = 0 if g.features is None else g.features.shape[1]
    d_in = d_x + x_prime.shape[1]
    w1, b1, w2, b2 = _init_mlp(config, d_in, teacher_y.shape[1], rng)
    model = MlpModel(
        config=config,
        w1=w1, b1=b1, w2=w2, b2=b2,
        x_prime=np.array(x_prime, dtype=np.float64, copy=True),
        features=g.features,
    )
    n = g.num_nodes
    trace: list[float] = []
    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            rows = perm[start : start + config.batch_size]
            loss, grads = _imitation_pass(model, teacher_y, rows)
            if not np.isfinite(loss):
                raise NumericError(f"imitation diverged at epoch {epoch}")
            losses.append(loss)
            _apply_grads(model, grads, config.learning_rate)
        trace.append(float(np.mean(losses)))
        if len(trace) > config.plateau_epochs:
            past = trace[-config.plateau_epochs - 1]
            if past > 0 and (past - trace[-1]) / past < config.plateau_tol:
                break
    final_loss, _ = imitation_loss_and_grads(model, teacher_y)
    model.imitation_mse = final_loss
    model.loss_trace = trace
    return model


def _finetune_pass(
    model: MlpModel, pos: np.ndarray, neg: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    b = pos.shape[0]
    nodes = np.concatenate([pos.ravel(), neg.ravel()])
    rows, inv = np.unique(nodes, return_inverse=True)
    h_rows = model.input_matrix()[rows]
    a = h_rows @ model.w1 + model.b1
    z1 = np.maximum(a, 0.0)
    y_rows = z1 @ model.w2 + model.b2

    pu, pv = inv[0:b], inv[b : 2 * b]
    nu, nv = inv[2 * b : 3 * b], inv[3 * b :]
    z_pos = np.einsum("ij,ij->i", y_rows[pu], y_rows[pv])
    z_neg = np.einsum("ij,ij->i", y_rows[nu], y_rows[nv])
    resid = 1.0 - z_pos + z_neg
    loss = float(np.mean(resid * resid))
    dz_pos = -2.0 * resid / b
    dz_neg = 2.0 * resid / b
    dy = np.zeros_like(y_rows)
    np.add.at(dy, pu, dz_pos[:, None] * y_rows[pv])
    np.add.at(dy, pv, dz_pos[:, None] * y_rows[pu])
    np.add.at(dy, nu, dz_neg[:, None] * y_rows[nv])
    np.add.at(dy, nv, dz_neg[:, None] * y_rows[nu])

    grads = {"w2": z1.T @ dy, "b2": dy.sum(axis=0)}
    dz1 = dy @ model.w2.T
    da = dz1 * (a > 0)
    grads["w1"] = h_rows.T @ da
    grads["b1"] = da.sum(axis=0)
    if model.config.train_xprime:
        dh = da @ model.w1.T
        d_x = 0 if model.features is None else model.features.shape[1]
        dxp = np.zeros_like(model.x_prime, dtype=np.float64)
        np.add.at(dxp, rows, dh[:, d_x:])
        grads["x_prime"] = dxp
    return loss, grads


def finetune_loss_and_grads(
    model: MlpModel, pos_edges: np.ndarray, neg_edges: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Ranking loss over student logits with analytic gradients (for checks).

    Index-matched with cycling, no shuffling: a pure function of parameters.
    """
    pos = np.asarray(pos_edges, dtype=np.int64)
    neg = np.asarray(neg_edges, dtype=np.int64)
    if pos.size == 0 or neg.size == 0:
        raise DataError("need nonempty positive and negative edge arrays")
    length = max(pos.shape[0], neg.shape[0])
    idx = np.arange(length)
    return _finetune_pass(model, pos[idx % pos.shape[0]], neg[idx % neg.shape[0]])


def finetune_linkpred(
    model: MlpModel, manifest, g: Graph, config: DistillConfig | None = None
) -> MlpModel:
    """Continue training the student on the link prediction loss.

    Mini-batch SGD over matched train pos/neg pairs; returns the checkpoint
    with the best validation recall (at |valid_pos|), matching the scorer's
    selection rule.
    """
    config = config or model.config
    config.validate()

    def ids(pairs) -> np.ndarray:
        if not pairs:
            return np.zeros((0, 2), dtype=np.int64)
        return g.ids_for([k for pair in pairs for k in pair]).reshape(-1, 2)

    pos, neg = ids(manifest.train_pos), ids(manifest.train_neg)
    valid_pos, valid_neg = ids(manifest.valid_pos), ids(manifest.valid_neg)
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise DataError("manifest has empty training splits")

    work = replace(model)
    work.w1, work.b1 = model.w1.copy(), model.b1.copy()
    work.w2, work.b2 = model.w2.copy(), model.b2.copy()
    work.x_prime = model.x_prime.copy()
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xF17E]))

    def valid_recall() -> float:
        y = student_embed(work)
        z = np.concatenate([
            np.einsum("ij,ij->i", y[valid_pos[:, 0]], y[valid_pos[:, 1]]),
            np.einsum("ij,ij->i", y[valid_neg[:, 0]], y[valid_neg[:, 1]]),
        ])
        labels = np.concatenate([
            np.ones(valid_pos.shape[0], dtype=np.int8),
            np.zeros(valid_neg.shape[0], dtype=np.int8),
        ])
        return recall_at(z, labels, valid_pos.shape[0])

    has_valid = valid_pos.shape[0] > 0 and valid_neg.shape[0] > 0
    best_rec = valid_recall() if has_valid else -1.0
    best = (work.w1.copy(), work.b1.copy(), work.w2.copy(), work.b2.copy(),
            work.x_prime.copy())
    length = max(pos.shape[0], neg.shape[0])
    for epoch in range(config.finetune_epochs):
        pp = rng.permutation(pos.shape[0])
        pn = rng.permutation(neg.shape[0])
        idx = np.arange(length)
        epos, eneg = pos[pp[idx % pos.shape[0]]], neg[pn[idx % neg.shape[0]]]
        for start in range(0, length, config.finetune_batch_size):
            bp = epos[start : start + config.finetune_batch_size]
            bn = eneg[start : start + config.finetune_batch_size]
            loss, grads = _finetune_pass(work, bp, bn)
            if not np.isfinite(loss):
                raise NumericError(f"fine-tuning diverged at epoch {epoch}")
            _apply_grads(work, grads, config.finetune_lr)
        if has_valid:
            rec = valid_recall()
            if rec > best_rec:
                best_rec = rec
                best = (work.w1.copy(), work.b1.copy(), work.w2.copy(),
                        work.b2.copy(), work.x_prime.copy())
    if has_valid:
        work.w1, work.b1, work.w2, work.b2, work.x_prime = best
    return work
