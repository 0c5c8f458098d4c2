"""Edge-centric label propagation over scored edges.

The broadcast step turns edges into nodes: two original edges are adjacent
in the "line graph" exactly when they share an endpoint, so every original
node contributes a clique among its incident edges. Three variants ride the
same damped diffusion Z <- alpha*S*Z + (1-alpha)*G on a symmetric-normalized
operator S:

* logit-LP: diffuse residuals (train label minus sigmoid logit) over the
  positive+negative edge graph, then add the initial predictions back.
* embedding-LP: diffuse concatenated endpoint embeddings over the
  positive-edge graph, split them back per endpoint, and rescore by dot
  product of the updated node embeddings.
* matrix-LP: diffuse the full (or column-restricted) logit matrix over the
  original graph and read scores off matrix entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, NumericError
from .graph import Graph, _csr_from_edges

__all__ = [
    "DiffusionConfig",
    "LineGraph",
    "LineGraphCost",
    "build_line_graph",
    "sym_norm_adjacency",
    "diffuse",
    "sigmoid",
    "logit_lp",
    "emb_lp",
    "xmc_lp",
    "xmc_scores",
    "estimate_line_graph_cost",
    "cost_formulas",
]


@dataclass(frozen=True)
class DiffusionConfig:
    """Damping, iteration budget and early-stop tolerance for diffusion."""

    alpha: float = 0.8
    k_max: int = 50
    tol: float = 1e-6
    degree_cap: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be >= 0")
        if self.degree_cap is not None and self.degree_cap < 1:
            raise ConfigError("degree_cap must be >= 1 when set")


@dataclass(frozen=True)
class LineGraph:
    """Edge-centric graph: one node per original edge.

    Node ids follow the order of the (pos, neg) input lists, positives
    first. ``norm_adjacency`` is the symmetric-normalized operator with zero
    rows for isolated edge-nodes.
    """

    num_edge_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    edge_node_index: Mapping[tuple[int, int], int]
    norm_adjacency: sp.csr_array
    num_line_edges: int

    def degree(self, edge_node: int) -> int:
        return int(self.indptr[edge_node + 1] - self.indptr[edge_node])


def _as_canonical_ids(edges: Sequence | np.ndarray) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.stack([arr[:, 0], arr[:, 1]], axis=1)


def build_line_graph(
    g: Graph,
    pos: np.ndarray | Sequence,
    neg: np.ndarray | Sequence = (),
    degree_cap: int | None = None,
    seed: int = 0,
) -> LineGraph:
    """Construct the edge-centric graph over pos (and optionally neg) edges.

    Each original node adds a clique among its incident edge-nodes. A node
    whose incident count exceeds ``degree_cap`` instead links all incident
    edge-nodes to a seeded sample of ``degree_cap`` of them, which bounds the
    otherwise quadratic clique cost on hubs.
    """
    pos = _as_canonical_ids(pos)
    neg = _as_canonical_ids(neg)
    all_edges = np.concatenate([pos, neg], axis=0)
    m = all_edges.shape[0]
    if m == 0:
        raise DataError("cannot build a line graph over zero edges")
    lo = np.minimum(all_edges[:, 0], all_edges[:, 1])
    hi = np.maximum(all_edges[:, 0], all_edges[:, 1])
    if lo.min(initial=0) < 0 or hi.max(initial=-1) >= g.num_nodes:
        raise DataError("edge endpoint out of range")
    if np.any(lo == hi):
        raise DataError("self-loop among line-graph input edges")
    canonical = np.stack([lo, hi], axis=1)
    index: dict[tuple[int, int], int] = {}
    for i, (u, v) in enumerate(canonical):
        key = (int(u), int(v))
        if key in index:
            raise DataError(f"duplicate edge {key} in pos/neg input")
        index[key] = i

    # group incident edge-nodes by original endpoint
    node_of = np.concatenate([lo, hi])
    eid_of = np.concatenate([np.arange(m), np.arange(m)])
    order = np.argsort(node_of, kind="stable")
    node_sorted = node_of[order]
    eid_sorted = eid_of[order]
    boundaries = np.flatnonzero(np.diff(node_sorted)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [node_sorted.size]])

    rng = np.random.default_rng(seed)
    us: list[np.ndarray] = []
    vs: list[np.ndarray] = []
    for s, e in zip(starts, ends):
        k = e - s
        if k < 2:
            continue
        members = eid_sorted[s:e]
        if degree_cap is not None and k > degree_cap:
            anchors = rng.choice(members, size=degree_cap, replace=False)
            a = np.repeat(members, degree_cap)
            b = np.tile(anchors, k)
            keep = a != b
            pair_lo = np.minimum(a[keep], b[keep])
            pair_hi = np.maximum(a[keep], b[keep])
            pairs = np.unique(np.stack([pair_lo, pair_hi], axis=1), axis=0)
            us.append(pairs[:, 0])
            vs.append(pairs[:, 1])
        else:
            iu, iv = np.triu_indices(k, k=1)
            us.append(members[iu])
            vs.append(members[iv])
    if us:
        line_edges = np.stack(
            [np.concatenate(us), np.concatenate(vs)], axis=1
        ).astype(np.int64)
        line_edges = np.sort(line_edges, axis=1)
    else:
        line_edges = np.zeros((0, 2), dtype=np.int64)
    indptr, indices = _csr_from_edges(m, line_edges)

    degs = np.diff(indptr).astype(np.float64)
    inv_sqrt = np.zeros(m)
    nz = degs > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(degs[nz])
    rows = np.repeat(np.arange(m), np.diff(indptr))
    data = inv_sqrt[rows] * inv_sqrt[indices]
    norm = sp.csr_array((data, indices.copy(), indptr.copy()), shape=(m, m))

    return LineGraph(
        num_edge_nodes=m,
        indptr=indptr,
        indices=indices,
        edge_node_index=index,
        norm_adjacency=norm,
        num_line_edges=int(line_edges.shape[0]),
    )


def sym_norm_adjacency(g: Graph) -> sp.csr_array:
    """D^-1/2 A D^-1/2 over the original graph; zero rows when isolated."""
    n = g.num_nodes
    degs = g.degrees().astype(np.float64)
    inv_sqrt = np.zeros(n)
    nz = degs > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(degs[nz])
    rows = np.repeat(np.arange(n), g.degrees())
    data = inv_sqrt[rows] * inv_sqrt[g.indices]
    return sp.csr_array((data, g.indices.copy(), g.indptr.copy()), shape=(n, n))


def diffuse(
    operator: sp.csr_array | np.ndarray,
    z0: np.ndarray,
    source: np.ndarray,
    cfg: DiffusionConfig,
) -> np.ndarray:
    """Iterate Z <- alpha*S*Z + (1-alpha)*G from Z0.

    Stops after ``k_max`` rounds or once the max-abs step change drops below
    ``tol`` (set tol=0 to force exactly k_max iterations). Raises on
    non-finite intermediate values.
    """
    cfg.validate()
    z = np.asarray(z0, dtype=np.float64)
    g_mat = np.asarray(source, dtype=np.float64)
    squeeze = z.ndim == 1
    if squeeze:
        z = z[:, None]
        g_mat = g_mat[:, None]
    if z.shape != g_mat.shape:
        raise DataError(f"Z0 shape {z.shape} != source shape {g_mat.shape}")
    if operator.shape[0] != z.shape[0]:
        raise DataError(
            f"operator rows {operator.shape[0]} != state rows {z.shape[0]}"
        )
    alpha = cfg.alpha
    for _k in range(cfg.k_max):
        z_next = alpha * (operator @ z) + (1.0 - alpha) * g_mat
        if not np.all(np.isfinite(z_next)):
            raise NumericError(f"diffusion produced non-finite values at step {_k}")
        delta = float(np.max(np.abs(z_next - z))) if z.size else 0.0
        z = z_next
        if delta < cfg.tol:
            break
    return z[:, 0] if squeeze else z


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _manifest_edge_ids(g: Graph, manifest) -> dict[str, np.ndarray]:
    out = {}
    for name, pairs in manifest.splits().items():
        if pairs:
            flat = g.ids_for([k for pair in pairs for k in pair])
            arr = flat.reshape(-1, 2)
            arr = np.sort(arr, axis=1)
        else:
            arr = np.zeros((0, 2), dtype=np.int64)
        out[name] = arr
    return out


def logit_lp(
    g: Graph,
    manifest,
    z: np.ndarray,
    cfg: DiffusionConfig,
) -> np.ndarray:
    """Residual propagation over the positive+negative edge graph.

    ``z`` holds raw logits aligned with ``manifest.all_edges()``. Train
    edge-nodes seed the diffusion with (label - sigmoid(z)); all other
    edge-nodes start at zero. The diffused residual is added back onto the
    sigmoid predictions and clamped to [0, 1]. Returns calibrated scores in
    ``manifest.all_edges()`` order.
    """
    z = np.asarray(z, dtype=np.float64)
    ids = _manifest_edge_ids(g, manifest)
    counts = {k: v.shape[0] for k, v in ids.items()}
    total = sum(counts.values())
    if z.shape[0] != total:
        raise DataError(
            f"logit vector has {z.shape[0]} entries, manifest has {total} edges"
        )
    pos_arr = np.concatenate([ids["train_pos"], ids["valid_pos"], ids["test_pos"]])
    neg_arr = np.concatenate([ids["train_neg"], ids["valid_neg"], ids["test_neg"]])
    lg = build_line_graph(
        g, pos_arr, neg_arr, degree_cap=cfg.degree_cap, seed=cfg.seed
    )

    # map manifest order -> line-graph node ids
    order = ("train_pos", "train_neg", "valid_pos", "valid_neg", "test_pos", "test_neg")
    line_id = np.empty(total, dtype=np.int64)
    offset = 0
    for name in order:
        arr = ids[name]
        for i in range(arr.shape[0]):
            line_id[offset + i] = lg.edge_node_index[(int(arr[i, 0]), int(arr[i, 1]))]
        offset += arr.shape[0]

    p = sigmoid(z)
    p_line = np.empty(lg.num_edge_nodes)
    p_line[line_id] = p
    labels_line = np.zeros(lg.num_edge_nodes)
    train_mask_line = np.zeros(lg.num_edge_nodes, dtype=bool)
    tp, tn = counts["train_pos"], counts["train_neg"]
    labels_line[line_id[:tp]] = 1.0
    train_mask_line[line_id[: tp + tn]] = True

    source = np.zeros(lg.num_edge_nodes)
    source[train_mask_line] = labels_line[train_mask_line] - p_line[train_mask_line]
    z_final = diffuse(lg.norm_adjacency, source, source, cfg)
    scores_line = np.clip(p_line + z_final, 0.0, 1.0)
    return scores_line[line_id]


def emb_lp(
    g: Graph,
    pos: np.ndarray | Sequence,
    y: np.ndarray,
    cfg: DiffusionConfig,
    query_edges: np.ndarray | Sequence | None = None,
) -> np.ndarray:
    """Unsupervised embedding diffusion over the positive-edge graph.

    Each positive edge carries the concatenation [Y[i], Y[j]] (canonical
    endpoint order). After diffusion the two halves are handed back to the
    endpoints and averaged over incident edges; nodes without a positive
    edge keep their original embedding. Query edges are scored by dot
    product of the updated node embeddings. Returns updated embeddings when
    ``query_edges`` is None.
    """
    pos = _as_canonical_ids(pos)
    if pos.shape[0] == 0:
        raise DataError("embedding propagation needs a nonempty positive set")
    lo = np.minimum(pos[:, 0], pos[:, 1])
    hi = np.maximum(pos[:, 0], pos[:, 1])
    lg = build_line_graph(g, np.stack([lo, hi], axis=1),
                          degree_cap=cfg.degree_cap, seed=cfg.seed)
    d = y.shape[1]
    feats = np.concatenate([y[lo], y[hi]], axis=1)
    diffused = diffuse(lg.norm_adjacency, feats, feats, cfg)
    # an edge-node with no neighbor has nothing to mix with; keep it intact
    # rather than letting the damping shrink it toward (1-alpha)*G
    isolated = np.diff(lg.indptr) == 0
    diffused[isolated] = feats[isolated]

    y_upd = np.array(y, dtype=np.float64, copy=True)
    sums = np.zeros_like(y_upd)
    counts = np.zeros(y.shape[0])
    np.add.at(sums, lo, diffused[:, :d])
    np.add.at(sums, hi, diffused[:, d:])
    np.add.at(counts, lo, 1.0)
    np.add.at(counts, hi, 1.0)
    touched = counts > 0
    y_upd[touched] = sums[touched] / counts[touched, None]
    if query_edges is None:
        return y_upd
    q = _as_canonical_ids(query_edges)
    return np.einsum("ij,ij->i", y_upd[q[:, 0]], y_upd[q[:, 1]])


def xmc_lp(
    g: Graph,
    y: np.ndarray,
    cfg: DiffusionConfig,
    candidate_cols: np.ndarray | Sequence | None = None,
    dense_cap: int = 20000,
) -> np.ndarray:
    """Diffuse the logit matrix over the original graph.

    Without ``candidate_cols`` the full N x N logit matrix is diffused,
    which is refused above ``dense_cap`` nodes. With candidate columns only
    those columns are materialized; column j of the restricted run equals
    column candidate_cols[j] of the full run because diffusion acts
    column-independently.
    """
    n = g.num_nodes
    if y.shape[0] != n:
        raise DataError("embedding row count does not match graph")
    if candidate_cols is None:
        if n > dense_cap:
            raise ConfigError(
                f"{n} nodes exceeds the dense cap {dense_cap}; "
                "pass candidate_cols to restrict the score matrix"
            )
        z0 = y @ y.T
    else:
        cols = np.asarray(candidate_cols, dtype=np.int64)
        z0 = y @ y[cols].T
    operator = sym_norm_adjacency(g)
    return diffuse(operator, z0, z0, cfg)


def xmc_scores(
    g: Graph,
    y: np.ndarray,
    cfg: DiffusionConfig,
    query_edges: np.ndarray | Sequence,
    dense_cap: int = 20000,
) -> np.ndarray:
    """Score query edges via matrix diffusion restricted to their columns.

    Edge (u, v) in canonical order reads entry (u, v) of the diffused
    matrix, i.e. row u, column v.
    """
    q = _as_canonical_ids(query_edges)
    lo = np.minimum(q[:, 0], q[:, 1])
    hi = np.maximum(q[:, 0], q[:, 1])
    cols, col_inv = np.unique(hi, return_inverse=True)
    z = xmc_lp(g, y, cfg, candidate_cols=cols, dense_cap=dense_cap)
    return z[lo, col_inv]


@dataclass(frozen=True)
class LineGraphCost:
    """Exact and estimated size/cost of the edge-centric graph."""

    num_edge_nodes: int
    num_nodes: int
    mean_degree: float
    exact_line_edges: int
    exact_directed_incidences: int
    approx_line_edges: float
    embed_dim: int
    multiplies: dict


def cost_formulas(n_e: float, mean_deg: float, d: int, n_nodes: int) -> dict:
    """Per-iteration multiply counts from the closed-form size estimate."""
    n_line = 4.0 * n_e * mean_deg
    return {
        "n_line_edges_estimate": n_line,
        "emb_lp": n_line * d,
        "logit_lp": n_line * 1.0,
        "xmc_lp": float(n_e) * float(n_nodes),
    }


def estimate_line_graph_cost(
    g: Graph,
    pos: np.ndarray | Sequence,
    neg: np.ndarray | Sequence = (),
    d: int = 64,
) -> LineGraphCost:
    """Predict line-graph size by degree arithmetic, next to the estimate.

    The exact undirected count is sum_v C(k_v, 2) over per-node incident
    edge counts k_v; the estimate is 4 * |edges| * mean_degree. Multiply
    counts are reported for both.
    """
    pos = _as_canonical_ids(pos)
    neg = _as_canonical_ids(neg)
    all_edges = np.concatenate([pos, neg], axis=0)
    m = all_edges.shape[0]
    inc = np.zeros(g.num_nodes, dtype=np.int64)
    if m:
        np.add.at(inc, all_edges.ravel(), 1)
    exact = int(np.sum(inc * (inc - 1) // 2))
    mean_deg = 2.0 * g.num_edges / g.num_nodes if g.num_nodes else 0.0
    formulas = cost_formulas(m, mean_deg, d, g.num_nodes)
    return LineGraphCost(
        num_edge_nodes=m,
        num_nodes=g.num_nodes,
        mean_degree=mean_deg,
        exact_line_edges=exact,
        exact_directed_incidences=2 * exact,
        approx_line_edges=formulas["n_line_edges_estimate"],
        embed_dim=d,
        multiplies={
            "formula": {
                "emb_lp": formulas["emb_lp"],
                "logit_lp": formulas["logit_lp"],
                "xmc_lp": formulas["xmc_lp"],
            },
            "exact": {
                "emb_lp": float(2 * exact * d),
                "logit_lp": float(2 * exact),
                "xmc_lp": float(m) * float(g.num_nodes),
            },
        },
    )
