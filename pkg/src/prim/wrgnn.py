"""Weighted relational GNN layer: spatial-aware multi-head attention,
intra/inter-relation aggregation and relation-embedding refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import PoiGraph
from .tensor import (NonFiniteError, Tensor, concat, leaky_relu, matmul, mul, relu,
                     reshape, segment_softmax, take, transpose, weighted_gather_sum)


def distance_features(d_km, centers=(0.0, 0.5, 1.0, 2.0, 4.0, 8.0), width: float = 1.0) -> np.ndarray:
    """Fixed Gaussian RBF expansion of a distance; shape (..., len(centers))."""
    d = np.asarray(d_km, dtype=np.float64)[..., None]
    c = np.asarray(centers, dtype=np.float64)
    return np.exp(-((d - c) ** 2) / width ** 2)


@dataclass
class RelationEdges:
    """Directed edges of one structural relation, sorted by (dst, src)."""

    relation: int
    dst: np.ndarray
    src: np.ndarray
    features: np.ndarray  # (E, K_d) distance features

    def __post_init__(self):
        # canonical order makes every summation independent of storage order
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.src = np.asarray(self.src, dtype=np.int64)
        order = np.lexsort((self.src, self.dst))
        if np.any(order != np.arange(len(order))):
            self.dst, self.src = self.dst[order], self.src[order]
            self.features = np.asarray(self.features)[order]

    def without(self, pairs: np.ndarray, n: int) -> "RelationEdges":
        """Copy with every edge between the given unordered pairs removed."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs) == 0 or len(self.dst) == 0:
            return self
        lo, hi = pairs.min(axis=1), pairs.max(axis=1)
        drop = np.isin(np.minimum(self.dst, self.src) * n + np.maximum(self.dst, self.src), lo * n + hi)
        keep = ~drop
        return RelationEdges(self.relation, self.dst[keep], self.src[keep], self.features[keep])

    def isolating(self, nodes: np.ndarray, n: int) -> "RelationEdges":
        """Copy without edges touching ``nodes``; self loops stay."""
        if len(nodes) == 0 or len(self.dst) == 0:
            return self
        mask = np.zeros(n, dtype=bool)
        mask[nodes] = True
        keep = ~(mask[self.dst] | mask[self.src]) | (self.dst == self.src)
        return RelationEdges(self.relation, self.dst[keep], self.src[keep], self.features[keep])


def build_edges(graph: PoiGraph, centers, width: float) -> list[RelationEdges]:
    """Edges for every data relation plus the implicit self loops (d = 0)."""
    out = []
    for r in graph.data_relations:
        dst, src = graph.edge_list(r.id)
        d = graph.distance_km(dst, src) if len(dst) else np.zeros(0)
        out.append(RelationEdges(r.id, dst, src, distance_features(d, centers, width)))
    self_id = graph.relation("self").id
    loop = np.arange(graph.n, dtype=np.int64)
    out.append(RelationEdges(self_id, loop, loop, distance_features(np.zeros(graph.n), centers, width)))
    return out


@dataclass
class LayerParams:
    W: Tensor        # (d_p, d_in): K head blocks of d_p/K rows each
    W_rel: Tensor    # (d_p, d_p), shared by all relations
    W_att: Tensor    # (d_att, d_in)
    W_dist: Tensor   # (d_f, K_d)
    att: Tensor      # (n_relations, K, 2*d_att + d_f)


def gamma(hstar: Tensor, h_rel: Tensor, category_dim: int, scope: str = "graph_part") -> Tensor:
    """Relation-specific composition: element-wise product with the relation
    vector.  ``graph_part`` leaves the category block unscaled; ``full``
    scales it by the relation vector as well."""
    if category_dim == 0:
        return mul(hstar, reshape(h_rel, (1, -1)))
    if scope == "full":
        factor = concat([h_rel, h_rel], axis=0)
    else:
        factor = concat([h_rel, Tensor(np.ones(category_dim))], axis=0)
    return mul(hstar, reshape(factor, (1, -1)))


def attention_weights(hstar: Tensor, edges: RelationEdges, params: LayerParams, heads: int,
                      n: int, slope: float = 0.2) -> Tensor:
    """alpha (E, K): LeakyReLU(a_r . [W_a h_i || W_a h_j || W_d d_ij]) softmaxed
    over each target's neighbors, per head."""
    d_att = params.W_att.shape[0]
    proj = matmul(hstar, transpose(params.W_att))                  # (n, d_att)
    a = params.att[edges.relation]                                 # (K, 2*d_att + d_f)
    target = matmul(proj, transpose(a[:, :d_att]))                 # (n, K)
    neighbor = matmul(proj, transpose(a[:, d_att:2 * d_att]))      # (n, K)
    dist = matmul(Tensor(edges.features), transpose(params.W_dist))  # (E, d_f)
    logits = (take(target, edges.dst) + take(neighbor, edges.src)
              + matmul(dist, transpose(a[:, 2 * d_att:])))
    return segment_softmax(leaky_relu(logits, slope), edges.dst, n)


def aggregate_layer(h: Tensor, q: Tensor | None, rel: Tensor, params: LayerParams,
                    edge_sets: list[RelationEdges], heads: int, scope: str = "graph_part",
                    slope: float = 0.2, return_attention: bool = False):
    """One layer of two-level aggregation.

    h_i' = ||_k ReLU( sum_r sum_{j in N_i^r} alpha_ijk^r W_k gamma(h*_j, h_r) )
    """
    n, d_p = h.shape
    hstar = concat([h, q], axis=1) if q is not None else h
    category_dim = q.shape[1] if q is not None else 0
    total = None
    alphas = {}
    for edges in edge_sets:
        if len(edges.dst) == 0:
            continue
        alpha = attention_weights(hstar, edges, params, heads, n, slope)
        alphas[edges.relation] = alpha
        composed = gamma(hstar, rel[edges.relation], category_dim, scope)
        messages = matmul(composed, transpose(params.W))           # (n, d_p)
        part = weighted_gather_sum(alpha, messages, edges.dst, edges.src, n)
        total = part if total is None else total + part
    out = relu(total)
    if not np.all(np.isfinite(out.data)):
        raise NonFiniteError("non-finite node states after aggregation")
    return (out, alphas) if return_attention else out


def update_relations(rel: Tensor, W_rel: Tensor) -> Tensor:
    """h_r' = W_r h_r for every relation row."""
    return matmul(rel, transpose(W_rel))


def forward(h0: Tensor, q: Tensor | None, rel0: Tensor, layers: list[LayerParams],
            edge_sets: list[RelationEdges], heads: int, scope: str = "graph_part",
            slope: float = 0.2) -> tuple[Tensor, Tensor]:
    h, rel = h0, rel0
    for depth, params in enumerate(layers):
        try:
            h = aggregate_layer(h, q, rel, params, edge_sets, heads, scope, slope)
        except NonFiniteError:
            raise NonFiniteError(f"non-finite node states in layer {depth}") from None
        rel = update_relations(rel, params.W_rel)
    return h, rel
