"""Geographically weighted self-attention over spatial neighbors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import PoiGraph
from .tensor import (DimensionError, Tensor, add, matmul, mul, pair_dot, segment_softmax,
                     transpose, weighted_gather_sum)


def geo_kernel(d_km, theta: float = 2.0):
    """RBF weight exp(-theta * d^2), d in km."""
    return np.exp(-theta * np.asarray(d_km, dtype=np.float64) ** 2)


@dataclass
class SpatialPairs:
    """Directed (query, neighbor) pairs sorted by query then neighbor id."""

    query: np.ndarray
    neighbor: np.ndarray
    kernel: np.ndarray

    def __post_init__(self):
        self.query = np.asarray(self.query, dtype=np.int64)
        self.neighbor = np.asarray(self.neighbor, dtype=np.int64)
        order = np.lexsort((self.neighbor, self.query))
        if np.any(order != np.arange(len(order))):
            self.query, self.neighbor = self.query[order], self.neighbor[order]
            self.kernel = np.asarray(self.kernel)[order]

    @classmethod
    def from_graph(cls, graph: PoiGraph, radius_km: float, theta: float) -> "SpatialPairs":
        lists = graph.spatial_neighbor_lists(radius_km)
        query = np.repeat(np.arange(graph.n, dtype=np.int64), [len(x) for x in lists])
        neighbor = (np.concatenate(lists) if lists else np.zeros(0)).astype(np.int64)
        d = graph.distance_km(query, neighbor) if len(query) else np.zeros(0)
        return cls(query, neighbor, geo_kernel(d, theta))


def spatial_context(h: Tensor, W_Q: Tensor, W_K: Tensor, W_V: Tensor, pairs: SpatialPairs,
                    return_attention: bool = False):
    """h_i^s = sum_j beta_ij W_V h_j with beta = softmax_j(e'_ij * D_ij).

    POIs with no spatial neighbor get the zero vector.
    """
    n, d_p = h.shape
    if len(pairs.query) == 0:
        out = mul(h, 0.0)
        return (out, Tensor(np.zeros(0))) if return_attention else out
    queries = matmul(h, transpose(W_Q))
    keys = matmul(h, transpose(W_K))
    values = matmul(h, transpose(W_V))
    raw = mul(pair_dot(queries, keys, pairs.query, pairs.neighbor), 1.0 / math.sqrt(d_p))
    beta = segment_softmax(mul(raw, Tensor(pairs.kernel)), pairs.query, n)
    out = weighted_gather_sum(beta, values, pairs.query, pairs.neighbor, n)
    return (out, beta) if return_attention else out


def fuse(h_graph: Tensor, h_spatial: Tensor, enabled: bool = True) -> Tensor:
    """Sum of the graph and spatial views; ``enabled=False`` drops the latter."""
    if h_graph.shape != h_spatial.shape:
        raise DimensionError(f"fuse: shapes {h_graph.shape} and {h_spatial.shape} differ")
    return add(h_graph, h_spatial) if enabled else h_graph
