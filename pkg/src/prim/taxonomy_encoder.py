"""Category representations as sums of taxonomy-node embeddings along the
root-to-leaf path, spliced onto node states by concatenation."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import Taxonomy
from .tensor import DimensionError, Tensor, concat, spmm, take, tsum


def path_matrix(taxonomy: Taxonomy, categories: np.ndarray, leaf_only: bool = False) -> sp.csr_matrix:
    """Indicator matrix (n_pois x n_nodes) of each POI's category path.

    With ``leaf_only`` each row selects just the leaf, which is the -T
    ablation: one free embedding per category.
    """
    rows, cols = [], []
    paths = {}
    for i, c in enumerate(np.asarray(categories).tolist()):
        if c not in paths:
            paths[c] = [c] if leaf_only else taxonomy.path(c)
        rows.extend([i] * len(paths[c]))
        cols.extend(paths[c])
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(categories), len(taxonomy)))


def category_repr(table: Tensor, taxonomy: Taxonomy, category: int) -> Tensor:
    """q = sum of the embedding rows on the root path of ``category``."""
    return tsum(take(table, np.array(taxonomy.path(category))), axis=0)


def category_reprs(table: Tensor, paths: sp.csr_matrix) -> Tensor:
    return spmm(paths, table)


def augment(h: Tensor, q: Tensor, enabled: bool = True) -> Tensor:
    """[h || q] along the last axis; ``enabled=False`` passes ``h`` through."""
    if not enabled:
        return h
    if h.ndim != q.ndim or h.shape[:-1] != q.shape[:-1]:
        raise DimensionError(f"augment: incompatible shapes {h.shape} and {q.shape}")
    return concat([h, q], axis=h.ndim - 1)


def init_table(rng: np.random.Generator, n_nodes: int, dim: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(dim)
    return rng.uniform(-bound, bound, size=(n_nodes, dim))
