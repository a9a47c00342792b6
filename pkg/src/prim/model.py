"""The full relationship-inference model: parameters plus the forward pipeline
from taxonomy and graph to per-pair relation scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scoring, spatial, taxonomy_encoder, wrgnn
from .config import RunConfig
from .graph import DistanceBins, PoiGraph, Taxonomy
from .tensor import Tensor, add, glorot_uniform, matmul, take, transpose


class TransductiveError(LookupError):
    pass


@dataclass
class Encoded:
    """Final POI representations and layer-L relation vectors."""

    h: Tensor
    relations: Tensor


class PrimModel:
    """Owns the learnable parameters and the precomputed graph structure.

    ``graph`` is the message-passing graph (training edges only); the
    spatial neighborhoods come from POI locations and cover every POI.
    """

    def __init__(self, config: RunConfig, graph: PoiGraph, taxonomy: Taxonomy,
                 unseen: np.ndarray | None = None, params: dict[str, Tensor] | None = None):
        self.config = config
        self.graph = graph
        self.taxonomy = taxonomy
        self.bins = DistanceBins(tuple(config.bins))
        self.unseen = np.zeros(graph.n, dtype=bool)
        if unseen is not None and len(unseen):
            self.unseen[np.asarray(unseen)] = True
        self.relation_names = [r.name for r in graph.relations]
        self.scored_ids = np.array([r.id for r in graph.scored_relations], dtype=np.int64)
        self.none_id = graph.relation("none").id
        self._paths = taxonomy_encoder.path_matrix(taxonomy, graph.categories,
                                                   leaf_only=config.ablated("T"))
        self._edges = wrgnn.build_edges(graph, config.rbf_centers, config.rbf_width)
        self._spatial = None
        self.params = params if params is not None else self.init_params(np.random.default_rng(config.seed))

    # parameters ---------------------------------------------------------

    def init_params(self, rng: np.random.Generator) -> dict[str, Tensor]:
        c = self.config
        d_in = c.dim + c.category_dim
        n_rel = len(self.graph.relations)
        width = 2 * c.attention_dim + c.distance_feature_dim
        arrays: dict[str, np.ndarray] = {}
        arrays["taxonomy.emb"] = taxonomy_encoder.init_table(rng, len(self.taxonomy), c.category_dim)
        if c.node_init in ("taxonomy", "taxonomy+free"):
            arrays["node_init.W"] = glorot_uniform(rng, c.dim, c.category_dim)
        if c.node_init in ("free", "taxonomy+free"):
            arrays["node_init.emb"] = _uniform(rng, (self.graph.n, c.dim), c.dim)
        arrays["relation.emb"] = _uniform(rng, (n_rel, c.dim), c.dim)
        for l in range(c.layers):
            arrays[f"layer{l}.W"] = glorot_uniform(rng, c.dim, d_in)
            arrays[f"layer{l}.W_rel"] = glorot_uniform(rng, c.dim, c.dim)
            arrays[f"layer{l}.W_att"] = glorot_uniform(rng, c.attention_dim, d_in)
            arrays[f"layer{l}.W_dist"] = glorot_uniform(rng, c.distance_feature_dim, len(c.rbf_centers))
            arrays[f"layer{l}.att"] = _uniform(rng, (n_rel, c.heads, width), width)
        for name in ("W_Q", "W_K", "W_V"):
            arrays[f"spatial.{name}"] = glorot_uniform(rng, c.dim, c.dim)
        arrays["scoring.hyperplanes"] = _uniform(rng, (len(self.bins), c.dim), c.dim)
        return {k: Tensor(v, requires_grad=True, name=k) for k, v in arrays.items()}

    def layer_params(self, l: int) -> wrgnn.LayerParams:
        p = self.params
        return wrgnn.LayerParams(p[f"layer{l}.W"], p[f"layer{l}.W_rel"], p[f"layer{l}.W_att"],
                                 p[f"layer{l}.W_dist"], p[f"layer{l}.att"])

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def restore(self, arrays: dict[str, np.ndarray]) -> None:
        for k, v in arrays.items():
            self.params[k].data = v.copy()

    # forward ------------------------------------------------------------

    @property
    def spatial_pairs(self) -> spatial.SpatialPairs:
        if self._spatial is None:
            self._spatial = spatial.SpatialPairs.from_graph(self.graph, self.config.radius_km,
                                                            self.config.theta)
        return self._spatial

    def category_reprs(self) -> Tensor:
        return taxonomy_encoder.category_reprs(self.params["taxonomy.emb"], self._paths)

    def initial_states(self, q: Tensor) -> Tensor:
        p = self.params
        h = None
        if "node_init.W" in p:
            h = matmul(q, transpose(p["node_init.W"]))
        if "node_init.emb" in p:
            h = p["node_init.emb"] if h is None else add(h, p["node_init.emb"])
        return h

    def encode(self, hide: np.ndarray | None = None, isolate: np.ndarray | None = None) -> Encoded:
        """Final POI and relation representations.

        Edges between the pairs in ``hide`` are left out of message passing
        (the training loop hides the batch it is scoring so a pair cannot read
        its own label).  POIs in ``isolate`` keep only their self loop, as an
        unseen POI would.
        """
        c = self.config
        edges = self._edges
        if hide is not None and len(hide):
            edges = [e.without(hide, self.graph.n) for e in edges]
        if isolate is not None and len(isolate):
            edges = [e.isolating(isolate, self.graph.n) for e in edges]
        q = self.category_reprs()
        h0 = self.initial_states(q)
        layers = [self.layer_params(l) for l in range(c.layers)]
        h, rel = wrgnn.forward(h0, q, self.params["relation.emb"], layers, edges,
                               c.heads, c.gamma_scope, c.leaky_slope)
        if not c.ablated("S"):
            p = self.params
            hs = spatial.spatial_context(h, p["spatial.W_Q"], p["spatial.W_K"], p["spatial.W_V"],
                                         self.spatial_pairs)
            h = spatial.fuse(h, hs)
        return Encoded(h, rel)

    def pair_bins(self, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        d = self.graph.distance_km(np.asarray(src), np.asarray(dst))
        return self.bins.bins_of(np.atleast_1d(d))

    def _projected(self, enc: Encoded, src, dst):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        hyper = None if self.config.ablated("D") else self.params["scoring.hyperplanes"]
        return scoring.project_pairs(enc.h, src, dst, self.pair_bins(src, dst), hyper)

    def score_triples(self, enc: Encoded, src, dst, rel) -> Tensor:
        hi, hj = self._projected(enc, src, dst)
        return scoring.score(hi, hj, take(enc.relations, np.asarray(rel, dtype=np.int64)))

    def score_pairs(self, enc: Encoded, src, dst) -> Tensor:
        """(P, |R*|) scores in scored-relation order."""
        hi, hj = self._projected(enc, src, dst)
        return scoring.score_all(hi, hj, take(enc.relations, self.scored_ids))

    def check_seen(self, src, dst) -> None:
        if "node_init.emb" not in self.params:
            return
        ids = np.concatenate([np.atleast_1d(src), np.atleast_1d(dst)]).astype(np.int64)
        bad = ids[(ids < 0) | (ids >= self.graph.n)]
        if len(bad) == 0:
            bad = ids[self.unseen[ids]]
        if len(bad):
            raise TransductiveError(
                f"POI {int(bad[0])} was not seen in training; node_init={self.config.node_init} "
                "uses per-POI embeddings and cannot represent unseen POIs (use node_init=taxonomy)")


def _uniform(rng: np.random.Generator, shape, fan: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan)
    return rng.uniform(-bound, bound, size=shape)
