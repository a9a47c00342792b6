"""Versioned checkpoint container.

Layout: a magic line, one line of JSON header (config text, parameter names
and shapes, vocabularies), then every parameter as little-endian float64 in
header order.  Serializing the same model twice gives identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .graph import PoiGraph, Taxonomy
from .model import PrimModel
from .tensor import Tensor

MAGIC = b"PRIM-CHECKPOINT\n"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: RunConfig
    arrays: dict[str, np.ndarray]
    relations: list[str]
    taxonomy: list[str]
    bins: list[float]
    n_pois: int
    unseen: list[int]

    def header(self) -> dict:
        return {
            "version": VERSION,
            "config": self.config.to_text(),
            "params": [[k, list(v.shape)] for k, v in self.arrays.items()],
            "relations": self.relations,
            "taxonomy": self.taxonomy,
            "bins": self.bins,
            "n_pois": self.n_pois,
            "unseen": self.unseen,
        }

    def to_bytes(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True, separators=(",", ":")).encode("utf-8")
        body = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in self.arrays.values())
        return MAGIC + head + b"\n" + body

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Checkpoint":
        if not raw.startswith(MAGIC):
            raise CheckpointError("not a checkpoint file (bad magic line)")
        end = raw.index(b"\n", len(MAGIC))
        head = json.loads(raw[len(MAGIC):end].decode("utf-8"))
        if head.get("version") != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {head.get('version')}")
        offset = end + 1
        arrays = {}
        for name, shape in head["params"]:
            count = int(np.prod(shape)) if shape else 1
            nbytes = 8 * count
            if offset + nbytes > len(raw):
                raise CheckpointError(f"checkpoint truncated inside parameter {name!r}")
            arrays[name] = np.frombuffer(raw[offset:offset + nbytes], dtype="<f8").astype(np.float64).reshape(shape)
            offset += nbytes
        if offset != len(raw):
            raise CheckpointError("trailing bytes after the last parameter")
        return cls(RunConfig.from_text(head["config"]), arrays, head["relations"], head["taxonomy"],
                   head["bins"], head["n_pois"], head["unseen"])

    @classmethod
    def from_model(cls, model: PrimModel) -> "Checkpoint":
        return cls(model.config, {k: v.data for k, v in model.params.items()},
                   list(model.relation_names), list(model.taxonomy.names),
                   list(model.bins.boundaries), model.graph.n,
                   [int(i) for i in np.nonzero(model.unseen)[0]])

    def check_vocabulary(self, graph: PoiGraph, taxonomy: Taxonomy) -> None:
        names = [r.name for r in graph.relations]
        if names != self.relations:
            raise CheckpointError(f"relation vocabulary mismatch: checkpoint {self.relations}, data {names}")
        if list(taxonomy.names) != self.taxonomy:
            raise CheckpointError("taxonomy vocabulary mismatch between checkpoint and data")
        if graph.n != self.n_pois:
            raise CheckpointError(f"checkpoint has {self.n_pois} POIs, data has {graph.n}")
        if [float(b) for b in self.config.bins] != self.bins:
            raise CheckpointError("distance-bin vocabulary mismatch")

    def build_model(self, graph: PoiGraph, taxonomy: Taxonomy, config: RunConfig | None = None) -> PrimModel:
        self.check_vocabulary(graph, taxonomy)
        params = {k: Tensor(v.copy(), requires_grad=True, name=k) for k, v in self.arrays.items()}
        return PrimModel(config or self.config, graph, taxonomy, np.array(self.unseen, dtype=np.int64), params)


def save(model: PrimModel, path: str | Path) -> None:
    Path(path).write_bytes(Checkpoint.from_model(model).to_bytes())


def load(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return Checkpoint.from_bytes(path.read_bytes())
