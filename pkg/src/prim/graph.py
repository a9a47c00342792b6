"""POI relationship graph, category taxonomy, geometry and distance bins."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
NONE_RELATION = "none"
SELF_RELATION = "self"


class LoadError(ValueError):
    """Malformed dataset file; the message carries the file and line."""


# ---------------------------------------------------------------------------
# geometry


def planar_km(x1, y1, x2, y2):
    return np.hypot(np.subtract(x2, x1), np.subtract(y2, y1)) / 1000.0


def haversine_km(lon1, lat1, lon2, lat2):
    lon1, lat1, lon2, lat2 = map(np.radians, (lon1, lat1, lon2, lat2))
    a = (np.sin((lat2 - lat1) / 2.0) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def distance_km(a: tuple[float, float], b: tuple[float, float], mode: str = "planar") -> float:
    """Distance in km between two coordinate pairs.

    ``planar`` coordinates are meters; ``lonlat`` (alias ``haversine``)
    coordinates are degrees.
    """
    if mode == "planar":
        return float(planar_km(a[0], a[1], b[0], b[1]))
    if mode in ("lonlat", "haversine"):
        return float(haversine_km(a[0], a[1], b[0], b[1]))
    raise ValueError(f"unknown coordinate mode {mode!r}")


class GridIndex:
    """Uniform grid over the bounding box, cell side equal to the query radius.

    A radius query inspects the 3x3 block of cells around the query point
    and filters candidates by exact distance.
    """

    def __init__(self, xy: np.ndarray, radius_km: float, mode: str = "planar"):
        if radius_km <= 0:
            raise ValueError(f"radius must be positive, got {radius_km}")
        self.xy = np.asarray(xy, dtype=np.float64)
        self.radius_km = float(radius_km)
        self.mode = mode
        if mode == "planar":
            self.cell = np.array([radius_km * 1000.0, radius_km * 1000.0])
        else:
            # degrees; longitude cells widened for the most poleward latitude
            lat_cell = radius_km / (EARTH_RADIUS_KM * math.pi / 180.0)
            max_lat = float(np.max(np.abs(self.xy[:, 1]))) if len(self.xy) else 0.0
            cos_lat = max(math.cos(math.radians(min(max_lat + lat_cell, 89.9))), 1e-6)
            self.cell = np.array([lat_cell / cos_lat, lat_cell])
        self.origin = self.xy.min(axis=0) if len(self.xy) else np.zeros(2)
        self.cells: dict[tuple[int, int], list[int]] = {}
        for i, key in enumerate(map(tuple, self._cell_of(self.xy))):
            self.cells.setdefault(key, []).append(i)

    def _cell_of(self, xy: np.ndarray) -> np.ndarray:
        return np.floor((xy - self.origin) / self.cell).astype(np.int64)

    def _distances(self, i: int, cand: np.ndarray) -> np.ndarray:
        p, q = self.xy[i], self.xy[cand]
        if self.mode == "planar":
            return planar_km(p[0], p[1], q[:, 0], q[:, 1])
        return haversine_km(p[0], p[1], q[:, 0], q[:, 1])

    def query(self, i: int) -> np.ndarray:
        cx, cy = self._cell_of(self.xy[i:i + 1])[0]
        cand = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                cand.extend(self.cells.get((cx + dx, cy + dy), ()))
        cand = np.array(sorted(j for j in cand if j != i), dtype=np.int64)
        if len(cand) == 0:
            return cand
        return cand[self._distances(i, cand) <= self.radius_km]


# ---------------------------------------------------------------------------
# taxonomy


class Taxonomy:
    """Rooted category tree.  Node ids are dense integers 0..n-1."""

    def __init__(self, parents: Sequence[int], names: Sequence[str] | None = None):
        self.parent = np.asarray(parents, dtype=np.int64)
        n = len(self.parent)
        self.names = list(names) if names is not None else [str(i) for i in range(n)]
        roots = [i for i in range(n) if self.parent[i] < 0]
        if len(roots) != 1:
            raise LoadError(f"taxonomy must have exactly one root, found {len(roots)}")
        self.root = roots[0]
        self.children: list[list[int]] = [[] for _ in range(n)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                if p >= n:
                    raise LoadError(f"taxonomy node {i} has unknown parent {p}")
                self.children[p].append(i)
        self.depth = np.full(n, -1, dtype=np.int64)
        self.depth[self.root] = 0
        order = [self.root]
        for node in order:
            for c in self.children[node]:
                self.depth[c] = self.depth[node] + 1
                order.append(c)
        if (self.depth < 0).any():
            raise LoadError("taxonomy contains a cycle or a node unreachable from the root")
        self.is_leaf = np.array([not c for c in self.children])

    def __len__(self) -> int:
        return len(self.parent)

    @property
    def leaves(self) -> list[int]:
        return [i for i in range(len(self)) if self.is_leaf[i]]

    def _check(self, node: int) -> None:
        if not 0 <= node < len(self):
            raise KeyError(f"unknown taxonomy node {node}")

    def path(self, node: int) -> list[int]:
        """Nodes from the root down to ``node`` inclusive."""
        self._check(node)
        out = [node]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]

    def lca(self, a: int, b: int) -> int:
        self._check(a)
        self._check(b)
        while self.depth[a] > self.depth[b]:
            a = int(self.parent[a])
        while self.depth[b] > self.depth[a]:
            b = int(self.parent[b])
        while a != b:
            a, b = int(self.parent[a]), int(self.parent[b])
        return a

    def path_distance(self, a: int, b: int) -> int:
        """Edge count on the tree path between two nodes."""
        return int(self.depth[a] + self.depth[b] - 2 * self.depth[self.lca(a, b)])

    def path_distance_matrix(self) -> np.ndarray:
        n = len(self)
        out = np.zeros((n, n), dtype=np.int64)
        for a in range(n):
            for b in range(a + 1, n):
                out[a, b] = out[b, a] = self.path_distance(a, b)
        return out


# ---------------------------------------------------------------------------
# distance bins


@dataclass(frozen=True)
class DistanceBins:
    """Half-open km intervals [b_k, b_{k+1}); the last bin is open-ended."""

    boundaries: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        if not b or b[0] != 0.0:
            raise ValueError(f"bin boundaries must start at 0, got {b}")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ValueError(f"bin boundaries must be strictly increasing, got {b}")
        object.__setattr__(self, "boundaries", b)

    def __len__(self) -> int:
        return len(self.boundaries)

    def bin_of(self, d_km: float) -> int:
        if d_km < 0:
            raise ValueError(f"distance must be non-negative, got {d_km}")
        return int(np.searchsorted(self.boundaries, d_km, side="right") - 1)

    def bins_of(self, d_km: np.ndarray) -> np.ndarray:
        d_km = np.asarray(d_km, dtype=np.float64)
        if (d_km < 0).any():
            raise ValueError("distances must be non-negative")
        return np.searchsorted(self.boundaries, d_km, side="right").astype(np.int64) - 1


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class RelationType:
    id: int
    name: str
    is_structural: bool
    is_scored: bool


def relation_vocabulary(names: Iterable[str]) -> list[RelationType]:
    """Data relations first (in the given order), then ``none``, then ``self``."""
    out = []
    for name in names:
        if name in (NONE_RELATION, SELF_RELATION):
            raise LoadError(f"relation name {name!r} is reserved")
        out.append(RelationType(len(out), name, True, True))
    out.append(RelationType(len(out), NONE_RELATION, False, True))
    out.append(RelationType(len(out), SELF_RELATION, True, False))
    return out


@dataclass
class PoiGraph:
    """POIs plus symmetric per-relation adjacency.

    ``adjacency[r][i]`` is the ascending array of neighbors of POI ``i``
    under structural data relation ``r`` (the implicit self loop is not
    stored).
    """

    xy: np.ndarray
    categories: np.ndarray
    coord_mode: str
    relations: list[RelationType]
    adjacency: dict[int, list[np.ndarray]] = field(default_factory=dict)
    _index: dict[float, GridIndex] = field(default_factory=dict, repr=False)
    _spatial: dict[float, list[np.ndarray]] = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.xy)

    @property
    def data_relations(self) -> list[RelationType]:
        return [r for r in self.relations if r.is_structural and r.name != SELF_RELATION]

    @property
    def scored_relations(self) -> list[RelationType]:
        return [r for r in self.relations if r.is_scored]

    def relation(self, name: str) -> RelationType:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(f"unknown relation {name!r}")

    @classmethod
    def build(cls, xy, categories, coord_mode: str, relation_names: Sequence[str],
              edges: np.ndarray) -> "PoiGraph":
        """``edges`` is an (m, 3) int array of (src, dst, relation id); mirrored here."""
        xy = np.asarray(xy, dtype=np.float64)
        relations = relation_vocabulary(relation_names)
        g = cls(xy, np.asarray(categories, dtype=np.int64), coord_mode, relations)
        g.adjacency = g._adjacency_from(np.asarray(edges, dtype=np.int64).reshape(-1, 3))
        return g

    def _adjacency_from(self, edges: np.ndarray) -> dict[int, list[np.ndarray]]:
        adj = {}
        for r in self.data_relations:
            sel = edges[edges[:, 2] == r.id]
            src = np.concatenate([sel[:, 0], sel[:, 1]])
            dst = np.concatenate([sel[:, 1], sel[:, 0]])
            keep = src != dst
            src, dst = src[keep], dst[keep]
            lists = [[] for _ in range(self.n)]
            for a, b in zip(src.tolist(), dst.tolist()):
                lists[a].append(b)
            adj[r.id] = [np.unique(np.array(x, dtype=np.int64)) for x in lists]
        return adj

    def with_edges(self, edges: np.ndarray) -> "PoiGraph":
        """Same POIs and vocabulary, adjacency rebuilt from ``edges`` only."""
        g = PoiGraph(self.xy, self.categories, self.coord_mode, self.relations)
        g.adjacency = g._adjacency_from(np.asarray(edges, dtype=np.int64).reshape(-1, 3))
        g._index = self._index
        g._spatial = self._spatial
        return g

    def edge_list(self, relation_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Directed (dst, src) arrays sorted by dst then src, both directions present."""
        lists = self.adjacency[relation_id]
        dst = np.repeat(np.arange(self.n), [len(x) for x in lists])
        src = np.concatenate(lists) if lists else np.zeros(0, dtype=np.int64)
        return dst.astype(np.int64), src.astype(np.int64)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for lists in self.adjacency.values():
            deg += np.array([len(x) for x in lists], dtype=np.int64)
        return deg

    def is_symmetric(self) -> bool:
        for lists in self.adjacency.values():
            for i, nb in enumerate(lists):
                for j in nb.tolist():
                    if i not in set(lists[j].tolist()):
                        return False
        return True

    # geometry -----------------------------------------------------------

    def distance_km(self, i, j) -> np.ndarray | float:
        """Vectorized over index arrays; scalar for scalar inputs."""
        a, b = self.xy[i], self.xy[j]
        if self.coord_mode == "planar":
            d = planar_km(a[..., 0], a[..., 1], b[..., 0], b[..., 1])
        else:
            d = haversine_km(a[..., 0], a[..., 1], b[..., 0], b[..., 1])
        return float(d) if np.ndim(d) == 0 else d

    def spatial_neighbors(self, i: int, radius_km: float) -> np.ndarray:
        return self.spatial_neighbor_lists(radius_km)[i]

    def spatial_neighbor_lists(self, radius_km: float) -> list[np.ndarray]:
        key = float(radius_km)
        if key not in self._spatial:
            if key not in self._index:
                self._index[key] = GridIndex(self.xy, key, self.coord_mode)
            index = self._index[key]
            self._spatial[key] = [index.query(i) for i in range(self.n)]
        return self._spatial[key]


# ---------------------------------------------------------------------------
# dataset splits


@dataclass
class Dataset:
    """Positive triples (src, dst, relation id) per split, plus labelled
    non-relation pairs (src, dst) for validation and test."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    valid_none: np.ndarray
    test_none: np.ndarray
    hidden: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    # evaluation-only non-relation pairs for the training split
    train_none: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def labelled(self, split: str, none_id: int) -> np.ndarray:
        """(src, dst, relation id) rows including the non-relation pairs."""
        pos = getattr(self, split)
        neg = {"train": self.train_none, "valid": self.valid_none, "test": self.test_none}.get(split)
        if neg is None or len(neg) == 0:
            return pos
        rows = np.column_stack([neg, np.full(len(neg), none_id, dtype=np.int64)])
        return np.concatenate([pos, rows]).astype(np.int64)


def _pair_keys(pairs: np.ndarray, n: int) -> np.ndarray:
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return lo * n + hi


def sample_nonrelation_pairs(n: int, edges: np.ndarray, count: int, rng: np.random.Generator,
                             exclude: np.ndarray | None = None,
                             touching: np.ndarray | None = None) -> np.ndarray:
    """Uniform random unordered pairs that carry no relation.

    ``touching`` restricts pairs to those with at least one endpoint in it.
    """
    taken = set(_pair_keys(edges, n).tolist()) if len(edges) else set()
    if exclude is not None and len(exclude):
        taken |= set(_pair_keys(exclude, n).tolist())
    pool = np.asarray(touching, dtype=np.int64) if touching is not None else None
    out: list[tuple[int, int]] = []
    attempts = 0
    max_pairs = n * (n - 1) // 2 - len(taken)
    count = min(count, max(max_pairs, 0))
    while len(out) < count and attempts < 100 * count + 1000:
        attempts += 1
        a = int(pool[rng.integers(len(pool))]) if pool is not None else int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b:
            continue
        key = min(a, b) * n + max(a, b)
        if key in taken:
            continue
        taken.add(key)
        out.append((a, b))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def split_edges(edges: np.ndarray, fractions: tuple[float, float, float], n: int,
                seed: int, nonrel_ratio: float) -> Dataset:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(edges))
    shuffled = edges[order]
    total = float(sum(fractions))
    n_train = int(round(len(edges) * fractions[0] / total))
    n_valid = int(round(len(edges) * fractions[1] / total))
    train = shuffled[:n_train]
    valid = shuffled[n_train:n_train + n_valid]
    test = shuffled[n_train + n_valid:]
    valid_none = sample_nonrelation_pairs(n, edges, int(round(nonrel_ratio * len(valid))), rng)
    test_none = sample_nonrelation_pairs(n, edges, int(round(nonrel_ratio * len(test))), rng,
                                         exclude=valid_none)
    # drawn last so the validation and test samples do not depend on it
    train_none = sample_nonrelation_pairs(n, edges, int(round(nonrel_ratio * len(train))), rng,
                                          exclude=np.concatenate([valid_none, test_none]))
    return Dataset(train, valid, test, valid_none, test_none, train_none=train_none)


def inductive_split(dataset: Dataset, edges: np.ndarray, n: int, hide_fraction: float,
                    seed: int, nonrel_ratio: float) -> Dataset:
    """Hide ``floor(hide_fraction * n)`` POIs: their edges leave train and
    validation, and every positive edge touching them becomes a test edge."""
    rng = np.random.default_rng(seed + 7919)
    hidden = np.sort(rng.choice(n, size=int(math.floor(hide_fraction * n)), replace=False))
    mask = np.zeros(n, dtype=bool)
    mask[hidden] = True

    def visible(rows):
        return rows[~(mask[rows[:, 0]] | mask[rows[:, 1]])] if len(rows) else rows

    test = edges[mask[edges[:, 0]] | mask[edges[:, 1]]] if len(edges) else edges
    valid_none = visible(dataset.valid_none)
    test_none = sample_nonrelation_pairs(n, edges, int(round(nonrel_ratio * len(test))), rng,
                                         exclude=valid_none, touching=hidden)
    return Dataset(visible(dataset.train), visible(dataset.valid), test, valid_none,
                   test_none, hidden=hidden, train_none=visible(dataset.train_none))


# ---------------------------------------------------------------------------
# file formats


def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            yield lineno, stripped.split("\t") if "\t" in stripped else stripped.split()


def _int(tok: str, path: Path, lineno: int, what: str) -> int:
    try:
        return int(tok, 10)
    except ValueError:
        raise LoadError(f"{path}:{lineno}: {what} {tok!r} is not a base-10 integer") from None


def read_taxonomy(path: str | Path) -> Taxonomy:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"taxonomy file not found: {path}")
    rows: dict[int, tuple[int, str, int]] = {}
    for lineno, parts in _data_lines(path):
        if len(parts) < 2:
            raise LoadError(f"{path}:{lineno}: expected 'node_id parent_id name'")
        node = _int(parts[0], path, lineno, "node id")
        parent = _int(parts[1], path, lineno, "parent id")
        name = parts[2] if len(parts) > 2 else str(node)
        if node in rows:
            raise LoadError(f"{path}:{lineno}: duplicate taxonomy node {node}")
        rows[node] = (parent, name, lineno)
    ids = sorted(rows)
    if ids != list(range(len(ids))):
        raise LoadError(f"{path}: taxonomy node ids must be contiguous from 0")
    for node, (parent, _, lineno) in rows.items():
        if parent != -1 and parent not in rows:
            raise LoadError(f"{path}:{lineno}: unknown parent {parent} for node {node}")
    return Taxonomy([rows[i][0] for i in ids], [rows[i][1] for i in ids])


def read_pois(path: str | Path, taxonomy: Taxonomy) -> tuple[np.ndarray, np.ndarray, str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"POI file not found: {path}")
    mode = "planar"
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first.startswith("#") and "coords=" in first:
        mode = first.split("coords=", 1)[1].split()[0].strip()
        if mode not in ("planar", "lonlat"):
            raise LoadError(f"{path}:1: unknown coordinate mode {mode!r}")
    rows: dict[int, tuple[float, float, int]] = {}
    for lineno, parts in _data_lines(path):
        if len(parts) != 4:
            raise LoadError(f"{path}:{lineno}: expected 'poi_id x y category_id'")
        pid = _int(parts[0], path, lineno, "POI id")
        try:
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise LoadError(f"{path}:{lineno}: bad coordinate") from None
        cat = _int(parts[3], path, lineno, "category id")
        if pid in rows:
            raise LoadError(f"{path}:{lineno}: duplicate POI id {pid}")
        if not 0 <= cat < len(taxonomy):
            raise LoadError(f"{path}:{lineno}: unknown category id {cat}")
        if not taxonomy.is_leaf[cat]:
            raise LoadError(f"{path}:{lineno}: category {cat} is not a taxonomy leaf")
        rows[pid] = (x, y, cat)
    ids = sorted(rows)
    if ids != list(range(len(ids))):
        raise LoadError(f"{path}: POI ids must be contiguous from 0")
    xy = np.array([[rows[i][0], rows[i][1]] for i in ids], dtype=np.float64).reshape(-1, 2)
    cats = np.array([rows[i][2] for i in ids], dtype=np.int64)
    return xy, cats, mode


def read_edges(path: str | Path, n: int) -> tuple[list[str], np.ndarray]:
    """Relation names in first-appearance order and (m, 3) (src, dst, rel id)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"edge file not found: {path}")
    names: list[str] = []
    out = []
    seen = set()
    for lineno, parts in _data_lines(path):
        if len(parts) != 3:
            raise LoadError(f"{path}:{lineno}: expected 'src_id dst_id relation_name'")
        a = _int(parts[0], path, lineno, "POI id")
        b = _int(parts[1], path, lineno, "POI id")
        for end in (a, b):
            if not 0 <= end < n:
                raise LoadError(f"{path}:{lineno}: edge endpoint {end} is not a known POI")
        if a == b:
            raise LoadError(f"{path}:{lineno}: self edge on POI {a}")
        name = parts[2].strip()
        if name in (NONE_RELATION, SELF_RELATION):
            raise LoadError(f"{path}:{lineno}: relation name {name!r} is reserved")
        if name not in names:
            names.append(name)
        key = (min(a, b), max(a, b))
        if key in seen:
            raise LoadError(f"{path}:{lineno}: pair {key} already carries a relation")
        seen.add(key)
        out.append((a, b, names.index(name)))
    return names, np.array(out, dtype=np.int64).reshape(-1, 3)


def write_dataset(directory: str | Path, xy: np.ndarray, categories: np.ndarray, coord_mode: str,
                  taxonomy: Taxonomy, relation_names: Sequence[str], edges: np.ndarray) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "taxonomy.tsv", "w", encoding="utf-8") as fh:
        fh.write("# node_id\tparent_id\tname\n")
        for i in range(len(taxonomy)):
            fh.write(f"{i}\t{int(taxonomy.parent[i])}\t{taxonomy.names[i]}\n")
    with open(directory / "pois.tsv", "w", encoding="utf-8") as fh:
        fh.write(f"#coords={coord_mode}\n")
        for i, ((x, y), c) in enumerate(zip(xy, categories)):
            fh.write(f"{i}\t{float(x)!r}\t{float(y)!r}\t{int(c)}\n")
    with open(directory / "edges.tsv", "w", encoding="utf-8") as fh:
        fh.write("# src_id\tdst_id\trelation_name\n")
        for a, b, r in edges:
            fh.write(f"{int(a)}\t{int(b)}\t{relation_names[int(r)]}\n")


@dataclass
class LoadedData:
    graph: PoiGraph
    taxonomy: Taxonomy
    dataset: Dataset
    edges: np.ndarray
    relation_names: list[str]


def load_dataset(poi_file, taxonomy_file, edge_files: str | Path | Sequence[str | Path],
                 fractions=(0.6, 0.2, 0.2), seed: int = 7, nonrel_ratio: float = 0.65,
                 hide_fraction: float = 0.0) -> LoadedData:
    """Read the TSV trio, build the full symmetric graph and split the edges."""
    if isinstance(edge_files, (str, Path)):
        edge_files = [edge_files]
    for kind, f in [("POI", poi_file), ("taxonomy", taxonomy_file)] + [("edge", e) for e in edge_files]:
        if not Path(f).exists():
            raise FileNotFoundError(f"{kind} file not found: {f}")
    taxonomy = read_taxonomy(taxonomy_file)
    xy, cats, mode = read_pois(poi_file, taxonomy)
    names: list[str] = []
    chunks = []
    for f in edge_files:
        fnames, e = read_edges(f, len(xy))
        remap = []
        for nm in fnames:
            if nm not in names:
                names.append(nm)
            remap.append(names.index(nm))
        if len(e):
            e[:, 2] = np.asarray(remap, dtype=np.int64)[e[:, 2]]
        chunks.append(e)
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 3), dtype=np.int64)
    if len(edges) and len(np.unique(_pair_keys(edges, len(xy)))) != len(edges):
        raise LoadError("a POI pair carries more than one relation across edge files")
    graph = PoiGraph.build(xy, cats, mode, names, edges)
    dataset = split_edges(edges, tuple(fractions), len(xy), seed, nonrel_ratio)
    if hide_fraction > 0:
        dataset = inductive_split(dataset, edges, len(xy), hide_fraction, seed, nonrel_ratio)
    return LoadedData(graph, taxonomy, dataset, edges, names)


def load_dir(directory: str | Path, **kwargs) -> LoadedData:
    directory = Path(directory)
    return load_dataset(directory / "pois.tsv", directory / "taxonomy.tsv",
                        directory / "edges.tsv", **kwargs)
