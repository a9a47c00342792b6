"""Synthetic cities with planted competitive / complementary relationships.

POIs are uniform in a square.  The city is split into zones (nearest zone
center); each zone is either a shopping district or a residential area and
prefers a few top-level categories, so nearby POIs tend to share a subtree
and a POI's spatial neighborhood reveals its zone type.  Candidate pairs
within ``cutoff_km`` get a relation with probability

    competitive:   sigmoid(a_c - b1_c * d - b2_c * taxdist + zone_c)
    complementary: sigmoid(a_m - b1_m * d - b2_m * taxdist + zone_m + partner)

where ``zone_*`` shifts apply when both POIs sit in a shopping zone and
``partner`` rewards subcategory pairs drawn as complementary partners.  The
relations are drawn exclusively (at most one relation per pair).  A global logit offset
is solved by bisection so the expected edge count hits ``target_edges``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import LoadedData, Taxonomy, load_dir, write_dataset

log = logging.getLogger(__name__)

RELATIONS = ("competitive", "complementary")


@dataclass(frozen=True)
class SynthConfig:
    n_pois: int = 2000
    side_km: float = 10.0
    branching: tuple[int, ...] = (6, 4, 4)
    n_zones: int = 16
    zone_affinity: float = 0.75
    # (a, b1 per km, b2 per taxonomy edge)
    competitive: tuple[float, float, float] = (-0.012, 0.61, 0.946)
    complementary: tuple[float, float, float] = (-2.636, 0.113, 1.182)
    # logit shifts applied when both endpoints sit in a shopping zone
    zone_competitive: float = -2.0
    zone_complementary: float = 1.5
    # complementary bonus for subcategory pairs drawn as partners
    partner_bonus: float = 6.0
    partner_density: float = 0.1
    target_edges: int = 16000
    cutoff_km: float = 10.0
    seed: int = 7

    def __post_init__(self):
        if self.n_pois < 10:
            raise ValueError("n_pois must be at least 10")
        if self.side_km <= 0:
            raise ValueError("side_km must be positive")
        if not self.branching or min(self.branching) < 1:
            raise ValueError("branching factors must be positive")


def balanced_taxonomy(branching: tuple[int, ...]) -> Taxonomy:
    parents = [-1]
    names = ["root"]
    frontier = [0]
    for depth, b in enumerate(branching, start=1):
        nxt = []
        for p in frontier:
            for k in range(b):
                parents.append(p)
                names.append(f"{names[p]}.{k}" if p else f"c{k}")
                nxt.append(len(parents) - 1)
        frontier = nxt
    return Taxonomy(parents, names)


@dataclass
class SynthCity:
    config: SynthConfig
    taxonomy: Taxonomy
    xy: np.ndarray          # meters
    categories: np.ndarray
    zone: np.ndarray
    shopping: np.ndarray    # per-POI flag: zone is a shopping district
    edges: np.ndarray       # (m, 3) src, dst, relation id
    offset: float
    notes: list[str] = field(default_factory=list)

    def write(self, directory: str | Path) -> None:
        write_dataset(directory, self.xy, self.categories, "planar", self.taxonomy,
                      list(RELATIONS), self.edges)


def partner_matrix(taxonomy: Taxonomy, density: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric 0/1 matrix over taxonomy nodes marking complementary partner
    subcategories (parents of leaves) under different top-level nodes."""
    n = len(taxonomy)
    mids = sorted({int(taxonomy.parent[leaf]) for leaf in taxonomy.leaves})
    top = {m: taxonomy.path(m)[min(1, len(taxonomy.path(m)) - 1)] for m in mids}
    out = np.zeros((n, n))
    for a_idx, a in enumerate(mids):
        for b in mids[a_idx + 1:]:
            if top[a] != top[b] and rng.random() < density:
                out[a, b] = out[b, a] = 1.0
    return out


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _candidate_pairs(xy_km: np.ndarray, cutoff: float):
    n = len(xy_km)
    src, dst, dist = [], [], []
    for i in range(n - 1):
        d = np.hypot(*(xy_km[i + 1:] - xy_km[i]).T)
        keep = np.nonzero(d <= cutoff)[0]
        src.append(np.full(len(keep), i, dtype=np.int64))
        dst.append(keep + i + 1)
        dist.append(d[keep])
    return np.concatenate(src), np.concatenate(dst), np.concatenate(dist)


@dataclass
class _Layout:
    taxonomy: Taxonomy
    xy_km: np.ndarray
    categories: np.ndarray
    zone: np.ndarray
    shopping: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    dist: np.ndarray
    taxdist: np.ndarray
    both_shop: np.ndarray
    partner: np.ndarray
    rng: np.random.Generator


def _layout(config: SynthConfig) -> _Layout:
    rng = np.random.default_rng(config.seed)
    taxonomy = balanced_taxonomy(config.branching)
    tops = taxonomy.children[taxonomy.root]
    n = config.n_pois
    xy_km = rng.uniform(0.0, config.side_km, size=(n, 2))

    centers = rng.uniform(0.0, config.side_km, size=(config.n_zones, 2))
    zone_shopping = np.arange(config.n_zones) % 2 == 0
    half = max(len(tops) // 2, 1)
    # shopping districts prefer the first half of the top-level categories
    zone_top = np.where(zone_shopping,
                        rng.integers(0, half, size=config.n_zones),
                        rng.integers(half, len(tops), size=config.n_zones) if len(tops) > half
                        else 0)
    zone = np.argmin(((xy_km[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)

    categories = np.empty(n, dtype=np.int64)
    for i in range(n):
        if rng.random() < config.zone_affinity:
            node = tops[int(zone_top[zone[i]])]
        else:
            node = tops[int(rng.integers(len(tops)))]
        while taxonomy.children[node]:
            kids = taxonomy.children[node]
            node = kids[int(rng.integers(len(kids)))]
        categories[i] = node

    src, dst, dist = _candidate_pairs(xy_km, config.cutoff_km)
    taxdist = taxonomy.path_distance_matrix()[categories[src], categories[dst]].astype(np.float64)
    shopping = zone_shopping[zone]
    both_shop = (shopping[src] & shopping[dst]).astype(np.float64)
    partners = partner_matrix(taxonomy, config.partner_density, rng)
    parent = taxonomy.parent
    partner = partners[parent[categories[src]], parent[categories[dst]]]
    return _Layout(taxonomy, xy_km, categories, zone, shopping, src, dst, dist, taxdist,
                   both_shop, partner, rng)


def _logits(config: SynthConfig, lay: _Layout, competitive=None, complementary=None):
    a_c, b1_c, b2_c = competitive if competitive is not None else config.competitive
    a_m, b1_m, b2_m = complementary if complementary is not None else config.complementary
    logit_c = a_c - b1_c * lay.dist - b2_c * lay.taxdist + config.zone_competitive * lay.both_shop
    logit_m = (a_m - b1_m * lay.dist - b2_m * lay.taxdist
               + config.zone_complementary * lay.both_shop + config.partner_bonus * lay.partner)
    return logit_c, logit_m


def _planting_probs(logit_c, logit_m, target: float):
    """Exclusive per-pair probabilities after solving the shared offset."""
    def probs(offset):
        pc, pm = _sigmoid(logit_c + offset), _sigmoid(logit_m + offset)
        total = pc + pm
        scale = np.where(total > 1.0, 1.0 / np.maximum(total, 1e-300), 1.0)
        return pc * scale, pm * scale

    lo, hi = -40.0, 40.0
    if sum(p.sum() for p in probs(hi)) < target:
        return probs(hi), hi, False
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if sum(p.sum() for p in probs(mid)) < target:
            lo = mid
        else:
            hi = mid
    offset = 0.5 * (lo + hi)
    return probs(offset), offset, True


def generate(config: SynthConfig = SynthConfig()) -> SynthCity:
    lay = _layout(config)
    (pc, pm), offset, reachable = _planting_probs(*_logits(config, lay), config.target_edges)
    notes = []
    if not reachable:
        notes.append(f"edge target {config.target_edges} unreachable")
    u = lay.rng.random(len(lay.src))
    rel = np.full(len(lay.src), -1, dtype=np.int64)
    rel[u < pc + pm] = 1
    rel[u < pc] = 0
    keep = rel >= 0
    edges = np.column_stack([lay.src[keep], lay.dst[keep], rel[keep]])
    if len(edges) < config.target_edges * 0.97:
        notes.append(f"achieved {len(edges)} edges for target {config.target_edges}")
    for msg in notes:
        log.warning(msg)
    return SynthCity(config, lay.taxonomy, lay.xy_km * 1000.0, lay.categories, lay.zone,
                     lay.shopping, edges, offset, notes)


def expected_stats(config: SynthConfig, lay: _Layout | None = None, competitive=None,
                   complementary=None, sample: np.ndarray | None = None) -> dict[str, float]:
    """Calibration statistics in expectation over the planting probabilities.

    ``sample`` optionally restricts to a subset of candidate pairs (the edge
    target is scaled accordingly); used when fitting coefficients.
    """
    lay = lay or _layout(config)
    lc, lm = _logits(config, lay, competitive, complementary)
    target = config.target_edges
    dist, taxdist = lay.dist, lay.taxdist
    if sample is not None:
        lc, lm, dist, taxdist = lc[sample], lm[sample], dist[sample], taxdist[sample]
        target = target * sample.mean() if sample.dtype == bool else target * len(sample) / len(lay.dist)
    (pc, pm), _, _ = _planting_probs(lc, lm, target)
    near = dist <= 2.0
    return {
        "competitive_path_distance": float((pc * taxdist).sum() / pc.sum()),
        "complementary_path_distance": float((pm * taxdist).sum() / pm.sum()),
        "competitive_within_2km": float(pc[near].sum() / pc.sum()),
        "complementary_within_2km": float(pm[near].sum() / pm.sum()),
        "competitive_share": float(pc.sum() / (pc.sum() + pm.sum())),
    }


# ---------------------------------------------------------------------------
# calibration statistics

# Reference statistics observed on a real city (Beijing): mean taxonomy path
# distance and share of pairs within 2 km, per relation; with tolerance bands.
TARGETS = {
    "competitive_path_distance": (1.72, 0.4),
    "complementary_path_distance": (3.53, 0.6),
    "competitive_within_2km": (0.501, 0.08),
    "complementary_within_2km": (0.212, 0.08),
}


@dataclass
class StatsReport:
    values: dict[str, float]
    counts: dict[str, int]

    def passed(self, key: str) -> bool:
        target, tol = TARGETS[key]
        v = self.values.get(key, float("nan"))
        return bool(abs(v - target) <= tol)

    @property
    def all_passed(self) -> bool:
        return all(self.passed(k) for k in TARGETS)

    def lines(self) -> list[str]:
        out = []
        for key, (target, tol) in TARGETS.items():
            v = self.values.get(key, float("nan"))
            out.append(f"{key}\t{v:.4f}\t{target}+-{tol}\t{'pass' if self.passed(key) else 'FAIL'}")
        return out


def relation_stats(taxonomy: Taxonomy, categories: np.ndarray, edges: np.ndarray,
                   distances_km: np.ndarray, relation_names) -> StatsReport:
    values, counts = {}, {}
    for rid, name in enumerate(relation_names):
        sel = edges[:, 2] == rid
        counts[name] = int(sel.sum())
        if not sel.any():
            continue
        pd = [taxonomy.path_distance(int(categories[a]), int(categories[b]))
              for a, b in edges[sel, :2].tolist()]
        values[f"{name}_path_distance"] = float(np.mean(pd))
        values[f"{name}_within_2km"] = float(np.mean(distances_km[sel] <= 2.0))
    return StatsReport(values, counts)


def verify_stats(data: LoadedData | str | Path) -> StatsReport:
    """Per-relation mean path distance and within-2 km share, with pass bands."""
    if not isinstance(data, LoadedData):
        data = load_dir(data)
    e = data.edges
    d = np.atleast_1d(data.graph.distance_km(e[:, 0], e[:, 1])) if len(e) else np.zeros(0)
    return relation_stats(data.taxonomy, data.graph.categories, e, d, data.relation_names)


def city_stats(city: SynthCity) -> StatsReport:
    e = city.edges
    d = np.hypot(*(city.xy[e[:, 0]] - city.xy[e[:, 1]]).T) / 1000.0
    return relation_stats(city.taxonomy, city.categories, e, d, RELATIONS)


def config_dict(config: SynthConfig) -> dict:
    return asdict(config)


def parse_synth_overrides(items: list[str]) -> SynthConfig:
    """``key=value`` overrides for :class:`SynthConfig` (tuples comma separated)."""
    base = asdict(SynthConfig())
    for item in items:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in base:
            raise ValueError(f"unknown synth key {key!r}")
        default = base[key]
        if isinstance(default, tuple):
            conv = int if isinstance(default[0], int) else float
            base[key] = tuple(conv(v) for v in value.split(","))
        elif isinstance(default, int):
            base[key] = int(value)
        else:
            base[key] = float(value)
    return SynthConfig(**base)
