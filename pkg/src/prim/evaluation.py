"""Inference, F1 metrics, evaluation protocols and rule baselines."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import Dataset, PoiGraph, Taxonomy
from .model import Encoded, PrimModel


class EmptySplitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# metrics


def confusion_matrix(truth, pred, n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predictions."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(truth, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    return cm


def _check(cm: np.ndarray) -> np.ndarray:
    cm = np.asarray(cm)
    if cm.size == 0 or cm.sum() == 0:
        raise ValueError("confusion matrix is empty")
    return cm


def per_class_f1(cm) -> np.ndarray:
    """F1 per class; a class absent from both truth and predictions scores 0."""
    cm = _check(cm).astype(np.float64)
    tp = np.diag(cm)
    denom = cm.sum(axis=0) + cm.sum(axis=1)
    return np.divide(2.0 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(cm) -> float:
    return float(per_class_f1(cm).mean())


def micro_f1(cm) -> float:
    # pooled precision == pooled recall == accuracy for single-label data
    cm = _check(cm)
    return float(np.trace(cm) / cm.sum())


# ---------------------------------------------------------------------------
# inference


def predict(model: PrimModel, src, dst, enc: Encoded | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Highest-scoring relation id per pair (ties go to the lowest id) and its score."""
    src = np.atleast_1d(np.asarray(src, dtype=np.int64))
    dst = np.atleast_1d(np.asarray(dst, dtype=np.int64))
    model.check_seen(src, dst)
    enc = enc if enc is not None else model.encode()
    scores = model.score_pairs(enc, src, dst).data
    best = np.argmax(scores, axis=1)
    return model.scored_ids[best], scores[np.arange(len(best)), best]


def macro_micro(model: PrimModel, rows: np.ndarray) -> tuple[float, float]:
    pred, _ = predict(model, rows[:, 0], rows[:, 1])
    cm = confusion_matrix(rows[:, 2], pred, len(model.scored_ids))
    return macro_f1(cm), micro_f1(cm)


@dataclass
class Report:
    mode: str
    classes: list[str]
    confusion: np.ndarray
    per_class: np.ndarray
    macro: float
    micro: float

    @classmethod
    def from_predictions(cls, mode: str, classes: list[str], truth, pred) -> "Report":
        cm = confusion_matrix(truth, pred, len(classes))
        rep = cls(mode, classes, cm, per_class_f1(cm), macro_f1(cm), micro_f1(cm))
        # single-label multiclass: pooled F1 must equal accuracy
        assert abs(rep.micro - np.trace(cm) / cm.sum()) < 1e-12
        return rep

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def tsv(self) -> str:
        lines = ["metric\tvalue", f"mode\t{self.mode}", f"pairs\t{self.total}",
                 f"macro_f1\t{self.macro:.6f}", f"micro_f1\t{self.micro:.6f}"]
        lines += [f"f1_{c}\t{f:.6f}" for c, f in zip(self.classes, self.per_class)]
        for c, row in zip(self.classes, self.confusion):
            lines.append(f"cm_{c}\t" + "\t".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        width = max(len(c) for c in self.classes)
        out = [f"mode: {self.mode}   pairs: {self.total}",
               f"Macro-F1 {self.macro:.4f}   Micro-F1 {self.micro:.4f}", ""]
        out.append(" " * (width + 2) + "  ".join(f"{c[:8]:>8}" for c in self.classes) + "    F1")
        for c, row, f in zip(self.classes, self.confusion, self.per_class):
            out.append(f"{c:>{width}}  " + "  ".join(f"{int(v):>8}" for v in row) + f"  {f:.4f}")
        return "\n".join(out) + "\n"


def filter_rows(rows: np.ndarray, mode: str, graph: PoiGraph, dataset: Dataset) -> np.ndarray:
    """Pairs evaluated under ``mode``.

    ``sparse`` keeps pairs with an endpoint that has fewer than 3 training
    relationships; ``inductive`` keeps pairs touching a hidden POI.
    """
    if mode == "full":
        out = rows
    elif mode == "sparse":
        deg = np.zeros(graph.n, dtype=np.int64)
        np.add.at(deg, dataset.train[:, 0], 1)
        np.add.at(deg, dataset.train[:, 1], 1)
        sparse = deg < 3
        out = rows[sparse[rows[:, 0]] | sparse[rows[:, 1]]]
    elif mode == "inductive":
        if len(dataset.hidden) == 0:
            raise ValueError("inductive evaluation needs a model trained with hide_fraction > 0")
        hidden = np.zeros(graph.n, dtype=bool)
        hidden[dataset.hidden] = True
        out = rows[hidden[rows[:, 0]] | hidden[rows[:, 1]]]
    else:
        raise ValueError(f"unknown evaluation mode {mode!r}; expected full, sparse or inductive")
    if len(out) == 0:
        raise EmptySplitError(f"no pairs left to evaluate in {mode} mode")
    return out


def evaluate(model: PrimModel, dataset: Dataset, split: str = "test", mode: str = "full") -> Report:
    rows = filter_rows(dataset.labelled(split, model.none_id), mode, model.graph, dataset)
    pred, _ = predict(model, rows[:, 0], rows[:, 1])
    classes = [model.relation_names[i] for i in model.scored_ids]
    return Report.from_predictions(mode, classes, rows[:, 2], pred)


# ---------------------------------------------------------------------------
# baselines


def majority_predictions(train_labels, rows: np.ndarray) -> np.ndarray:
    values, counts = np.unique(np.asarray(train_labels), return_counts=True)
    return np.full(len(rows), values[np.argmax(counts)], dtype=np.int64)


@dataclass(frozen=True)
class RuleThresholds:
    category: float        # competitive if path distance <= this
    complementary: float   # else complementary if path distance <= this
    distance_km: float = float("inf")  # CAT-D: competitive also needs distance <= this


def rule_predict(pathdist: np.ndarray, dist_km: np.ndarray, th: RuleThresholds,
                 competitive: int, complementary: int, none: int) -> np.ndarray:
    pathdist = np.asarray(pathdist)
    dist_km = np.asarray(dist_km)
    out = np.full(len(pathdist), none, dtype=np.int64)
    out[pathdist <= th.complementary] = complementary
    out[(pathdist <= th.category) & (dist_km <= th.distance_km)] = competitive
    return out


@dataclass
class RuleBaseline:
    name: str
    thresholds: RuleThresholds
    graph: PoiGraph
    taxonomy: Taxonomy

    def _ids(self):
        g = self.graph
        return g.relation("competitive").id, g.relation("complementary").id, g.relation("none").id

    def features(self, rows: np.ndarray):
        cats = self.graph.categories
        pd = np.array([self.taxonomy.path_distance(int(cats[a]), int(cats[b]))
                       for a, b in rows[:, :2].tolist()], dtype=np.int64)
        d = np.atleast_1d(self.graph.distance_km(rows[:, 0], rows[:, 1]))
        return pd, d

    def predict(self, rows: np.ndarray) -> np.ndarray:
        pd, d = self.features(rows)
        return rule_predict(pd, d, self.thresholds, *self._ids())


def threshold_grid(taxonomy: Taxonomy, with_distance: bool) -> list[RuleThresholds]:
    max_pd = int(2 * taxonomy.depth.max())
    levels = list(range(0, max_pd + 1))
    dists = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, float("inf")] if with_distance else [float("inf")]
    return [RuleThresholds(c, m, d) for c, m in itertools.combinations_with_replacement(levels, 2)
            for d in dists]


def fit_rule_baseline(name: str, graph: PoiGraph, taxonomy: Taxonomy, valid_rows: np.ndarray
                      ) -> tuple[RuleBaseline, float]:
    """Exhaustive threshold search maximizing validation Macro-F1 (first best wins)."""
    if name not in ("CAT", "CAT-D"):
        raise ValueError(f"unknown rule baseline {name!r}")
    probe = RuleBaseline(name, RuleThresholds(0, 0), graph, taxonomy)
    pd, d = probe.features(valid_rows)
    ids = probe._ids()
    k = len(graph.scored_relations)
    best, best_score = None, -1.0
    for th in threshold_grid(taxonomy, name == "CAT-D"):
        score = macro_f1(confusion_matrix(valid_rows[:, 2], rule_predict(pd, d, th, *ids), k))
        if score > best_score:
            best, best_score = th, score
    return RuleBaseline(name, best, graph, taxonomy), best_score
