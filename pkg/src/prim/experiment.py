"""Glue between data, model, training and evaluation used by the CLI and
by the experiment-style tests."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, training
from .config import RunConfig
from .graph import LoadedData, load_dir
from .model import PrimModel
from .tensor import GradCheckReport, grad_check


def load_for(config: RunConfig, data_dir: str | Path) -> LoadedData:
    return load_dir(data_dir, fractions=tuple(config.split), seed=config.seed,
                    nonrel_ratio=config.nonrel_ratio, hide_fraction=config.hide_fraction)


def build_model(config: RunConfig, data: LoadedData, params=None) -> PrimModel:
    """Model whose message-passing graph holds the training edges only."""
    graph = data.graph.with_edges(data.dataset.train)
    return PrimModel(config, graph, data.taxonomy, data.dataset.hidden, params)


@dataclass
class RunOutput:
    result: training.TrainResult
    data: LoadedData

    @property
    def model(self) -> PrimModel:
        return self.result.model


def run_training(config: RunConfig, data: LoadedData, log_path=None) -> RunOutput:
    model = build_model(config, data)
    valid = data.dataset.labelled("valid", model.none_id)
    result = training.train(model, data.dataset.train, valid, log_path=log_path)
    return RunOutput(result, data)


def test_report(model: PrimModel, data: LoadedData, mode: str = "full") -> evaluation.Report:
    return evaluation.evaluate(model, data.dataset, "test", mode)


def rule_reports(data: LoadedData) -> dict[str, evaluation.Report]:
    none_id = data.graph.relation("none").id
    valid = data.dataset.labelled("valid", none_id)
    test = data.dataset.labelled("test", none_id)
    classes = [r.name for r in data.graph.scored_relations]
    out = {}
    for name in ("CAT", "CAT-D"):
        rule, _ = evaluation.fit_rule_baseline(name, data.graph, data.taxonomy, valid)
        out[name] = evaluation.Report.from_predictions(name, classes, test[:, 2], rule.predict(test))
    return out


# ---------------------------------------------------------------------------
# gradient check on a hand-sized model


def tiny_instance():
    """Six POIs, two relations, a depth-2 taxonomy."""
    from .graph import PoiGraph, Taxonomy

    taxonomy = Taxonomy([-1, 0, 0, 1, 1, 2, 2], ["root", "food", "shop", "bar", "cafe", "mall", "market"])
    xy = np.array([[0.0, 0.0], [500.0, 0.0], [900.0, 300.0], [2000.0, 100.0],
                   [2100.0, 900.0], [300.0, 700.0]])
    categories = np.array([3, 4, 3, 5, 6, 4])
    edges = np.array([[0, 1, 0], [1, 2, 1], [3, 4, 0], [2, 5, 1], [0, 5, 0]])
    graph = PoiGraph.build(xy, categories, "planar", ["competitive", "complementary"], edges)
    negatives = np.array([[0, 3, 0], [1, 4, 1], [2, 3, 0], [5, 4, 1]])
    return graph, taxonomy, edges, negatives


def tiny_config(**changes) -> RunConfig:
    base = dict(dim=4, category_dim=4, heads=2, layers=2, attention_dim=3, distance_feature_dim=2,
                bins=(0.0, 0.6, 1.5), radius_km=1.15)
    base.update(changes)
    return RunConfig(**base)


def gradcheck_tiny(tolerance: float = 1e-4, **changes) -> GradCheckReport:
    graph, taxonomy, edges, negatives = tiny_instance()
    model = PrimModel(tiny_config(**changes), graph, taxonomy)

    def loss():
        return training.batch_loss(model, model.encode(), edges, negatives, model.config.loss_form,
                                   model.config.none_loss)

    return grad_check(loss, model.params, tolerance)
