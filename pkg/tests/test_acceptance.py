"""Acceptance criteria, one test each.

Every test prints a ``criterion N: PASS|FAIL ...`` line with the measured
numbers before asserting, so ``pytest -s`` or the captured output shows the
evidence.  Criteria 4 to 7 train real models and take several minutes each.
"""

import time

import numpy as np
import pytest

import oracle
from prim import checkpoint, cli, evaluation, experiment, scoring, spatial, synthgen, training, wrgnn
from prim.config import RunConfig
from prim.graph import PoiGraph, Taxonomy
from prim.model import PrimModel
from prim.tensor import Tensor


def verdict(number, ok, detail):
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def default_city(tmp_path_factory):
    d = tmp_path_factory.mktemp("default_city")
    synthgen.generate(synthgen.SynthConfig()).write(d)
    return d


# 1 ------------------------------------------------------------------------------


def test_criterion_1_gradient_fidelity():
    t0 = time.perf_counter()
    report = experiment.gradcheck_tiny(1e-4)
    seconds = time.perf_counter() - t0
    graph, _, _, _ = experiment.tiny_instance()
    name, worst = report.worst()
    ok = report.passed and worst <= 1e-4 and seconds < 60 and graph.n == 6
    verdict(1, ok, f"worst relative error {worst:.2e} ({name}) over {len(report.max_rel_error)} "
                   f"parameters in {seconds:.1f}s")


# 2 ------------------------------------------------------------------------------


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 12))
    depth_parents = [-1, 0, 0, 1, 1, 2, 2]
    taxonomy = Taxonomy(depth_parents)
    xy = rng.uniform(0, 2500, size=(n, 2))
    categories = rng.choice([3, 4, 5, 6], size=n)
    pairs = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(3 * n, 2)) if a < b}
    edges = np.array([[a, b, int(rng.integers(0, 2))] for a, b in sorted(pairs)]).reshape(-1, 3)
    graph = PoiGraph.build(xy, categories, "planar", ["competitive", "complementary"], edges)
    config = RunConfig(dim=8, category_dim=4, heads=2, layers=2, attention_dim=3, distance_feature_dim=2,
                       bins=(0.0, 0.7, 1.5), seed=seed)
    return PrimModel(config, graph, taxonomy), rng


def test_criterion_2_invariant_suite():
    worst_alpha = worst_beta = worst_orth = worst_idem = 0.0
    asymmetric = permuted = 0
    instances = 100
    for seed in range(instances):
        model, rng = random_instance(seed)
        n = model.graph.n
        q = model.category_reprs()
        h0 = model.initial_states(q)
        rel = model.params["relation.emb"]
        lp = model.layer_params(0)
        hstar = Tensor(np.concatenate([h0.data, q.data], axis=1))
        for e in model._edges:
            alpha = wrgnn.attention_weights(hstar, e, lp, 2, n).data
            sums = np.zeros((n, 2))
            np.add.at(sums, e.dst, alpha)
            has = np.bincount(e.dst, minlength=n) > 0
            worst_alpha = max(worst_alpha, float(np.abs(sums[has] - 1).max(initial=0)))
        pairs = model.spatial_pairs
        h = model.encode().h
        if len(pairs.query):
            p = model.params
            _, beta = spatial.spatial_context(h, p["spatial.W_Q"], p["spatial.W_K"], p["spatial.W_V"], pairs,
                                              return_attention=True)
            sums = np.bincount(pairs.query, weights=beta.data, minlength=n)
            worst_beta = max(worst_beta, float(np.abs(sums[np.unique(pairs.query)] - 1).max()))
        normals = scoring.unit_normals(model.params["scoring.hyperplanes"])
        for b in range(normals.data.shape[0]):
            w = Tensor(normals.data[b:b + 1])
            proj = scoring.project(h, w).data
            worst_orth = max(worst_orth, float(np.abs(proj @ w.data[0]).max()))
            worst_idem = max(worst_idem, float(np.abs(scoring.project(Tensor(proj), w).data - proj).max()))
        enc = model.encode()
        src, dst = rng.integers(0, n, 20), rng.integers(0, n, 20)
        asymmetric += not np.array_equal(model.score_pairs(enc, src, dst).data,
                                         model.score_pairs(enc, dst, src).data)
        ref = wrgnn.aggregate_layer(h0, q, rel, lp, model._edges, 2).data
        shuffled = []
        for e in model._edges:
            perm = rng.permutation(len(e.dst))
            shuffled.append(wrgnn.RelationEdges(e.relation, e.dst[perm], e.src[perm], e.features[perm]))
        permuted += not np.array_equal(wrgnn.aggregate_layer(h0, q, rel, lp, shuffled, 2).data, ref)
    ok = (worst_alpha <= 1e-12 and worst_beta <= 1e-12 and worst_orth <= 1e-12 and worst_idem <= 1e-12
          and asymmetric == 0 and permuted == 0)
    verdict(2, ok, f"{instances} instances: max|sum alpha - 1| {worst_alpha:.1e}, max|sum beta - 1| "
                   f"{worst_beta:.1e}, orthogonality {worst_orth:.1e}, idempotence {worst_idem:.1e}, "
                   f"asymmetric scores {asymmetric}, order-dependent aggregations {permuted}")


# 3 ------------------------------------------------------------------------------


def test_criterion_3_oracle_equivalence():
    taxonomy = Taxonomy([-1, 0, 0, 1, 1, 2, 2])
    rng = np.random.default_rng(3)
    xy = rng.uniform(0, 1600, size=(5, 2))
    categories = np.array([3, 4, 5, 6, 3])
    edges = np.array([[0, 1, 0], [1, 2, 1], [2, 3, 0], [0, 4, 1], [3, 4, 0]])
    graph = PoiGraph.build(xy, categories, "planar", ["competitive", "complementary"], edges)
    config = RunConfig(dim=4, category_dim=4, heads=2, layers=2, attention_dim=3, distance_feature_dim=2,
                       bins=(0.0, 0.5, 1.0), seed=3)
    model = PrimModel(config, graph, taxonomy)
    enc = model.encode()
    h, rel, p = oracle.encode(model.params, config, taxonomy.parent, categories, xy, edges,
                              [r.id for r in graph.data_relations], graph.relation("self").id)
    forward_err = max(np.abs(enc.h.data - h).max(), np.abs(enc.relations.data - rel).max())

    batch_pos = np.array([[0, 1, 0], [1, 2, 1]])
    batch_neg = np.array([[0, 3, 0], [2, 4, 1]])

    def score(a, b, r):
        return oracle.score(h, rel, p, config, xy, a, b, r)

    plain = training.batch_loss(model, enc, batch_pos, batch_neg, "standard", "negatives_only").item()
    plain_ref = oracle.plain_loss(score, batch_pos.tolist(), batch_neg.tolist(), model.none_id)
    contrast = training.batch_loss(model, enc, batch_pos, batch_neg).item()
    contrast_ref = oracle.contrast_loss(score, batch_pos.tolist(), batch_neg.tolist(),
                                        model.scored_ids.tolist(), model.none_id)
    loss_err = max(abs(plain - plain_ref), abs(contrast - contrast_ref))
    verdict(3, forward_err <= 1e-12 and loss_err <= 1e-12,
            f"forward max error {forward_err:.1e}, 4-triple loss error {loss_err:.1e} "
            f"(plain {plain:.6f}, contrast {contrast:.6f})")


# 4 ------------------------------------------------------------------------------


def test_criterion_4_planted_recovery(default_city):
    t0 = time.perf_counter()
    config = RunConfig(max_seconds=540)
    data = experiment.load_for(config, default_city)
    run = experiment.run_training(config, data)
    report = experiment.test_report(run.model, data)
    seconds = time.perf_counter() - t0
    rules = experiment.rule_reports(data)
    cat, catd = rules["CAT"].macro, rules["CAT-D"].macro
    n_edges = len(data.edges)
    ok = (n_edges >= 15000 and data.graph.n == 2000 and report.macro >= 0.75 and seconds <= 600
          and report.macro - cat >= 0.05 and report.macro - catd >= 0.05)
    verdict(4, ok, f"test Macro-F1 {report.macro:.4f} (CAT {cat:.4f}, CAT-D {catd:.4f}) after "
                   f"{len(run.result.history)} epochs, best {run.result.best_epoch}, {seconds:.0f}s; "
                   f"{data.graph.n} POIs, {n_edges} edges")


# 5 ------------------------------------------------------------------------------

ABLATION_CITY = dict(n_pois=1000, side_km=7.07, target_edges=8000, competitive=(0.0, 3.0, 0.946))
VARIANTS = {"full": (), "-T": ("T",), "-S": ("S",), "-D": ("D",), "-DST": ("D", "S", "T")}


def test_criterion_5_ablation_ordering(tmp_path):
    scores = {name: [] for name in VARIANTS}
    for seed in (7, 8, 9):
        d = tmp_path / f"city{seed}"
        synthgen.generate(synthgen.SynthConfig(**ABLATION_CITY, seed=seed)).write(d)
        for name, flags in VARIANTS.items():
            config = RunConfig(dim=64, category_dim=64, seed=seed, ablate=flags, max_seconds=300)
            data = experiment.load_for(config, d)
            run = experiment.run_training(config, data)
            scores[name].append(experiment.test_report(run.model, data).macro)
            print(f"  seed {seed} {name:>5}: {scores[name][-1]:.4f}")
    mean = {k: float(np.mean(v)) for k, v in scores.items()}
    singles = ("-T", "-S", "-D")
    ok = (all(mean["full"] >= mean[s] for s in singles) and all(mean[s] >= mean["-DST"] for s in singles)
          and mean["full"] - mean["-D"] >= 0.03)
    verdict(5, ok, "mean Macro-F1 over seeds 7,8,9: " + ", ".join(f"{k} {v:.4f}" for k, v in mean.items())
            + f"; full - (-D) = {mean['full'] - mean['-D']:.4f}")


# 6 ------------------------------------------------------------------------------


def test_criterion_6_inductive(default_city):
    config = RunConfig(hide_fraction=0.2, node_init="taxonomy", max_seconds=540)
    data = experiment.load_for(config, default_city)
    run = experiment.run_training(config, data)
    report = experiment.test_report(run.model, data, "inductive")
    none_id = data.graph.relation("none").id
    rows = evaluation.filter_rows(data.dataset.labelled("test", none_id), "inductive", data.graph, data.dataset)
    majority = evaluation.majority_predictions(data.dataset.labelled("train", none_id)[:, 2], rows)
    classes = [data.graph.relations[i].name for i in run.model.scored_ids]
    base = evaluation.Report.from_predictions("majority", classes, rows[:, 2], majority).macro
    hidden = len(data.dataset.hidden)
    ok = hidden == 400 and report.macro - base >= 0.15
    verdict(6, ok, f"hidden-POI Macro-F1 {report.macro:.4f} vs majority {base:.4f} "
                   f"(margin {report.macro - base:.4f}) on {report.total} pairs, {hidden} hidden POIs")


# 7 ------------------------------------------------------------------------------


def test_criterion_7_linear_scaling(default_city):
    from prim.tensor import AdamState

    config = RunConfig()
    data = experiment.load_for(config, default_city)
    train = data.dataset.train[np.random.default_rng(0).permutation(len(data.dataset.train))]
    means = []
    for m in (len(train) // 2, 2 * (len(train) // 2)):
        edges = train[:m]
        model = PrimModel(config, data.graph.with_edges(edges), data.taxonomy)
        sampler = training.NegativeSampler(model.graph.n, edges)
        state = AdamState(lr=config.lr)
        times = []
        for epoch in range(3):
            t0 = time.perf_counter()
            training.train_epoch(model, edges, sampler, state, np.random.default_rng(epoch), epoch)
            times.append(time.perf_counter() - t0)
        means.append(float(np.mean(times)))
    ratio = means[1] / means[0]
    verdict(7, ratio <= 2.5, f"epoch time {means[0]:.2f}s at m={len(train) // 2} edges, {means[1]:.2f}s at "
                             f"2m, ratio {ratio:.2f}, n={data.graph.n} fixed")


# 8 ------------------------------------------------------------------------------


def test_criterion_8_synthetic_calibration(default_city):
    stats = synthgen.verify_stats(default_city)
    verdict(8, stats.all_passed, "; ".join(line.replace("\t", " ") for line in stats.lines()))


# 9 ------------------------------------------------------------------------------


def test_criterion_9_determinism_and_persistence(tmp_path):
    city = tmp_path / "city"
    synthgen.generate(synthgen.SynthConfig(n_pois=200, target_edges=1200, side_km=4.0, seed=9)).write(city)
    sets = ["dim=16", "category_dim=16", "heads=2", "layers=2", "batch_size=128", "max_epochs=4"]
    for run in ("a", "b"):
        code = cli.main(["train", "--data", str(city), "--out", str(tmp_path / run)] + [f"--set={s}" for s in sets])
        assert code == 0
    same_history = (tmp_path / "a" / "history.tsv").read_bytes() == (tmp_path / "b" / "history.tsv").read_bytes()
    same_ckpt = (tmp_path / "a" / "model.ckpt").read_bytes() == (tmp_path / "b" / "model.ckpt").read_bytes()

    ckpt = checkpoint.load(tmp_path / "a" / "model.ckpt")
    data = experiment.load_for(ckpt.config, city)
    trained = experiment.build_model(ckpt.config, data, {k: Tensor(v.copy()) for k, v in ckpt.arrays.items()})
    rng = np.random.default_rng(0)
    src, dst = rng.integers(0, data.graph.n, 100), rng.integers(0, data.graph.n, 100)
    before = trained.score_pairs(trained.encode(), src, dst).data
    checkpoint.save(trained, tmp_path / "again.ckpt")
    loaded = checkpoint.load(tmp_path / "again.ckpt").build_model(trained.graph, data.taxonomy)
    after = loaded.score_pairs(loaded.encode(), src, dst).data
    resaved = checkpoint.Checkpoint.from_model(loaded).to_bytes() == (tmp_path / "again.ckpt").read_bytes()
    exact = np.array_equal(before, after)
    ok = same_history and same_ckpt and exact and resaved
    verdict(9, ok, f"history identical {same_history}, checkpoints identical {same_ckpt}, "
                   f"100 scores bit-exact after reload {exact}, save-load-save identical {resaved}")
