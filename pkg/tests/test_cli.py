"""Configuration, checkpoints and the command line."""

import numpy as np
import pytest

from prim import checkpoint, cli, experiment, synthgen
from prim.config import ConfigError, RunConfig
from prim.graph import PoiGraph
from prim.model import PrimModel

FAST = ["dim=8", "category_dim=8", "heads=2", "layers=1", "attention_dim=4", "distance_feature_dim=2",
        "batch_size=256"]


# --- config ----------------------------------------------------------------------


def test_defaults_match_reference_settings():
    c = RunConfig()
    assert (c.dim, c.category_dim, c.heads, c.layers) == (128, 128, 4, 3)
    assert (c.radius_km, c.theta, c.negatives, c.lr, c.batch_size) == (1.15, 2.0, 5, 0.001, 512)


def test_config_text_round_trip_and_overrides():
    c = RunConfig(dim=16, ablate=("D", "S"), bins=(0.0, 2.5))
    assert RunConfig.from_text(c.to_text()) == c
    d = RunConfig.from_text(c.to_text(), ["dim=32", "ablate=T"])
    assert d.dim == 32 and d.ablate == ("T",)
    for key in ("dim", "radius_km", "node_init", "loss_form", "none_loss", "split", "seed"):
        assert f"{key} = " in RunConfig().to_text()


def test_config_errors_name_the_key():
    with pytest.raises(ConfigError, match="heads"):
        RunConfig(dim=10, heads=4)
    with pytest.raises(ConfigError, match="negatives"):
        RunConfig(negatives=-1)
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_text("bogus = 1\n")


# --- checkpoint --------------------------------------------------------------------


def tiny_model(**changes):
    graph, taxonomy, _, _ = experiment.tiny_instance()
    return PrimModel(experiment.tiny_config(**changes), graph, taxonomy), graph, taxonomy


def test_save_load_save_is_byte_identical(tmp_path):
    model, graph, taxonomy = tiny_model(seed=4)
    checkpoint.save(model, tmp_path / "a.ckpt")
    again = checkpoint.load(tmp_path / "a.ckpt").build_model(graph, taxonomy)
    checkpoint.save(again, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_round_trip_scores_are_bit_exact(tmp_path):
    model, graph, taxonomy = tiny_model(seed=5)
    rng = np.random.default_rng(0)
    src, dst = rng.integers(0, 6, 100), rng.integers(0, 6, 100)
    before = model.score_pairs(model.encode(), src, dst).data
    checkpoint.save(model, tmp_path / "m.ckpt")
    loaded = checkpoint.load(tmp_path / "m.ckpt").build_model(graph, taxonomy)
    assert np.array_equal(loaded.score_pairs(loaded.encode(), src, dst).data, before)


def test_vocabulary_mismatch_fails(tmp_path):
    model, graph, taxonomy = tiny_model()
    checkpoint.save(model, tmp_path / "m.ckpt")
    other = PoiGraph.build(graph.xy, graph.categories, "planar", ["competitive", "substitute"],
                           np.array([[0, 1, 0], [1, 2, 1]]))
    with pytest.raises(checkpoint.CheckpointError, match="relation vocabulary"):
        checkpoint.load(tmp_path / "m.ckpt").build_model(other, taxonomy)


def test_corrupt_checkpoints_rejected(tmp_path):
    model, _, _ = tiny_model()
    raw = checkpoint.Checkpoint.from_model(model).to_bytes()
    with pytest.raises(checkpoint.CheckpointError, match="magic"):
        checkpoint.Checkpoint.from_bytes(b"x" + raw)
    with pytest.raises(checkpoint.CheckpointError, match="truncated"):
        checkpoint.Checkpoint.from_bytes(raw[:-8])
    with pytest.raises(checkpoint.CheckpointError, match="trailing"):
        checkpoint.Checkpoint.from_bytes(raw + b"\0" * 8)


# --- command line -------------------------------------------------------------------


@pytest.fixture(scope="module")
def city(tmp_path_factory):
    d = tmp_path_factory.mktemp("city")
    synthgen.generate(synthgen.SynthConfig(n_pois=120, target_edges=600, side_km=3.0, seed=2)).write(d)
    return d


@pytest.fixture(scope="module")
def trained(city, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    args = ["train", "--data", str(city), "--out", str(out)] + [f"--set={s}" for s in FAST + ["max_epochs=3"]]
    assert cli.main(args) == 0
    return out


def test_synth_writes_three_tsvs(tmp_path, capsys):
    assert cli.main(["synth", "--out", str(tmp_path), "--set", "n_pois=100", "--set", "target_edges=300"]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["edges.tsv", "pois.tsv", "taxonomy.tsv"]
    assert "competitive_path_distance" in capsys.readouterr().out


def test_train_outputs(trained):
    names = {p.name for p in trained.iterdir()}
    assert {"model.ckpt", "history.tsv", "timing.tsv", "config.txt"} <= names
    cfg = RunConfig.from_text((trained / "config.txt").read_text())
    assert cfg.dim == 8 and cfg.max_epochs == 3
    assert len((trained / "history.tsv").read_text().splitlines()) == 4


def test_same_seed_gives_identical_history(city, trained, tmp_path):
    args = ["train", "--data", str(city), "--out", str(tmp_path)] + [f"--set={s}" for s in FAST + ["max_epochs=3"]]
    assert cli.main(args) == 0
    assert (tmp_path / "history.tsv").read_bytes() == (trained / "history.tsv").read_bytes()


def test_zero_epochs_saves_initial_parameters(city, tmp_path):
    args = ["train", "--data", str(city), "--out", str(tmp_path)] + [f"--set={s}" for s in FAST + ["max_epochs=0"]]
    assert cli.main(args) == 0
    ckpt = checkpoint.load(tmp_path / "model.ckpt")
    data = experiment.load_for(ckpt.config, city)
    fresh = experiment.build_model(ckpt.config, data)
    assert all(np.array_equal(fresh.params[k].data, v) for k, v in ckpt.arrays.items())


def test_missing_pois_file_is_named(tmp_path, capsys):
    assert cli.main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "pois.tsv" in err and err.count("\n") == 1


def test_bad_config_key(city, tmp_path, capsys):
    assert cli.main(["train", "--data", str(city), "--out", str(tmp_path), "--set", "widht=3"]) == 2
    assert "widht" in capsys.readouterr().err


def test_eval_writes_reports(trained, city, tmp_path, capsys):
    assert cli.main(["eval", str(trained / "model.ckpt"), "--data", str(city), "--out", str(tmp_path)]) == 0
    assert "Macro-F1" in capsys.readouterr().out
    assert {"report.tsv", "report.txt", "config.txt"} <= {p.name for p in tmp_path.iterdir()}


def test_eval_ablate_d_on_d_trained_checkpoint_is_noop(city, tmp_path, capsys):
    run = tmp_path / "run"
    args = ["train", "--data", str(city), "--out", str(run)] + [f"--set={s}" for s in FAST + ["max_epochs=1", "ablate=D"]]
    assert cli.main(args) == 0
    capsys.readouterr()
    cli.main(["eval", str(run / "model.ckpt"), "--data", str(city)])
    plain = capsys.readouterr().out
    cli.main(["eval", str(run / "model.ckpt"), "--data", str(city), "--ablate", "D"])
    assert capsys.readouterr().out == plain


def test_eval_rejects_t_mismatch(trained, city, capsys):
    assert cli.main(["eval", str(trained / "model.ckpt"), "--data", str(city), "--ablate", "T"]) == 2
    assert "-T" in capsys.readouterr().err


def test_eval_sparse_on_dense_graph_errors(tmp_path, capsys):
    city = synthgen.generate(synthgen.SynthConfig(n_pois=30, target_edges=400, side_km=1.0, seed=1))
    city.write(tmp_path / "d")
    args = ["train", "--data", str(tmp_path / "d"), "--out", str(tmp_path / "r")]
    assert cli.main(args + [f"--set={s}" for s in FAST + ["max_epochs=0"]]) == 0
    capsys.readouterr()
    code = cli.main(["eval", str(tmp_path / "r" / "model.ckpt"), "--data", str(tmp_path / "d"), "--mode", "sparse"])
    assert code == 2
    assert "no pairs left" in capsys.readouterr().err


def test_eval_on_memorizable_training_split(tmp_path, capsys):
    city = synthgen.generate(synthgen.SynthConfig(n_pois=30, target_edges=40, side_km=2.0, seed=4))
    city.write(tmp_path / "d")
    sets = ["dim=32", "category_dim=16", "heads=2", "layers=1", "lr=0.02", "batch_size=8", "max_epochs=150",
            "patience=150", "mask_targets=false", "split=1,0,0", "node_init=taxonomy+free"]
    args = ["train", "--data", str(tmp_path / "d"), "--out", str(tmp_path / "r")]
    assert cli.main(args + [f"--set={s}" for s in sets]) == 0
    capsys.readouterr()
    assert cli.main(["eval", str(tmp_path / "r" / "model.ckpt"), "--data", str(tmp_path / "d"),
                     "--split", "train", "--out", str(tmp_path / "e")]) == 0
    report = dict(l.split("\t", 1) for l in (tmp_path / "e" / "report.tsv").read_text().splitlines())
    assert float(report["macro_f1"]) >= 0.95


def test_predict_one_line(trained, city, tmp_path, capsys):
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("3\t17\n")
    assert cli.main(["predict", str(trained / "model.ckpt"), str(pairs), "--data", str(city)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1
    src, dst, rel, score = lines[0].split("\t")
    assert (src, dst) == ("3", "17") and rel in ("competitive", "complementary", "none")
    float(score)


def test_predict_bad_line_is_located(trained, city, tmp_path, capsys):
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("1\t2\nbad line\n")
    assert cli.main(["predict", str(trained / "model.ckpt"), str(pairs), "--data", str(city)]) == 2
    assert ":2" in capsys.readouterr().err


def test_gradcheck_passes(capsys):
    assert cli.main(["gradcheck", "--scale", "tiny"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_gradcheck_exit_code_tracks_tolerance(capsys):
    assert cli.main(["gradcheck", "--scale", "tiny", "--tolerance", "1e-13"]) == 1
    assert "FAIL" in capsys.readouterr().out
