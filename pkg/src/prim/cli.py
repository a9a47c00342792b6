"""``prim`` command line: train, eval, predict, synth and gradcheck."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint, evaluation, experiment, synthgen
from .config import ABLATIONS, ConfigError, RunConfig
from .graph import LoadError

log = logging.getLogger("prim")


class CliError(Exception):
    pass


def _flags(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    flags = tuple(sorted({f.strip().lstrip("-").upper() for f in text.split(",") if f.strip()}))
    for f in flags:
        if f not in ABLATIONS:
            raise CliError(f"unknown ablation flag {f!r}; expected a subset of T,S,D")
    return flags


# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    config = RunConfig.load(args.config, args.set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.to_text(), encoding="utf-8")
    data = experiment.load_for(config, args.data)
    run = experiment.run_training(config, data, log_path=out / "timing.tsv")
    result = run.result
    (out / "history.tsv").write_text(result.history_tsv(), encoding="utf-8")
    (out / "timing.tsv").write_text(result.timing_tsv(), encoding="utf-8")
    checkpoint.save(run.model, out / "model.ckpt")
    print(f"trained {len(result.history)} epochs, best epoch {result.best_epoch}; "
          f"checkpoint {out / 'model.ckpt'}")
    return 0


def _model_for_eval(args):
    ckpt = checkpoint.load(args.checkpoint)
    requested = _flags(getattr(args, "ablate", None))
    trained = ckpt.config.ablate
    if ("T" in requested) != ("T" in trained):
        raise CliError("-T changes the architecture and must match the checkpoint "
                       f"(trained with ablate={','.join(trained) or 'none'})")
    config = ckpt.config.replace(ablate=tuple(sorted(set(trained) | set(requested))))
    data = experiment.load_for(config, args.data)
    graph = data.graph.with_edges(data.dataset.train)
    return ckpt.build_model(graph, data.taxonomy, config), data


def cmd_eval(args) -> int:
    model, data = _model_for_eval(args)
    report = evaluation.evaluate(model, data.dataset, args.split, args.mode)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.tsv").write_text(report.tsv(), encoding="utf-8")
        (out / "report.txt").write_text(report.summary(), encoding="utf-8")
        (out / "config.txt").write_text(model.config.to_text(), encoding="utf-8")
    sys.stdout.write(report.summary())
    return 0


def _read_pairs(path: Path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise CliError(f"{path}:{lineno}: expected 'src_id dst_id'")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise CliError(f"{path}:{lineno}: POI ids must be integers") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def cmd_predict(args) -> int:
    model, _ = _model_for_eval(args)
    pairs = _read_pairs(Path(args.pairs))
    lines = []
    if len(pairs):
        if pairs.min() < 0 or pairs.max() >= model.graph.n:
            raise CliError(f"pair ids must lie in [0, {model.graph.n})")
        rel, score = evaluation.predict(model, pairs[:, 0], pairs[:, 1])
        lines = [f"{a}\t{b}\t{model.relation_names[r]}\t{s:.6f}"
                 for (a, b), r, s in zip(pairs.tolist(), rel.tolist(), score.tolist())]
    text = "".join(l + "\n" for l in lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    config = synthgen.parse_synth_overrides(args.set or [])
    city = synthgen.generate(config)
    city.write(args.out)
    stats = synthgen.city_stats(city)
    print(f"wrote {config.n_pois} POIs and {len(city.edges)} edges to {args.out}")
    print("\n".join(stats.lines()))
    return 0


def cmd_gradcheck(args) -> int:
    if args.scale != "tiny":
        raise CliError(f"unknown gradcheck scale {args.scale!r}; only 'tiny' is available")
    t0 = time.perf_counter()
    report = experiment.gradcheck_tiny(args.tolerance)
    print("\n".join(report.lines()))
    name, worst = report.worst()
    print(f"worst relative error {worst:.3e} ({name}) in {time.perf_counter() - t0:.1f}s: "
          f"{'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prim", description="Spatially aware POI relationship inference.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--data", required=True, help="directory with pois.tsv, taxonomy.tsv, edges.tsv")
    t.add_argument("--out", required=True)
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--data", required=True)
    e.add_argument("--mode", default="full", choices=("full", "sparse", "inductive"))
    e.add_argument("--split", default="test", choices=("train", "valid", "test"))
    e.add_argument("--ablate", help="comma separated subset of S,D (T must match training)")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="label POI pairs")
    r.add_argument("checkpoint")
    r.add_argument("pairs", help="file with one 'src_id dst_id' per line")
    r.add_argument("--data", required=True)
    r.add_argument("--ablate")
    r.add_argument("--out")
    r.set_defaults(func=cmd_predict)

    s = sub.add_parser("synth", help="generate a synthetic city")
    s.add_argument("--out", required=True)
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("gradcheck", help="finite-difference gradient check")
    g.add_argument("--scale", default="tiny")
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigError, LoadError, checkpoint.CheckpointError, evaluation.EmptySplitError,
            FileNotFoundError, ValueError, LookupError) as exc:
        print(f"prim {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
