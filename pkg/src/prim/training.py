"""Negative sampling, the cross-entropy objective and the training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Encoded, PrimModel
from .tensor import (AdamState, NonFiniteError, Tape, Tensor, adam_step, add, backward, concat,
                     mean, mul, softplus, sub, tsum)

log = logging.getLogger(__name__)

MAX_RESAMPLE = 100


@dataclass
class NegativeSampler:
    """Corrupts one endpoint of a positive triple with a uniform random POI.

    Candidates that are self pairs or known positives of the same relation
    are redrawn, up to ``MAX_RESAMPLE`` attempts; after that the last
    candidate is kept and ``forced`` is incremented.
    """

    n: int
    positives: np.ndarray
    forced: int = 0
    _known: set = field(default_factory=set, repr=False)

    def __post_init__(self):
        p = np.asarray(self.positives, dtype=np.int64).reshape(-1, 3)
        self._known = set(self._keys(p[:, 0], p[:, 1], p[:, 2]).tolist())

    def _keys(self, a, b, r):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return (r * self.n + lo) * self.n + hi

    def _bad(self, src, dst, rel):
        keys = self._keys(src, dst, rel)
        known = np.fromiter((k in self._known for k in keys.tolist()), dtype=bool, count=len(keys))
        return (src == dst) | known

    def sample(self, positives: np.ndarray, omega: int, rng: np.random.Generator) -> np.ndarray:
        """``omega`` corrupted (src, dst, rel) rows per positive, grouped by positive."""
        positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
        base = np.repeat(positives, omega, axis=0)
        if len(base) == 0:
            return base
        side = rng.integers(0, 2, size=len(base))
        out = base.copy()
        todo = np.arange(len(base))
        for _ in range(MAX_RESAMPLE):
            repl = rng.integers(0, self.n, size=len(todo))
            rows = base[todo].copy()
            rows[side[todo] == 0, 0] = repl[side[todo] == 0]
            rows[side[todo] == 1, 1] = repl[side[todo] == 1]
            out[todo] = rows
            bad = self._bad(rows[:, 0], rows[:, 1], rows[:, 2])
            todo = todo[bad]
            if len(todo) == 0:
                break
        if len(todo):
            self.forced += len(todo)
            log.warning("accepted %d negatives after %d redraws", len(todo), MAX_RESAMPLE)
        return out


def sample_negatives(positive, omega: int, rng: np.random.Generator, n: int,
                     known_positives: np.ndarray) -> np.ndarray:
    return NegativeSampler(n, known_positives).sample(np.asarray(positive).reshape(1, 3), omega, rng)


def batch_loss(model: PrimModel, enc: Encoded, positives: np.ndarray, negatives: np.ndarray,
               loss_form: str = "standard", none_loss: str = "contrast") -> Tensor:
    """Mean negative log-likelihood of a batch.

    ``negatives_only`` is the plain objective: -log sig(s) for each positive
    triple, -log(1 - sig(s)) for each corrupted triple (or the literal
    -log sig(1 - s) under ``as_printed``) and -log sig(s_none) for each
    corrupted pair.

    ``contrast`` (default) keeps those terms and adds, for every labelled
    pair, -log(1 - sig(s)) on each other scored relation, so a true pair also
    pushes down "none" and the competing relation.  Terms of a corrupted pair
    carry weight 1/omega, keeping relation and non-relation pairs at equal
    total weight; the loss is the weighted mean.
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 3)
    if none_loss == "negatives_only":
        loss = _plain_loss(model, enc, positives, negatives, loss_form)
    else:
        loss = _contrast_loss(model, enc, positives, negatives, loss_form)
    if not np.isfinite(loss.data):
        raise NonFiniteError("non-finite loss")
    return loss


def _plain_loss(model, enc, positives, negatives, loss_form):
    terms = []
    if len(positives):
        s = model.score_triples(enc, positives[:, 0], positives[:, 1], positives[:, 2])
        terms.append(softplus(mul(s, -1.0)))
    if len(negatives):
        s = model.score_triples(enc, negatives[:, 0], negatives[:, 1], negatives[:, 2])
        terms.append(softplus(sub(s, 1.0)) if loss_form == "as_printed" else softplus(s))
        none_rel = np.full(len(negatives), model.none_id)
        s_none = model.score_triples(enc, negatives[:, 0], negatives[:, 1], none_rel)
        terms.append(softplus(mul(s_none, -1.0)))
    return mean(concat(terms, axis=0))


def _contrast_loss(model, enc, positives, negatives, loss_form):
    pairs = np.concatenate([positives, negatives])
    if len(pairs) == 0:
        raise ValueError("empty batch")
    col = {int(r): k for k, r in enumerate(model.scored_ids)}
    none_col = col[model.none_id]
    n_pos, n_rel = len(positives), len(model.scored_ids)
    rows = np.arange(len(pairs))
    # sign +1 where the score should be high, -1 where it should be low
    sign = -np.ones((len(pairs), n_rel))
    sign[rows[:n_pos], [col[int(r)] for r in positives[:, 2]]] = 1.0
    sign[rows[n_pos:], none_col] = 1.0
    shift = np.zeros_like(sign)
    if loss_form == "as_printed" and len(negatives):
        shift[rows[n_pos:], [col[int(r)] for r in negatives[:, 2]]] = -1.0
    omega = len(negatives) / n_pos if n_pos else 1.0
    weight = np.ones((len(pairs), 1))
    weight[n_pos:] = 1.0 / omega if omega > 0 else 1.0
    scores = model.score_pairs(enc, pairs[:, 0], pairs[:, 1])
    terms = softplus(add(mul(scores, -sign), shift))
    return mul(tsum(mul(terms, weight)), 1.0 / float(weight.sum() * n_rel))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_macro_f1: float
    val_micro_f1: float
    seconds: float


@dataclass
class TrainResult:
    model: PrimModel
    history: list[EpochRecord]
    best_epoch: int
    forced_negatives: int

    def history_tsv(self) -> str:
        """Per-epoch metrics; wall-clock time lives in :meth:`timing_tsv` so
        this file is reproducible byte for byte."""
        lines = ["epoch\ttrain_loss\tval_macro_f1\tval_micro_f1"]
        for h in self.history:
            lines.append(f"{h.epoch}\t{h.train_loss!r}\t{h.val_macro_f1!r}\t{h.val_micro_f1!r}")
        return "\n".join(lines) + "\n"

    def timing_tsv(self) -> str:
        lines = ["epoch\ttrain_loss\tval_macro_f1\tval_micro_f1\tseconds"]
        for h in self.history:
            lines.append(f"{h.epoch}\t{h.train_loss:.6f}\t{h.val_macro_f1:.6f}\t"
                         f"{h.val_micro_f1:.6f}\t{h.seconds:.3f}")
        return "\n".join(lines) + "\n"


def train_epoch(model: PrimModel, train: np.ndarray, sampler: NegativeSampler, state: AdamState,
                rng: np.random.Generator, epoch: int = 0) -> float:
    c = model.config
    isolate = c.isolate_fraction if c.isolate_fraction >= 0 else c.hide_fraction
    order = rng.permutation(len(train))
    losses = []
    for step, start in enumerate(range(0, len(order), c.batch_size)):
        batch = train[order[start:start + c.batch_size]]
        negatives = sampler.sample(batch, c.negatives, rng)
        cut = None
        if isolate > 0:
            # rehearse the unseen-POI case: some endpoints lose every edge
            ends = np.unique(batch[:, :2])
            cut = ends[rng.random(len(ends)) < isolate]
        model.zero_grad()
        with Tape() as tape:
            enc = model.encode(batch[:, :2] if c.mask_targets else None, cut)
            try:
                loss = batch_loss(model, enc, batch, negatives, c.loss_form, c.none_loss)
            except NonFiniteError:
                raise NonFiniteError(f"loss diverged at epoch {epoch}, step {step}") from None
        backward(loss, tape)
        adam_step(model.params, state)
        losses.append(loss.item())
    return float(np.mean(losses)) if losses else float("nan")


def train(model: PrimModel, train_triples: np.ndarray, valid: np.ndarray | None = None,
          evaluate=None, log_path: str | Path | None = None) -> TrainResult:
    """Mini-batch Adam with early stopping on validation Macro-F1.

    ``valid`` holds labelled (src, dst, rel) rows (non-relation pairs use the
    ``none`` id); ``evaluate(model, rows)`` returns (macro, micro) and
    defaults to :func:`prim.evaluation.macro_micro`.
    """
    from .evaluation import macro_micro

    c = model.config
    evaluate = evaluate or macro_micro
    rng = np.random.default_rng(c.seed + 1)
    state = AdamState(lr=c.lr)
    train_triples = np.asarray(train_triples, dtype=np.int64).reshape(-1, 3)
    sampler = NegativeSampler(model.graph.n, train_triples)
    history: list[EpochRecord] = []
    best = (-np.inf, 0, model.snapshot())
    since_best = 0
    started = time.perf_counter()
    for epoch in range(1, c.max_epochs + 1):
        t0 = time.perf_counter()
        loss = train_epoch(model, train_triples, sampler, state, rng, epoch)
        if valid is not None and len(valid):
            macro, micro = evaluate(model, valid)
        else:
            macro, micro = float("nan"), float("nan")
        history.append(EpochRecord(epoch, loss, macro, micro, time.perf_counter() - t0))
        log.info("epoch %d loss %.5f val macro %.4f micro %.4f", epoch, loss, macro, micro)
        if log_path is not None:
            Path(log_path).write_text(TrainResult(model, history, best[1], 0).timing_tsv())
        score = macro if np.isfinite(macro) else -loss
        if score > best[0]:
            best = (score, epoch, model.snapshot())
            since_best = 0
        else:
            since_best += 1
            if since_best >= c.patience:
                break
        if c.max_seconds and time.perf_counter() - started > c.max_seconds:
            break
    if history:
        model.restore(best[2])
    return TrainResult(model, history, best[1], sampler.forced)
