"""Back-off model construction: score-table mixing, n-gram growing,
the Kneser-Ney baseline, and size pruning.

All builders share the same assembly machinery: explicit probabilities are
computed bottom-up from unigrams, missing prefix grams are padded with their
backed-off values (so the gram set is prefix-closed without disturbing any
query), and the finalize step derives back-off weights that make every
context normalize.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

from .approx import METHOD_OURS, METHOD_PC, ScoreTable
from .backoff import BackoffModel, floor_log10
from .counts import CountTrie, Gram, ProbAccumulator
from .errors import DataError
from .stream import ScorerRecord, replay_prefixes
from .vocab import BOS_ID, Vocabulary

log = logging.getLogger(__name__)


@dataclass
class GrowConfig:
    """Knobs shared by the growing and mixing builders.

    `epsilon` is the acceptance threshold charged per new parameter of a
    candidate context; `smoothing` is the mixing weight given to the raw
    scores (the remainder goes to the shorter history); `discount` is the
    Kneser-Ney absolute discount, estimated per order from count-of-counts
    when unset.
    """

    n_max: int
    epsilon: float = 0.1
    smoothing: float = 0.5
    discount: float | None = None
    target_size: int | None = None

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if not 0.0 < self.smoothing < 1.0:
            raise ValueError("smoothing factor must lie strictly between 0 and 1")
        if self.discount is not None and not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie strictly between 0 and 1")
        if self.target_size is not None and self.target_size < 1:
            raise ValueError("target_size must be positive")


# -- shared assembly ---------------------------------------------------------


def _assemble(
    vocab: Vocabulary,
    method: str,
    smoothing: float,
    unigram_scores: dict[int, float],
    level_scores: Callable[[Gram], dict[int, tuple[float, float]]],
    histories_by_order: dict[int, list[Gram]],
    n_max: int,
) -> BackoffModel:
    """Mix per-history scores into a prefix-closed back-off model.

    `unigram_scores` must sum to 1 over the tokens it covers;
    `level_scores(h)` returns ``word -> (mixing score, ranking mass)`` for a
    stored history. Probabilities follow the recursion
    ``p = smoothing * score + (1 - smoothing) * p(word | shorter history)``
    with a uniform base case, evaluated purely on explicit lower entries.
    """
    s = smoothing
    predictable = vocab.predictable_ids()
    uniform = 1.0 / len(predictable)
    dropped_bos = 0

    model = BackoffModel(vocab, n_max, method=method)
    probs: dict[Gram, float] = {}
    for w in predictable:
        p = s * unigram_scores.get(w, 0.0) + (1.0 - s) * uniform
        probs[(w,)] = p
    probs[(BOS_ID,)] = 1e-99

    real: dict[int, set[Gram]] = {1: set(probs)}
    masses: dict[Gram, float] = {}
    renormalized = 0
    for k in range(2, n_max + 1):
        real[k] = set()
        for h in histories_by_order.get(k, ()):
            local: dict[int, float] = {}
            for w, (score, mass) in level_scores(h).items():
                if w == BOS_ID:
                    dropped_bos += 1
                    continue
                lower = probs.get((*h[1:], w))
                if lower is None:
                    raise DataError(
                        f"table is not suffix-closed: {(*h[1:], w)} missing under {(*h, w)}")
                local[w] = s * score + (1.0 - s) * lower
                masses[(*h, w)] = mass
            if len(local) >= len(predictable):
                # The context covers every predictable token, so no back-off
                # path remains to absorb leftover mass; normalize in place.
                total = sum(local.values())
                local = {w: p / total for w, p in local.items()}
                renormalized += 1
            for w, p in local.items():
                gram = (*h, w)
                probs[gram] = p
                real[k].add(gram)
    if dropped_bos:
        log.info("dropped %d sentence-start continuation entries", dropped_bos)
    if renormalized:
        log.info("renormalized %d full-coverage contexts in place", renormalized)

    all_grams = _close_prefixes(probs, real, n_max)
    for k in range(1, n_max + 1):
        for g in sorted(all_grams.get(k, ())):
            model.add_gram(g, floor_log10(probs[g]), mass=masses.get(g))
    return model.finalize()


def _close_prefixes(probs: dict[Gram, float], real: dict[int, set[Gram]],
                    n_max: int) -> dict[int, set[Gram]]:
    """Restore prefix closure of a gram set.

    Missing prefixes are collected top-down and valued bottom-up at exactly
    their backed-off probability (provisional back-off weights computed from
    the real entries), which leaves every query and every context sum
    unchanged. Padding values are written into `probs`; the returned map
    holds the complete gram set per order.
    """
    all_grams: dict[int, set[Gram]] = {k: set(real.get(k, ())) for k in range(1, n_max + 1)}
    for k in range(n_max, 1, -1):
        lower = all_grams[k - 1]
        for g in all_grams[k]:
            lower.add(g[:-1])

    temp_bow: dict[Gram, float] = {}

    def eval_backoff(history: Gram, word: int) -> float:
        while True:
            p = probs.get((*history, word))
            if p is not None:
                return p
            if not history:
                raise KeyError(f"unigram entry missing for token {word}")
            factor = temp_bow.get(history)
            if factor is not None:
                return factor * eval_backoff(history[1:], word)
            history = history[1:]

    for k in range(2, n_max + 1):
        grams_k = all_grams[k]
        if not grams_k:
            continue
        children: dict[Gram, list[int]] = {}
        for g in real.get(k, ()):
            children.setdefault(g[:-1], []).append(g[-1])
        for ctx in {g[:-1] for g in grams_k}:
            kids = children.get(ctx, ())
            sum_hi = sum(probs[(*ctx, w)] for w in kids)
            sum_lo = sum(eval_backoff(ctx[1:], w) for w in kids)
            denom = 1.0 - sum_lo
            temp_bow[ctx] = (1.0 - sum_hi) / denom if denom > 1e-12 else 1.0
        for g in sorted(grams_k - real.get(k, set())):
            probs[g] = temp_bow[g[:-1]] * eval_backoff(g[1:-1], g[-1])
    return all_grams


# -- score-table builders ----------------------------------------------------


def build_backoff_ours(table: ScoreTable, config: GrowConfig) -> BackoffModel:
    """Back-off model from top-K restricted sums.

    Scores are the accumulated mass divided by the history's position count;
    the top-K deficit is deliberately not renormalized, so it flows into the
    back-off weights as missing probability mass.
    """
    if table.method != METHOD_OURS:
        raise ValueError("table was not built by the restricted-sum method")
    uni = table.continuations(())
    if not uni:
        raise DataError("score table has no unigram level; cannot build a model")
    total = sum(s for w, (s, _) in uni.items() if w != BOS_ID)
    unigram_scores = {w: s / total for w, (s, _) in uni.items() if w != BOS_ID}

    def level_scores(h: Gram) -> dict[int, tuple[float, float]]:
        c_h = table.context_positions(h)
        return {w: (s / c_h, s) for w, (s, _) in table.continuations(h).items()}

    histories = {k: sorted(table.histories(k)) for k in range(2, table.order + 1)}
    return _assemble(table.vocab, METHOD_OURS, config.smoothing,
                     unigram_scores, level_scores, histories, table.order)


def build_backoff_pc(table: ScoreTable, config: GrowConfig) -> BackoffModel:
    """Back-off model from probability-conversion means.

    Each history's means are divided by its stored normalizer; whenever the
    stored means exceed the normalizer (possible under the full-vector
    reading) the sum of means is used instead, which keeps every context
    normalizable.
    """
    if table.method != METHOD_PC:
        raise ValueError("table was not built by the probability-conversion method")
    uni = table.pc_means(())
    if not uni:
        raise DataError("score table has no unigram level; cannot build a model")
    total = sum(y for w, y in uni.items() if w != BOS_ID)
    unigram_scores = {w: y / total for w, y in uni.items() if w != BOS_ID}

    guarded = 0

    def level_scores(h: Gram) -> dict[int, tuple[float, float]]:
        nonlocal guarded
        means = table.pc_means(h)
        z = table.pc_normalizer(h)
        stored = sum(means.values())
        if stored > z:
            guarded += 1
            z = stored
        if z <= 0.0:
            log.warning("history %s has zero total mass; entries dropped", h)
            return {}
        sums = table.continuations(h)
        return {w: (y / z, sums[w][0]) for w, y in means.items()}

    histories = {k: sorted(table.histories(k)) for k in range(2, table.order + 1)}
    model = _assemble(table.vocab, METHOD_PC, config.smoothing,
                      unigram_scores, level_scores, histories, table.order)
    if guarded:
        log.info("normalizer guard engaged for %d histories", guarded)
    return model


# -- n-gram growing ----------------------------------------------------------


def _ml_ratios(entries: dict[int, tuple[float, float]] | dict[int, int]) -> dict[int, float]:
    def weight(v):
        return v[0] if isinstance(v, tuple) else v

    total = sum(weight(v) for v in entries.values())
    return {w: weight(v) / total for w, v in entries.items()}


def _gain(child_weights: dict[int, float], child_ratios: dict[int, float],
          parent_ratios: dict[int, float]) -> float:
    g = 0.0
    for w, weight in child_weights.items():
        g += weight * (math.log(child_ratios[w]) - math.log(parent_ratios[w]))
    return g


def _accumulate_level(
    records: Iterable[ScorerRecord],
    acc: ProbAccumulator,
    hist_len: int,
    parents: set[Gram] | None,
) -> None:
    """One stream pass, accumulating only histories of `hist_len` tokens
    whose one-token-shorter suffix is an accepted context."""
    for prefix, rec in replay_prefixes(records):
        length = len(prefix)
        if hist_len > length:
            continue
        h = tuple(prefix[length - hist_len:])
        if parents is not None and h[1:] not in parents:
            continue
        acc.add_position(h, [(rec.observed, rec.p_obs), *rec.topk])


def grow_approx(
    stream: Callable[[], Iterable[ScorerRecord]] | Sequence[ScorerRecord],
    config: GrowConfig,
    vocab: Vocabulary,
    expected_k: int | None = None,
) -> BackoffModel:
    """Grow a variable-order model from a top-K scorer stream.

    The stream is traversed once per order; candidate contexts are
    one-token extensions of the contexts accepted at the previous order and
    a candidate is kept when its data log-likelihood gain over its parent
    exceeds `epsilon` per distinct continuation. The accepted sums then feed
    :func:`build_backoff_ours`, so an `epsilon` of infinity yields a
    unigram-only model and 0 keeps every observed extension with any gain.
    """
    if callable(stream):
        fresh = stream
    elif isinstance(stream, Sequence):
        def fresh():
            return iter(stream)
    else:
        raise TypeError("stream must be re-iterable: pass a sequence or a factory")

    acc = ProbAccumulator(vocab, config.n_max)
    _accumulate_level(fresh(), acc, 0, None)
    if not acc.histories():
        raise DataError("empty scorer stream")
    accepted: set[Gram] = {()}

    for k in range(2, config.n_max + 1):
        hist_len = k - 1
        level = ProbAccumulator(vocab, config.n_max)
        _accumulate_level(fresh(), level, hist_len, accepted)
        kept: list[Gram] = []
        for h in sorted(level.histories(k)):
            entries = level.continuations(h)
            parent_entries = acc.continuations(h[1:])
            gain = _gain({w: s for w, (s, _) in entries.items()},
                         _ml_ratios(entries), _ml_ratios(parent_entries))
            if gain > config.epsilon * len(entries):
                kept.append(h)
        if not kept:
            log.info("order %d: no contexts accepted, growing stops", k)
            break
        log.info("order %d: accepted %d of %d candidate contexts",
                 k, len(kept), len(level.histories(k)))
        keep_set = set(kept)
        pruned = ProbAccumulator(vocab, config.n_max)
        for h in kept:
            for w, (s, n) in level.continuations(h).items():
                cell = pruned._entries.setdefault(h, {})
                cell[w] = [s, n]
            pruned._contexts[h] = [level.context_positions(h),
                                   level.context_vector_mass(h)]
        acc.merge_from(pruned)
        accepted = keep_set

    acc.seal()
    table = ScoreTable(METHOD_OURS, config.n_max, acc, k=expected_k)
    return _apply_size_budget(build_backoff_ours(table, config), config)


def grow_kn(counts: CountTrie, config: GrowConfig) -> BackoffModel:
    """Variable-order interpolated Kneser-Ney baseline.

    Contexts are admitted by the same gain rule as the neural growing, with
    raw counts as weights. Probabilities use absolute discounting with
    interpolation against the shorter history and continuation counts at
    the unigram level.
    """
    if counts.n_max < config.n_max:
        raise ValueError(f"counts cover order {counts.n_max}, config wants {config.n_max}")
    vocab = counts.vocab
    n_max = config.n_max

    accepted: set[Gram] = {()}
    by_level: dict[int, list[Gram]] = {1: [()]}
    for k in range(2, n_max + 1):
        kept = []
        for h in sorted(counts.histories(k)):
            if h[1:] not in accepted:
                continue
            entries = counts.continuations(h)
            parent_entries = counts.continuations(h[1:])
            gain = _gain({w: float(c) for w, c in entries.items()},
                         _ml_ratios(entries), _ml_ratios(parent_entries))
            if gain > config.epsilon * len(entries):
                kept.append(h)
        if not kept:
            break
        accepted.update(kept)
        by_level[k] = kept

    # Unigram level: continuation counts when bigrams exist, raw otherwise.
    predictable = set(vocab.predictable_ids())
    unigram_scores: dict[int, float] = {}
    if counts.n_max >= 2:
        cont: dict[int, int] = {}
        types = 0
        for _h, w, _c in counts.grams(2):
            cont[w] = cont.get(w, 0) + 1
            types += 1
        unigram_scores = {w: c / types for w, c in cont.items() if w in predictable}
    else:
        total = counts.total_unigrams()
        for _h, w, c in counts.grams(1):
            if w in predictable:
                unigram_scores[w] = c / total
    if not unigram_scores:
        raise DataError("empty corpus: no unigram statistics")

    discounts = {k: config.discount if config.discount is not None else _estimate_discount(counts, k)
                 for k in range(2, n_max + 1)}

    model = BackoffModel(vocab, n_max, method="kn")
    probs: dict[Gram, float] = {}
    uniform_floor = 1e-99
    for w in sorted(predictable):
        probs[(w,)] = unigram_scores.get(w, uniform_floor)
    probs[(BOS_ID,)] = uniform_floor
    masses: dict[Gram, float] = {}
    real: dict[int, set[Gram]] = {1: set(probs)}
    for k in range(2, n_max + 1):
        real[k] = set()
        d = discounts[k]
        for h in by_level.get(k, ()):
            tot = counts.history_total(h)
            n_types = len(counts.continuations(h))
            lam = d * n_types / tot
            for w, c in counts.continuations(h).items():
                gram = (*h, w)
                probs[gram] = max(c - d, 0.0) / tot + lam * probs[(*h[1:], w)]
                masses[gram] = float(c)
                real[k].add(gram)

    all_grams = _close_prefixes(probs, real, n_max)
    for k in range(1, n_max + 1):
        for g in sorted(all_grams.get(k, ())):
            model.add_gram(g, floor_log10(probs[g]), mass=masses.get(g))
    return _apply_size_budget(model.finalize(), config)


def _apply_size_budget(model: BackoffModel, config: GrowConfig) -> BackoffModel:
    """Enforce config.target_size at the model's top order, if set."""
    if config.target_size is None:
        return model
    top = model.top_order()
    if top <= 1 or model.order_size(top) <= config.target_size:
        return model
    return prune_to_size(model, config.target_size, top)


def _estimate_discount(counts: CountTrie, order: int) -> float:
    """Count-of-counts discount n1 / (n1 + 2 n2), clamped inside (0, 1)."""
    n1 = n2 = 0
    for _h, _w, c in counts.grams(order):
        if c == 1:
            n1 += 1
        elif c == 2:
            n2 += 1
    if n1 == 0:
        return 0.5
    return min(max(n1 / (n1 + 2.0 * n2), 1e-3), 1.0 - 1e-3)


# -- pruning -----------------------------------------------------------------


def prune_to_size(model: BackoffModel, target: int, order: int) -> BackoffModel:
    """Keep the `target` highest-mass grams at `order`, dropping the rest
    along with every higher-order gram they prefix; back-off weights are
    recomputed so the result stays normalized."""
    if order < 1 or order > model.max_order:
        raise ValueError(f"order {order} outside the model's range")
    current = model.order_size(order)
    if order == 1:
        if target != current:
            raise ValueError("the unigram level cannot be pruned")
        return model
    if target < 0 or target > current:
        raise ValueError(f"target {target} outside 0..{current}")
    if target == current:
        return model

    ranked = sorted(model.grams(order), key=lambda g: (-model.mass(g), g))
    dropped: set[Gram] = set(ranked[target:])
    out = model.unfreeze()
    for g in sorted(dropped):
        out.remove_gram(g)
    previous = dropped
    for m in range(order + 1, model.max_order + 1):
        cascade = {g for g in out.grams(m) if g[:-1] in previous}
        for g in sorted(cascade):
            out.remove_gram(g)
        previous = cascade
    return out.finalize()
