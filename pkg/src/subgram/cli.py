"""Pipeline driver: every stage of the toolkit as a subcommand.

The whole workflow is scriptable end to end::

    subgram segment    --input text.txt --output corpus.txt --scheme right
    subgram count      --corpus corpus.txt --n-max 5 --output counts.bin --vocab vocab.txt
    subgram train-rnn  --corpus corpus.txt --vocab vocab.txt --output rnn.bin
    subgram emit-stream --corpus corpus.txt --vocab vocab.txt --model rnn.bin --k 3 --output s.bin
    subgram grow-rnnv  --stream s.bin --vocab vocab.txt --n-max 6 --epsilon 0.1 --arpa rnnv.arpa
    subgram grow-kn    --counts counts.bin --vocab vocab.txt --n-max 5 --arpa knv.arpa
    subgram interpolate --lambda 0.5 knv.arpa rnnv.arpa --output mix.arpa
    subgram eval-mtwv  --detections det.txt --references ref.txt --output report.tsv

Options read defaults from a flat ``key=value`` config file (``--config`` or
the ``SUBGRAM_CONFIG`` environment variable); explicit flags win. Every
command records a ``*.manifest.json`` with config and input/output hashes,
and identical configuration plus identical inputs reproduce identical bytes.

Exit codes: 0 ok, 2 usage, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .approx import NORMALIZER_FULL, NORMALIZER_STRICT, METHOD_OURS, ScoreTable, ours_scores, pc_scores
from .backoff import BackoffModel, InterpolationSpec, interpolate, perplexity, read_arpa, validate_normalization, write_arpa
from .builder import GrowConfig, build_backoff_ours, build_backoff_pc, grow_approx, grow_kn, prune_to_size
from .counts import CountTrie, count_ngrams
from .errors import DataError, NumericalError
from .kws import (
    DEFAULT_BETA,
    DEFAULT_TOLERANCE,
    Detection,
    DetectionSet,
    evaluate,
    read_detections,
    read_references,
    sweep_report,
)
from .manifest import verify_run_dir, write_manifest
from .rnn import RnnConfig, load_params, save_params, train_rnn
from .segmentation import (
    MarkingScheme,
    read_corpus,
    read_keyword_list,
    read_segmentation_map,
    segment_sentence,
    length_stats,
    write_corpus,
)
from .stream import StreamReader, emit_scorer_stream, write_stream
from .vocab import Vocabulary, read_vocab, vocab_from_sentences, write_vocab

log = logging.getLogger("subgram")

CONFIG_ENV = "SUBGRAM_CONFIG"


def _load_config(path: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


class _ConfigDefaults:
    """Injects config-file values as argparse defaults (flags still win)."""

    _BOOL = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}

    def __init__(self, cfg: dict[str, str]):
        self.cfg = cfg

    def get(self, key: str, fallback, conv=str):
        raw = self.cfg.get(key)
        if raw is None:
            return fallback
        if conv is bool:
            try:
                return self._BOOL[raw.lower()]
            except KeyError:
                raise DataError(f"config key {key}: boolean expected, got {raw!r}") from None
        try:
            return conv(raw)
        except ValueError:
            raise DataError(f"config key {key}: cannot parse {raw!r}") from None

    def required(self, key: str) -> bool:
        return key not in self.cfg


def _scheme(args) -> MarkingScheme:
    return MarkingScheme(args.scheme, args.marker)


def _read_ids(corpus_path: str, vocab: Vocabulary) -> list[list[int]]:
    return [vocab.encode(s) for s in read_corpus(corpus_path)]


def _manifest_config(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _open_stream(path: str, vocab: Vocabulary):
    f = open(path, "rb")
    return f, StreamReader(f, vocab)


# -- commands ---------------------------------------------------------------


def cmd_segment(args) -> int:
    scheme = _scheme(args)
    smap = read_segmentation_map(args.map) if args.map else None
    sentences = []
    with open(args.input, encoding="utf-8") as f:
        for line in f:
            words = line.split()
            if words:
                sentences.append(segment_sentence(words, scheme, smap))
    write_corpus(args.output, sentences)
    log.info("segmented %d sentences", len(sentences))
    inputs = [args.input] + ([args.map] if args.map else [])
    write_manifest(args.output, "segment", _manifest_config(args), inputs, [args.output])
    return 0


def cmd_count(args) -> int:
    sentences = read_corpus(args.corpus)
    vocab = vocab_from_sentences(sentences)
    write_vocab(args.vocab, vocab)
    trie = count_ngrams([vocab.encode(s) for s in sentences], vocab, args.n_max).seal()
    with open(args.output, "wb") as f:
        trie.save(f)
    for k in range(1, args.n_max + 1):
        log.info("order %d: %d distinct grams", k, trie.order_size(k))
    write_manifest(args.output, "count", _manifest_config(args),
                   [args.corpus], [args.output, args.vocab])
    return 0


def cmd_train_rnn(args) -> int:
    vocab = read_vocab(args.vocab)
    ids = _read_ids(args.corpus, vocab)
    config = RnnConfig(embed_dim=args.embed_dim, hidden_dim=args.hidden_dim,
                       epochs=args.epochs, learning_rate=args.learning_rate,
                       lr_decay=args.lr_decay, clip_norm=args.clip_norm, seed=args.seed)
    params = train_rnn(ids, vocab, config)
    with open(args.output, "wb") as f:
        save_params(f, params, vocab)
    log.info("trained %d-dim/%d-dim model for %d epochs",
             args.embed_dim, args.hidden_dim, args.epochs)
    write_manifest(args.output, "train-rnn", _manifest_config(args),
                   [args.corpus, args.vocab], [args.output])
    return 0


def cmd_emit_stream(args) -> int:
    vocab = read_vocab(args.vocab)
    with open(args.model, "rb") as f:
        params = load_params(f, vocab)
    ids = _read_ids(args.corpus, vocab)
    records = emit_scorer_stream(params, ids, args.k, args.full_vectors)
    with open(args.output, "wb") as f:
        n = write_stream(f, records, vocab, args.k, args.full_vectors)
    log.info("emitted %d records (k=%d, full_vectors=%s)", n, args.k, args.full_vectors)
    write_manifest(args.output, "emit-stream", _manifest_config(args),
                   [args.corpus, args.vocab, args.model], [args.output])
    return 0


def _emit_model(args, model: BackoffModel, outputs: list[str]) -> None:
    if args.prune_target is not None:
        order = args.prune_order if args.prune_order else model.top_order()
        model = prune_to_size(model, args.prune_target, order)
        log.info("pruned order %d to %d grams", order, args.prune_target)
    with open(args.arpa, "w", encoding="utf-8") as f:
        write_arpa(model, f)
    outputs.append(args.arpa)
    log.info("model sizes: %s", model.stats())


def cmd_approx_pc(args) -> int:
    vocab = read_vocab(args.vocab)
    counts = None
    if args.counts:
        with open(args.counts, "rb") as f:
            counts = CountTrie.load(f, vocab)
    f, reader = _open_stream(args.stream, vocab)
    with f:
        table = pc_scores(iter(reader), counts, args.order, vocab, normalizer=args.normalizer)
    with open(args.table, "wb") as out:
        table.save(out)
    outputs = [args.table]
    if args.arpa:
        config = GrowConfig(n_max=args.order, smoothing=args.smoothing)
        _emit_model(args, build_backoff_pc(table, config), outputs)
    inputs = [args.stream, args.vocab] + ([args.counts] if args.counts else [])
    write_manifest(args.table, "approx-pc", _manifest_config(args), inputs, outputs)
    return 0


def cmd_approx_ours(args) -> int:
    vocab = read_vocab(args.vocab)
    f, reader = _open_stream(args.stream, vocab)
    with f:
        table = ours_scores(iter(reader), args.order, vocab, expected_k=reader.k)
    with open(args.table, "wb") as out:
        table.save(out)
    outputs = [args.table]
    if args.arpa:
        config = GrowConfig(n_max=args.order, smoothing=args.smoothing)
        _emit_model(args, build_backoff_ours(table, config), outputs)
    write_manifest(args.table, "approx-ours", _manifest_config(args),
                   [args.stream, args.vocab], outputs)
    return 0


def cmd_grow_rnnv(args) -> int:
    vocab = read_vocab(args.vocab)
    with open(args.stream, "rb") as f:
        k = StreamReader(f, vocab).k

    def fresh():
        with open(args.stream, "rb") as f:
            yield from StreamReader(f, vocab)

    config = GrowConfig(n_max=args.n_max, epsilon=args.epsilon,
                        smoothing=args.smoothing)
    model = grow_approx(fresh, config, vocab, expected_k=k)
    outputs: list[str] = []
    _emit_model(args, model, outputs)
    write_manifest(args.arpa, "grow-rnnv", _manifest_config(args),
                   [args.stream, args.vocab], outputs)
    return 0


def cmd_grow_kn(args) -> int:
    vocab = read_vocab(args.vocab)
    with open(args.counts, "rb") as f:
        counts = CountTrie.load(f, vocab)
    config = GrowConfig(n_max=args.n_max, epsilon=args.epsilon, discount=args.discount)
    model = grow_kn(counts, config)
    outputs: list[str] = []
    _emit_model(args, model, outputs)
    inputs = [args.counts, args.vocab]
    if args.heldout:
        ppl = perplexity(model, read_corpus(args.heldout))
        print(f"perplexity\theldout\t{ppl:.4f}")
        inputs.append(args.heldout)
    write_manifest(args.arpa, "grow-kn", _manifest_config(args), inputs, outputs)
    return 0


def cmd_prune(args) -> int:
    with open(args.input, encoding="utf-8") as f:
        model = read_arpa(f)
    pruned = prune_to_size(model, args.target, args.order)
    with open(args.output, "w", encoding="utf-8") as f:
        write_arpa(pruned, f)
    log.info("model sizes: %s", pruned.stats())
    write_manifest(args.output, "prune", _manifest_config(args), [args.input], [args.output])
    return 0


def cmd_interpolate(args) -> int:
    with open(args.model_a, encoding="utf-8") as f:
        a = read_arpa(f, method="a")
    with open(args.model_b, encoding="utf-8") as f:
        b = read_arpa(f, method="b")
    mixed = interpolate(a, b, InterpolationSpec(args.lam))
    with open(args.output, "w", encoding="utf-8") as f:
        write_arpa(mixed, f)
    log.info("model sizes: %s", mixed.stats())
    write_manifest(args.output, "interpolate", _manifest_config(args),
                   [args.model_a, args.model_b], [args.output])
    return 0


def cmd_arpa(args) -> int:
    if args.arpa_action == "read":
        with open(args.input, encoding="utf-8") as f:
            model = read_arpa(f)
        for line, n in model.stats().items():
            print(f"{line}={n}")
        outputs = []
        if args.snapshot:
            with open(args.snapshot, "wb") as f:
                model.save(f)
            outputs.append(args.snapshot)
        if args.ppl_corpus:
            ppl = perplexity(model, read_corpus(args.ppl_corpus))
            label = "proper" if args.proper else "advisory"
            print(f"perplexity\t{label}\t{ppl:.4f}")
        if outputs:
            write_manifest(args.snapshot, "arpa-read", _manifest_config(args),
                           [args.input], outputs)
        return 0
    if args.arpa_action == "write":
        if bool(args.table) == bool(args.snapshot):
            raise DataError("pass exactly one of --table or --snapshot")
        if args.table:
            if not args.vocab:
                raise DataError("--table requires --vocab")
            vocab = read_vocab(args.vocab)
            with open(args.table, "rb") as f:
                table = ScoreTable.load(f, vocab)
            config = GrowConfig(n_max=table.order, smoothing=args.smoothing)
            build = build_backoff_ours if table.method == METHOD_OURS else build_backoff_pc
            model = build(table, config)
            inputs = [args.table, args.vocab]
        else:
            with open(args.snapshot, "rb") as f:
                model = BackoffModel.load(f)
            inputs = [args.snapshot]
        with open(args.output, "w", encoding="utf-8") as f:
            write_arpa(model, f)
        write_manifest(args.output, "arpa-write", _manifest_config(args),
                       inputs, [args.output])
        return 0
    # validate
    with open(args.input, encoding="utf-8") as f:
        model = read_arpa(f)
    report = validate_normalization(model)
    print(f"contexts\t{report.contexts_checked}")
    print(f"max_deviation\t{report.max_deviation:.3e}")
    worst = " ".join(model.vocab.token(t) for t in report.worst_context) or "<root>"
    print(f"worst_context\t{worst}")
    if not report.ok:
        raise NumericalError(f"normalization off by {report.max_deviation:.3e}")
    return 0


def cmd_eval_mtwv(args) -> int:
    dets = read_detections(args.detections)
    refs = read_references(args.references)
    result = evaluate(dets, refs, beta=args.beta, tol=args.tol)
    report = sweep_report([(args.label, result)])
    with open(args.output, "w", encoding="utf-8") as f:
        f.write(report)
    sys.stdout.write(report)
    outputs = [args.output]
    if args.per_keyword:
        with open(args.per_keyword, "w", encoding="utf-8") as f:
            f.write("keyword\tp_miss\tp_fa\n")
            for kw in sorted(result.per_keyword):
                p_miss, p_fa = result.per_keyword[kw]
                f.write(f"{kw}\t{p_miss:.4f}\t{p_fa:.6e}\n")
        outputs.append(args.per_keyword)
    write_manifest(args.output, "eval-mtwv", _manifest_config(args),
                   [args.detections, args.references], outputs)
    return 0


def _keyword_logprobs(model: BackoffModel, keywords: dict[str, list[str]],
                      scheme: MarkingScheme, smap) -> dict[str, float]:
    """Mean log10 model probability per subword of each keyword."""
    out = {}
    for kwid, words in keywords.items():
        subwords = segment_sentence(words, scheme, smap)
        total = 0.0
        history: list[str] = []
        for t in subwords:
            total += model.query_tokens(history, t)
            history.append(t)
        out[kwid] = total / len(subwords)
    return out


def _rescore(dets: DetectionSet, model: BackoffModel, keywords: dict[str, list[str]],
             scheme: MarkingScheme, smap, weight: float) -> DetectionSet:
    """Shift detection scores by the model's keyword likelihood.

    This is the desk-scale stand-in for swapping the language model of a
    first-pass decoder: confidences move with how plausible each keyword's
    subword sequence is under the new model.
    """
    logprobs = _keyword_logprobs(model, keywords, scheme, smap)
    rescored = []
    for d in dets.detections:
        shift = logprobs.get(d.keyword)
        if shift is None:
            log.warning("detection keyword %s missing from the keyword list", d.keyword)
            shift = 0.0
        rescored.append(Detection(d.keyword, d.tbeg, d.dur, d.score + weight * shift))
    return DetectionSet(rescored)


def _sweep_eval(args, model: BackoffModel, label: str, rows, keywords, scheme, smap) -> None:
    dets = read_detections(args.detections)
    refs = read_references(args.references)
    rescored = _rescore(dets, model, keywords, scheme, smap, args.rescore_weight)
    result = evaluate(rescored, refs, beta=args.beta, tol=args.tol)
    rows.append((label, result))
    log.info("%s: mtwv=%.4f recall=%.4f sizes=%s",
             label, result.mtwv, result.recall, model.stats())


def cmd_sweep(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    scheme = _scheme(args)
    smap = read_segmentation_map(args.map) if args.map else None
    keywords = read_keyword_list(args.keywords)
    rows: list = []
    inputs = [args.detections, args.references, args.keywords]
    outputs: list[str] = []

    if args.sweep_what in ("k", "n"):
        vocab = read_vocab(args.vocab)
        with open(args.model, "rb") as f:
            params = load_params(f, vocab)
        ids = _read_ids(args.corpus, vocab)
        inputs += [args.vocab, args.model, args.corpus]
        if args.sweep_what == "k":
            for k in range(args.start, args.stop + 1):
                records = list(emit_scorer_stream(params, ids, k))
                config = GrowConfig(n_max=args.n_max, epsilon=args.epsilon,
                                    smoothing=args.smoothing)
                model = grow_approx(records, config, vocab, expected_k=k)
                path = os.path.join(args.out_dir, f"rnnv_k{k}.arpa")
                with open(path, "w", encoding="utf-8") as f:
                    write_arpa(model, f)
                outputs.append(path)
                _sweep_eval(args, model, f"K={k}", rows, keywords, scheme, smap)
        else:
            records = list(emit_scorer_stream(params, ids, args.k))
            for n in range(args.start, args.stop + 1, args.step_n):
                config = GrowConfig(n_max=n, epsilon=args.epsilon,
                                    smoothing=args.smoothing)
                model = grow_approx(records, config, vocab, expected_k=args.k)
                path = os.path.join(args.out_dir, f"rnnv_n{n}.arpa")
                with open(path, "w", encoding="utf-8") as f:
                    write_arpa(model, f)
                outputs.append(path)
                _sweep_eval(args, model, f"n={n}", rows, keywords, scheme, smap)
    else:  # lambda
        with open(args.model_a, encoding="utf-8") as f:
            a = read_arpa(f, method="a")
        with open(args.model_b, encoding="utf-8") as f:
            b = read_arpa(f, method="b")
        inputs += [args.model_a, args.model_b]
        steps = int(round((args.stop_f - args.start_f) / args.step_f))
        for i in range(steps + 1):
            lam = min(args.start_f + i * args.step_f, args.stop_f)
            mixed = interpolate(a, b, InterpolationSpec(lam))
            path = os.path.join(args.out_dir, f"interp_l{int(round(lam * 100)):03d}.arpa")
            with open(path, "w", encoding="utf-8") as f:
                write_arpa(mixed, f)
            outputs.append(path)
            _sweep_eval(args, mixed, f"lambda={lam:.2f}", rows, keywords, scheme, smap)

    report_path = os.path.join(args.out_dir, f"report_{args.sweep_what}.tsv")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(sweep_report(rows))
    outputs.append(report_path)
    write_manifest(report_path, f"sweep-{args.sweep_what}", _manifest_config(args),
                   inputs, outputs)
    return 0


def cmd_stats_lengths(args) -> int:
    scheme = _scheme(args)
    sentences = read_corpus(args.corpus)
    with open(args.words, encoding="utf-8") as f:
        words = {line.strip() for line in f if line.strip()}
    stats = length_stats(sentences, words, scheme)
    lines = (f"occurrences\t{stats.occurrences}\n"
             f"subwords\t{stats.subwords}\n"
             f"mean_length\t{stats.mean:.4f}\n")
    sys.stdout.write(lines)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(lines)
        write_manifest(args.output, "stats-lengths", _manifest_config(args),
                       [args.corpus, args.words], [args.output])
    return 0


def cmd_verify_manifest(args) -> int:
    reports = verify_run_dir(args.run_dir)
    bad = 0
    for path, rep in reports.items():
        status = "ok" if rep.ok else "mismatch"
        print(f"{status}\t{path}\t{rep.checked} files")
        for p in rep.missing:
            print(f"missing\t{p}")
        for p in rep.changed:
            print(f"changed\t{p}")
        bad += 0 if rep.ok else 1
    if bad:
        raise DataError(f"{bad} manifest(s) out of date")
    return 0


# -- parser -----------------------------------------------------------------


def _build_parser(cfg: _ConfigDefaults) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subgram",
        description="Subword n-gram LM toolkit: neural approximation, growing, ARPA, KWS scoring")
    parser.add_argument("--version", action="version", version=f"subgram {__version__}")
    parser.add_argument("--config", default=None, help="key=value defaults file")
    parser.add_argument("--quiet", action="store_true", help="only warnings on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def opt(p, key, fallback, conv=str, **kwargs):
        p.add_argument(f"--{key}", type=conv, dest=key.replace("-", "_"),
                       default=cfg.get(key, fallback, conv), **kwargs)

    def req(p, key, conv=str, **kwargs):
        p.add_argument(f"--{key}", type=conv, dest=key.replace("-", "_"),
                       required=cfg.required(key),
                       default=cfg.get(key, None, conv), **kwargs)

    def flag(p, key, **kwargs):
        p.add_argument(f"--{key}", action="store_true", dest=key.replace("-", "_"),
                       default=cfg.get(key, False, bool), **kwargs)

    def scheme_opts(p):
        opt(p, "scheme", "right", str, choices=["right", "both"], help="marking scheme")
        opt(p, "marker", "+", str, help="boundary marker character")
        opt(p, "map", None, str, help="optional word segmentation map (word<TAB>units)")

    p = sub.add_parser("segment", help="segment raw text into marked subwords")
    req(p, "input", help="raw text, one sentence per line")
    req(p, "output", help="segmented corpus file")
    scheme_opts(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("count", help="count n-grams and write the vocabulary")
    req(p, "corpus")
    opt(p, "n-max", 5, int)
    req(p, "output", help="binary counts snapshot")
    req(p, "vocab", help="vocabulary file to write")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("train-rnn", help="train the recurrent scorer")
    req(p, "corpus")
    req(p, "vocab")
    req(p, "output", help="model checkpoint")
    opt(p, "embed-dim", 16, int)
    opt(p, "hidden-dim", 32, int)
    opt(p, "epochs", 10, int)
    opt(p, "learning-rate", 0.1, float)
    opt(p, "lr-decay", 0.0, float)
    opt(p, "clip-norm", 5.0, float)
    opt(p, "seed", 0, int)
    p.set_defaults(func=cmd_train_rnn)

    p = sub.add_parser("emit-stream", help="emit a scorer stream over a corpus")
    req(p, "corpus")
    req(p, "vocab")
    req(p, "model", help="rnn checkpoint")
    opt(p, "k", 3, int)
    flag(p, "full-vectors", help="embed whole output distributions")
    req(p, "output")
    p.set_defaults(func=cmd_emit_stream)

    def model_out_opts(p, with_arpa=True):
        if with_arpa:
            opt(p, "arpa", None, str, help="also build and write the back-off model")
        opt(p, "smoothing", 0.5, float, help="raw-score mixing weight")
        opt(p, "prune-target", None, int, help="prune to this many grams before writing")
        opt(p, "prune-order", None, int, help="order to prune (default: top order)")

    p = sub.add_parser("approx-pc", help="probability-conversion score table")
    req(p, "stream")
    req(p, "vocab")
    opt(p, "counts", None, str, help="counts snapshot for cross-checking")
    opt(p, "order", 5, int)
    opt(p, "normalizer", NORMALIZER_FULL, str,
        choices=[NORMALIZER_FULL, NORMALIZER_STRICT])
    req(p, "table", help="score table output")
    model_out_opts(p)
    p.set_defaults(func=cmd_approx_pc)

    p = sub.add_parser("approx-ours", help="top-K restricted score table")
    req(p, "stream")
    req(p, "vocab")
    opt(p, "order", 5, int)
    req(p, "table")
    model_out_opts(p)
    p.set_defaults(func=cmd_approx_ours)

    p = sub.add_parser("grow-rnnv", help="grow a variable-order approximation")
    req(p, "stream")
    req(p, "vocab")
    opt(p, "n-max", 5, int)
    opt(p, "epsilon", 0.1, float)
    req(p, "arpa")
    model_out_opts(p, with_arpa=False)
    p.set_defaults(func=cmd_grow_rnnv)

    p = sub.add_parser("grow-kn", help="grow the Kneser-Ney baseline")
    req(p, "counts")
    req(p, "vocab")
    opt(p, "n-max", 5, int)
    opt(p, "epsilon", 0.1, float)
    opt(p, "discount", None, float, help="absolute discount (default: count-of-counts)")
    opt(p, "heldout", None, str, help="held-out corpus for perplexity")
    req(p, "arpa")
    opt(p, "prune-target", None, int)
    opt(p, "prune-order", None, int)
    p.set_defaults(func=cmd_grow_kn)

    p = sub.add_parser("prune", help="prune an ARPA model to a size budget")
    req(p, "input")
    req(p, "order", int)
    req(p, "target", int)
    req(p, "output")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("interpolate", help="statically interpolate two ARPA models")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--lambda", dest="lam", type=float,
                   default=cfg.get("lambda", 0.5, float),
                   help="weight of the first model")
    req(p, "output")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("arpa", help="read, write or validate ARPA files")
    asub = p.add_subparsers(dest="arpa_action", required=True)
    pa = asub.add_parser("read", help="parse a model; print statistics")
    req(pa, "input")
    opt(pa, "snapshot", None, str, help="also write a binary model snapshot")
    opt(pa, "ppl-corpus", None, str)
    flag(pa, "proper", help="label the perplexity as proper instead of advisory")
    pa.set_defaults(func=cmd_arpa)
    pa = asub.add_parser("write", help="write ARPA from a table or model snapshot")
    opt(pa, "table", None, str, help="score table snapshot to build from")
    opt(pa, "snapshot", None, str, help="binary model snapshot to convert")
    opt(pa, "vocab", None, str, help="vocabulary file (needed with --table)")
    opt(pa, "smoothing", 0.5, float)
    req(pa, "output")
    pa.set_defaults(func=cmd_arpa)
    pa = asub.add_parser("validate", help="check per-context normalization")
    req(pa, "input")
    pa.set_defaults(func=cmd_arpa)

    p = sub.add_parser("eval-mtwv", help="score a detection list against references")
    req(p, "detections")
    req(p, "references")
    opt(p, "beta", DEFAULT_BETA, float)
    opt(p, "tol", DEFAULT_TOLERANCE, float)
    opt(p, "label", "eval", str)
    req(p, "output", help="tab-separated report")
    opt(p, "per-keyword", None, str,
        help="write per-keyword miss/false-alarm rates at the best threshold")
    p.set_defaults(func=cmd_eval_mtwv)

    p = sub.add_parser("sweep", help="parameter sweeps with per-point reports")
    ssub = p.add_subparsers(dest="sweep_what", required=True)

    def eval_opts(p):
        req(p, "detections")
        req(p, "references")
        req(p, "keywords", help="kwid + word-sequence list")
        scheme_opts(p)
        opt(p, "rescore-weight", 1.0, float,
            help="weight of the model keyword likelihood in detection scores")
        opt(p, "beta", DEFAULT_BETA, float)
        opt(p, "tol", DEFAULT_TOLERANCE, float)
        req(p, "out-dir")

    ps = ssub.add_parser("k", help="vary the top-K width")
    req(ps, "corpus")
    req(ps, "vocab")
    req(ps, "model")
    ps.add_argument("--from", dest="start", type=int, default=cfg.get("from", 1, int))
    ps.add_argument("--to", dest="stop", type=int, default=cfg.get("to", 6, int))
    opt(ps, "n-max", 5, int)
    opt(ps, "epsilon", 0.1, float)
    opt(ps, "smoothing", 0.5, float)
    eval_opts(ps)
    ps.set_defaults(func=cmd_sweep)

    ps = ssub.add_parser("n", help="vary the maximum context size")
    req(ps, "corpus")
    req(ps, "vocab")
    req(ps, "model")
    ps.add_argument("--from", dest="start", type=int, default=cfg.get("from", 5, int))
    ps.add_argument("--to", dest="stop", type=int, default=cfg.get("to", 23, int))
    opt(ps, "step-n", 1, int)
    opt(ps, "k", 3, int)
    opt(ps, "epsilon", 0.1, float)
    opt(ps, "smoothing", 0.5, float)
    eval_opts(ps)
    ps.set_defaults(func=cmd_sweep)

    ps = ssub.add_parser("lambda", help="vary the interpolation weight")
    req(ps, "model-a")
    req(ps, "model-b")
    ps.add_argument("--from", dest="start_f", type=float, default=cfg.get("from", 0.0, float))
    ps.add_argument("--to", dest="stop_f", type=float, default=cfg.get("to", 1.0, float))
    ps.add_argument("--step", dest="step_f", type=float, default=cfg.get("step", 0.25, float))
    eval_opts(ps)
    ps.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats-lengths", help="mean subwords per word occurrence")
    req(p, "corpus", help="segmented corpus")
    req(p, "words", help="word list, one per line")
    scheme_opts(p)
    opt(p, "output", None, str, help="also write the statistics to a file")
    p.set_defaults(func=cmd_stats_lengths)

    p = sub.add_parser("verify-manifest", help="recheck recorded artifact hashes")
    req(p, "run-dir")
    p.set_defaults(func=cmd_verify_manifest)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=os.environ.get(CONFIG_ENV))
    known, _ = pre.parse_known_args(argv)
    try:
        cfg = _ConfigDefaults(_load_config(known.config) if known.config else {})
        parser = _build_parser(cfg)
        args = parser.parse_args(argv)
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.WARNING if args.quiet else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except NumericalError as e:
        print(f"subgram-error\tnumerical\t{e}", file=sys.stderr)
        return 4
    except (DataError, OSError, ValueError, KeyError, EOFError) as e:
        print(f"subgram-error\tdata\t{e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
