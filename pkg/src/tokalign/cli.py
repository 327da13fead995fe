"""Command-line entry point.

Subcommands: ``align`` (masked or plain completion over prompt files),
``gen-dataset`` (partial-token scenario datasets), ``eval`` (paired
with/without-alignment scoring), ``bench`` (lookup latency and
alignment-step statistics), ``vocab train`` / ``vocab inspect``.

All byte-carrying I/O is JSONL with base64 fields so non-UTF-8 prompts
survive end to end.  Paths may use ``bundled:<name>`` to reach the
packaged fixtures (code, prose, demo-vocab, demo-table).

Exit codes: 0 success, 1 usage, 2 data error, 3 dead end under the
``error`` fallback policy.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys

import numpy as np

from . import align as align_mod
from . import bench as bench_mod
from . import fixtures, metrics, scenarios
from .decoding import SamplerConfig, ScriptedModel, build_ngram_model, generate
from .trie import MaskCache, build_trie, load_trie, save_trie
from .vocab import (
    PretokenizeOptions,
    Vocabulary,
    load_vocabulary,
    save_vocabulary,
    train_tiny_bpe,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEAD_END = 3


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve(path: str) -> str:
    if path.startswith("bundled:"):
        return fixtures.resolve_bundled(path)
    return path


def _escape_bytes(text: str) -> bytes:
    # allow \n, \t, \xNN escapes in flag values
    return text.encode("utf-8").decode("unicode_escape").encode("latin-1")


def _load_provider(args, vocab: Vocabulary):
    spec = args.provider
    if spec is None:
        raise ValueError("a --provider is required (scripted:<table.json> or ngram:<corpus>)")
    if spec.startswith("scripted:"):
        with open(_resolve(spec[len("scripted:"):]), "r", encoding="utf-8") as fh:
            return ScriptedModel.from_json_dict(vocab, json.load(fh))
    if spec.startswith("ngram:"):
        path = _resolve(spec[len("ngram:"):])
        if path.endswith(".jsonl"):
            docs = [text for _, text in scenarios.load_corpus(path)]
        else:
            with open(path, "rb") as fh:
                docs = [fh.read()]
        return build_ngram_model(docs, vocab, args.ngram_order, args.ngram_alpha)
    raise ValueError(f"unknown provider spec {spec!r}")


def _merge_config(args) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("--config must contain a JSON object")
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, value)


def _sampler_config(args) -> SamplerConfig:
    stops = tuple(_escape_bytes(s) for s in (args.stop or []))
    return SamplerConfig(
        mode=args.mode if args.mode is not None else "greedy",
        top_p=args.top_p if args.top_p is not None else 1.0,
        temperature=args.temperature if args.temperature is not None else 1.0,
        seed=args.seed if args.seed is not None else 0,
        max_new_tokens=args.max_new_tokens if args.max_new_tokens is not None else 64,
        stop_sequences=stops,
    )


def _align_config(args) -> align_mod.AlignConfig:
    return align_mod.AlignConfig(
        backtrack_tokens=args.backtrack if args.backtrack is not None else 3,
        fallback_policy=args.fallback if args.fallback is not None else "error",
    )


def _read_prompts(path: str | None):
    fh = sys.stdin if path in (None, "-") else open(path, "r", encoding="utf-8")
    try:
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if "prompt_b64" in doc:
                prompt = base64.b64decode(doc["prompt_b64"])
            else:
                prompt = doc["text"].encode("utf-8")
            yield str(doc.get("id", n)), prompt
    finally:
        if fh is not sys.stdin:
            fh.close()


# ---------------------------------------------------------------------------
# Subcommands


def cmd_align(args) -> int:
    _merge_config(args)
    vocab = load_vocabulary(_resolve(args.vocab))
    provider = _load_provider(args, vocab)
    sampler = _sampler_config(args)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="ascii")

    def emit(prompt_id, result):
        doc = {"id": prompt_id, **result.to_json_dict()}
        if not args.timings:
            # wall-clock fields would break bit-reproducibility of seeded runs
            del doc["timings_us"]
        out.write(json.dumps(doc) + "\n")

    try:
        if args.no_align:
            for prompt_id, prompt in _read_prompts(args.prompt_file):
                emit(prompt_id, generate(provider, vocab, prompt, sampler))
            return EXIT_OK
        trie = build_trie(vocab)
        cache = MaskCache(trie, capacity=args.cache_size if args.cache_size is not None else 1024)
        align_cfg = _align_config(args)
        for prompt_id, prompt in _read_prompts(args.prompt_file):
            result = align_mod.aligned_generate(
                provider, vocab, trie, cache, prompt, align_cfg, sampler
            )
            emit(prompt_id, result)
        return EXIT_OK
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_gen_dataset(args) -> int:
    corpus = scenarios.load_corpus(_resolve(args.corpus))
    names = list(scenarios.SCENARIOS) if args.scenario == "all" else [args.scenario]
    seed = args.seed if args.seed is not None else 0
    all_stats = {}
    for name in names:
        examples, stats = scenarios.generate_dataset(corpus, name, seed, args.per_doc)
        path = args.out if (args.out and len(names) == 1) else f"{args.out_dir}/{name}.jsonl"
        scenarios.write_dataset(path, examples, stats)
        all_stats[name] = stats
        print(f"{name}: wrote {stats['emitted']} examples to {path} "
              f"({stats['skipped']} documents skipped)")
    if len(names) > 1:
        combined = f"{args.out_dir}/dataset_stats.json"
        with open(combined, "w", encoding="ascii") as fh:
            json.dump(all_stats, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"combined stats: {combined}")
    return EXIT_OK


def _validate_dataset(examples) -> int:
    bad = 0
    for ex in examples:
        problems = scenarios.validate_example(ex)
        if problems:
            bad += 1
            print(f"INVALID {ex.source_id}@{ex.cut_offset}: {'; '.join(problems)}")
    print(f"validated {len(examples)} examples, {bad} invalid")
    return EXIT_OK if bad == 0 else EXIT_DATA


def cmd_eval(args) -> int:
    _merge_config(args)
    wanted = tuple(args.metrics.split(",")) if args.metrics else metrics.ALL_METRICS

    if args.records:
        # score pre-computed EvalRecord JSONL, no generation
        records = metrics.read_eval_records(_resolve(args.records))
        vocab = load_vocabulary(_resolve(args.vocab)) if args.vocab else None
        label = args.label or ""
        return _emit_eval_report(args, records, wanted, vocab, label)

    if not args.dataset:
        raise ValueError("either --dataset or --records is required")
    examples = scenarios.read_dataset(_resolve(args.dataset))
    if args.validate_only:
        return _validate_dataset(examples)
    vocab = load_vocabulary(_resolve(args.vocab))
    provider = _load_provider(args, vocab)
    if provider.vocab_size != len(vocab):
        raise ValueError("provider and vocabulary disagree on vocabulary size")
    sampler = _sampler_config(args)
    align_cfg = _align_config(args)
    arms = ["aligned", "unaligned"] if args.arm == "both" else [args.arm]

    trie = build_trie(vocab)
    cache = MaskCache(trie)
    records = []
    for ex in examples:
        if args.use_baseline:
            prompt = ex.baseline_prompt
            reference = ex.prompt[len(ex.baseline_prompt):] + ex.ground_truth
        else:
            prompt, reference = ex.prompt, ex.ground_truth
        if not prompt:
            continue
        for arm in arms:
            if arm == "aligned":
                result = align_mod.aligned_generate(
                    provider, vocab, trie, cache, prompt, align_cfg, sampler
                )
            else:
                result = generate(provider, vocab, prompt, sampler)
            records.append(
                metrics.EvalRecord(
                    example_id=f"{ex.source_id}@{ex.cut_offset}",
                    generated=result.output[len(prompt):],
                    references=[reference],
                    arm=arm,
                )
            )
    if args.save_records:
        metrics.write_eval_records(args.save_records, records)
    label = args.label or (examples[0].scenario if examples else "")
    if args.use_baseline:
        label = f"{label}_baseline"
    return _emit_eval_report(args, records, wanted, vocab, label)


def _emit_eval_report(args, records, wanted, vocab, label) -> int:
    report = metrics.score_records(records, wanted, vocab, scenario=label)
    for arm in sorted(report.aggregates):
        cols = "  ".join(f"{m}={report.aggregates[arm][m]:.4f}" for m in wanted)
        print(f"{label:>24} {arm:>10}: {cols}")
    if report.deltas:
        cols = "  ".join(f"{m}={report.deltas[m]:+.4f}" for m in wanted)
        print(f"{label:>24} {'delta':>10}: {cols}")
    if args.out:
        metrics.write_report(report, args.out)
    if args.csv:
        metrics.write_report_csv(report, args.csv)
    return EXIT_OK


def _bench_trie(args, vocab):
    path = args.trie_cache
    if path and os.path.exists(path):
        return load_trie(path)
    trie = build_trie(vocab)
    if path:
        save_trie(trie, path, vocab)
    return trie


def cmd_bench(args) -> int:
    _merge_config(args)
    seed = args.seed if args.seed is not None else 0
    report = {}
    if not args.skip_lookup:
        if args.vocab:
            vocab = load_vocabulary(_resolve(args.vocab))
        else:
            vocab = bench_mod.make_synthetic_vocabulary(args.vocab_size, seed)
        report["lookup"] = bench_mod.bench_lookup(
            vocab,
            trie=_bench_trie(args, vocab),
            queries=args.queries,
            warmup=args.warmup,
            naive_queries=args.naive_queries,
            seed=seed,
        )
    if not args.skip_steps:
        corpus = scenarios.load_corpus(_resolve(args.corpus))
        options = PretokenizeOptions(space_prefix=True, group_whitespace=True)
        train_vocab = train_tiny_bpe((t for _, t in corpus), args.train_size, options)
        provider = build_ngram_model(
            (t for _, t in corpus), train_vocab, args.ngram_order, args.ngram_alpha
        )
        prompts = bench_mod.boundary_prompts(corpus, train_vocab, args.prompts, seed)
        report["alignment_steps"] = bench_mod.bench_alignment_steps(
            provider, train_vocab, prompts,
            backtrack_tokens=args.backtrack if args.backtrack is not None else 3,
        )
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_vocab_train(args) -> int:
    corpus = scenarios.load_corpus(_resolve(args.corpus))
    options = PretokenizeOptions(
        space_prefix=args.space_prefix, group_whitespace=args.group_whitespace
    )
    specials = [_escape_bytes(s) for s in (args.special or [])]
    vocab = train_tiny_bpe((t for _, t in corpus), args.target_size, options, specials)
    save_vocabulary(vocab, args.out)
    print(f"trained {len(vocab)} tokens ({len(vocab.merges or ())} merges) -> {args.out}")
    return EXIT_OK


def cmd_vocab_inspect(args) -> int:
    vocab = load_vocabulary(_resolve(args.vocab))
    lengths = np.array([len(t) for t in vocab.tokens])
    multi = [t for i, t in enumerate(vocab.tokens) if len(t) > 1 and not vocab.is_special(i)]
    print(f"tokens: {len(vocab)}")
    print(f"merges: {len(vocab.merges) if vocab.merges is not None else 'none (greedy matching)'}")
    print(f"specials: {sorted(vocab.specials)}")
    print(f"token length: min={lengths.min()} median={int(np.median(lengths))} max={lengths.max()}")
    print(f"covers all single bytes: {vocab.has_all_byte_tokens()}")
    sample = ", ".join(repr(t)[1:] for t in multi[:12])
    print(f"sample multi-byte tokens: {sample}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring


def _add_sampler_flags(p: _Parser) -> None:
    p.add_argument("--mode", choices=["greedy", "nucleus"], default=None)
    p.add_argument("--top-p", type=float, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--max-new-tokens", type=int, default=None)
    p.add_argument("--stop", action="append", default=None,
                   help="stop sequence (supports \\n style escapes); repeatable")
    p.add_argument("--seed", type=int, default=None)


def _add_provider_flags(p: _Parser) -> None:
    p.add_argument("--provider", default=None,
                   help="scripted:<table.json> or ngram:<corpus file>")
    p.add_argument("--ngram-order", type=int, default=3)
    p.add_argument("--ngram-alpha", type=float, default=0.1)


def build_parser() -> _Parser:
    parser = _Parser(prog="tokalign")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", parents=[], help="complete prompts, aligned by default")
    p.add_argument("--vocab", required=True)
    _add_provider_flags(p)
    p.add_argument("--prompt-file", default=None, help="JSONL of {id, text|prompt_b64}; default stdin")
    p.add_argument("--out", default=None)
    p.add_argument("--no-align", action="store_true")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings_us in results (not bit-reproducible)")
    p.add_argument("--backtrack", type=int, default=None)
    p.add_argument("--fallback", choices=["error", "emit-raw-bytes"], default=None)
    p.add_argument("--cache-size", type=int, default=None)
    p.add_argument("--config", default=None)
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("gen-dataset", help="cut a corpus into scenario datasets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--scenario", choices=list(scenarios.SCENARIOS) + ["all"], required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--per-doc", type=int, default=1)
    p.add_argument("--out", default=None, help="output file (single scenario only)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("eval", help="paired with/without-alignment scoring")
    p.add_argument("--dataset", default=None)
    p.add_argument("--records", default=None,
                   help="score a pre-computed EvalRecord JSONL instead of generating")
    p.add_argument("--save-records", default=None,
                   help="also write the generated EvalRecord JSONL here")
    p.add_argument("--vocab", default=None)
    _add_provider_flags(p)
    p.add_argument("--arm", choices=["both", "aligned", "unaligned"], default="both")
    p.add_argument("--metrics", default=None, help="comma list, e.g. em,es")
    p.add_argument("--use-baseline", action="store_true")
    p.add_argument("--validate-only", action="store_true")
    p.add_argument("--label", default=None)
    p.add_argument("--backtrack", type=int, default=None)
    p.add_argument("--fallback", choices=["error", "emit-raw-bytes"], default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--config", default=None)
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="lookup latency and alignment-step stats")
    p.add_argument("--vocab", default=None, help="vocabulary file (default: synthetic)")
    p.add_argument("--trie-cache", default=None,
                   help="binary trie file; loaded when present, written otherwise")
    p.add_argument("--vocab-size", type=int, default=50_000)
    p.add_argument("--queries", type=int, default=10_000)
    p.add_argument("--warmup", type=int, default=1_000)
    p.add_argument("--naive-queries", type=int, default=200)
    p.add_argument("--skip-lookup", action="store_true")
    p.add_argument("--skip-steps", action="store_true")
    p.add_argument("--corpus", default="bundled:code")
    p.add_argument("--train-size", type=int, default=512)
    p.add_argument("--ngram-order", type=int, default=3)
    p.add_argument("--ngram-alpha", type=float, default=0.1)
    p.add_argument("--prompts", type=int, default=200)
    p.add_argument("--backtrack", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("vocab", help="vocabulary tools")
    vocab_sub = p.add_subparsers(dest="vocab_command", required=True)
    pt = vocab_sub.add_parser("train", help="train a tiny BPE vocabulary")
    pt.add_argument("--corpus", required=True)
    pt.add_argument("--target-size", type=int, required=True)
    pt.add_argument("--space-prefix", action=argparse.BooleanOptionalAction, default=True)
    pt.add_argument("--group-whitespace", action=argparse.BooleanOptionalAction, default=True)
    pt.add_argument("--special", action="append", default=None)
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=cmd_vocab_train)
    pi = vocab_sub.add_parser("inspect", help="summarize a vocabulary file")
    pi.add_argument("--vocab", required=True)
    pi.set_defaults(func=cmd_vocab_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except align_mod.DeadEndError as exc:
        print(f"tokalign: dead end: {exc}", file=sys.stderr)
        return EXIT_DEAD_END
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"tokalign: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
