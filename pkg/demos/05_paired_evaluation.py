"""
Paired with/without-alignment evaluation
========================================

For every scenario dataset, run both arms with the same greedy sampler
and score first-token accuracy.  The partial-token datasets show large
gains from alignment; the baseline datasets show the two arms agreeing,
which is what lets alignment run unconditionally in production.
"""

from tokalign import (
    AlignConfig,
    EvalRecord,
    MaskCache,
    PretokenizeOptions,
    SCENARIOS,
    SamplerConfig,
    aligned_generate,
    build_ngram_model,
    build_trie,
    fixtures,
    generate,
    generate_dataset,
    score_records,
    train_tiny_bpe,
)

corpus = fixtures.build_code_corpus()
texts = [t for _, t in corpus]
vocab = train_tiny_bpe(texts, 512, PretokenizeOptions(space_prefix=True, group_whitespace=True))
provider = build_ngram_model(texts, vocab, order=3, alpha=0.1)
trie = build_trie(vocab)
cache = MaskCache(trie)
cfg = SamplerConfig(mode="greedy", max_new_tokens=16)
align_cfg = AlignConfig(backtrack_tokens=3)

print(f"{'scenario':>18} {'aligned':>8} {'plain':>8} {'delta':>8}")
for scenario in SCENARIOS:
    examples, _ = generate_dataset(corpus, scenario, seed=7)
    records = []
    for ex in examples:
        if not ex.prompt:
            continue
        a = aligned_generate(provider, vocab, trie, cache, ex.prompt, align_cfg, cfg)
        p = generate(provider, vocab, ex.prompt, cfg)
        key = f"{ex.source_id}@{ex.cut_offset}"
        records.append(EvalRecord(key, a.output[len(ex.prompt):], [ex.ground_truth], "aligned"))
        records.append(EvalRecord(key, p.output[len(ex.prompt):], [ex.ground_truth], "unaligned"))
    report = score_records(records, ("fta",), vocab, scenario=scenario)
    print(f"{scenario:>18} {report.aggregates['aligned']['fta']:>8.3f} "
          f"{report.aggregates['unaligned']['fta']:>8.3f} {report.deltas['fta']:>+8.3f}")
