"""
Aligned completion: recovering from a partial token
===================================================

A prompt ending in the dangling subword ``re`` (the user is halfway
through typing ``return``) produces a junk continuation from plain
decoding, because the token pair ("    ", "re") never occurs in
training data.  Aligned decoding backtracks the last few tokens,
re-derives them under a byte-level compatibility mask, and sails
through the partial token.
"""

from tokalign import (
    AlignConfig,
    MaskCache,
    SamplerConfig,
    Vocabulary,
    aligned_generate,
    build_ngram_model,
    build_trie,
    fixtures,
    generate,
)

# --- the bundled deterministic demo -----------------------------------
vocab = fixtures.build_demo_vocabulary()
model = fixtures.build_demo_model(vocab)
trie = build_trie(vocab)
cache = MaskCache(trie)
prompt = fixtures.DEMO_PROMPT
cfg = SamplerConfig(mode="greedy", max_new_tokens=6)

print("prompt ends with:", prompt[-22:])
plain = generate(model, vocab, prompt, cfg)
print("plain continuation:  ", plain.output[len(prompt):])

aligned = aligned_generate(model, vocab, trie, cache, prompt, AlignConfig(), cfg)
print("aligned continuation:", aligned.output[len(prompt):])
print("alignment steps:", aligned.alignment_steps,
      "| per-step compatible-set sizes:", aligned.mask_sizes)
assert aligned.output.startswith(prompt)

# --- the smallest possible reproduction -------------------------------
# train a 1-gram on "I like tea" with a space-prefix token " like";
# the prompt "I " then ends inside that token
tiny = Vocabulary([bytes([i]) for i in range(256)] + [b" like", b" tea"])
provider = build_ngram_model([b"I like tea"], tiny, order=1, alpha=0.0)
tiny_trie = build_trie(tiny)
cfg2 = SamplerConfig(mode="greedy", max_new_tokens=2)

plain2 = generate(provider, tiny, b"I ", cfg2)
aligned2 = aligned_generate(
    provider, tiny, tiny_trie, MaskCache(tiny_trie), b"I ",
    AlignConfig(backtrack_tokens=1), cfg2,
)
print("\nprompt 'I ' plain:  ", plain2.output)
print("prompt 'I ' aligned:", aligned2.output)
