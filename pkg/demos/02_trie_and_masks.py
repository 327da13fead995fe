"""
Byte tries and compatibility masks
==================================

The trie answers: which tokens are compatible with a partial-token
prefix?  A token is compatible when it starts with the prefix, or when
it is itself a prefix of it (a shorter token that consumes part of the
bytes).  Masks come back as boolean vectors ready to zero out a
probability distribution in one pass.
"""

import numpy as np

from tokalign import MaskCache, Vocabulary, build_trie, cached_mask, matching_tokens

vocab = Vocabulary([bytes([i]) for i in range(256)] + [b"re", b"ret", b"return", b"read", b"turn"])
trie = build_trie(vocab)

for prefix in (b"re", b"ret", b"retu", b"x"):
    mask = matching_tokens(trie, prefix)
    names = [vocab.tokens[i] for i in np.flatnonzero(mask) if len(vocab.tokens[i]) > 1]
    single = sum(1 for i in np.flatnonzero(mask) if len(vocab.tokens[i]) == 1)
    print(f"prefix {prefix!r}: {int(mask.sum())} tokens ({single} single-byte), multi: {names}")

# the mask cache keeps hot prefixes around; the single space is
# pre-seeded because completion requests end with it constantly
cache = MaskCache(trie, capacity=1024)
cached_mask(cache, trie, b" ")
cached_mask(cache, trie, b" ")
cached_mask(cache, trie, b"re")
cached_mask(cache, trie, b"re")
print("\ncache stats after four lookups:", cache.stats())

# transparency: a cached mask is always bit-identical to a fresh query
fresh = matching_tokens(trie, b"re")
hit = cached_mask(cache, trie, b"re")
print("cached == fresh:", bool(np.array_equal(fresh, hit)))
