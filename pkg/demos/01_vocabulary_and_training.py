"""
Vocabularies: training, encoding, decoding
==========================================

Train a tiny byte-level BPE vocabulary on the bundled code corpus and
look at the tokens it learns.  The two pretokenization options make the
trained vocabulary reproduce the quirks of production tokenizers: words
carry their leading space, and whitespace runs become single tokens.
"""

from tokalign import PretokenizeOptions, decode, encode, fixtures, train_tiny_bpe

corpus = [text for _, text in fixtures.build_code_corpus()]

options = PretokenizeOptions(space_prefix=True, group_whitespace=True)
vocab = train_tiny_bpe(corpus, target_size=512, options=options)
print(f"trained {len(vocab)} tokens, {len(vocab.merges)} merges")

# space-prefixed words and multi-space tokens are the point
interesting = [t for t in vocab.tokens if len(t) > 3]
print("some learned tokens:", interesting[:12])

whitespace_runs = [t for t in vocab.tokens if len(t) > 1 and not t.strip(b" \n\t")]
print("whitespace tokens:", whitespace_runs)

# encoding is deterministic and loses nothing
text = corpus[0]
ids = encode(vocab, text)
assert decode(vocab, ids) == text
print(f"\nfirst document: {len(text)} bytes -> {len(ids)} tokens")
print("tokenization:", [vocab.tokens[i] for i in ids[:12]], "...")

# the canonical parse attaches each word's leading space to the word;
# that's exactly why a prompt ending in a bare space is trouble
print("\n'I like' with a space-prefix vocabulary:")
tiny = train_tiny_bpe([b"I like tea. I like code."], 300, options)
print([tiny.tokens[i] for i in encode(tiny, b"I like tea.")])
