"""Byte-level subword vocabularies.

A :class:`Vocabulary` maps dense integer token ids to non-empty byte
sequences, optionally carries BPE merge rules, and marks some ids as
special (excluded from prompt matching).  Everything in this package
works on raw bytes, never on decoded characters, so partial UTF-8
sequences are first-class values.

The module also ships a tiny BPE trainer good enough to produce test
vocabularies exhibiting the tokenization artifacts the rest of the
package is built around: space-prefixed word tokens (`` like``) and
multi-whitespace tokens (``    ``).
"""

from __future__ import annotations

import base64
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

VOCAB_FILE_VERSION = 1

WHITESPACE_BYTES = frozenset(b" \n\t")


class VocabularyError(ValueError):
    """Base class for vocabulary problems."""


class VocabularyFormatError(VocabularyError):
    """The vocabulary file is malformed (bad JSON, missing/extra fields)."""


class VocabularyValidationError(VocabularyError):
    """The vocabulary violates an invariant (duplicate bytes, sparse ids, ...)."""


class EncodingError(ValueError):
    """Text cannot be encoded, or ids cannot be decoded.

    ``offset`` is the byte offset (encode) or sequence position (decode)
    of the offending item.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class Vocabulary:
    """Immutable token-id <-> byte-sequence mapping.

    Token ids are dense integers ``0..len(vocab)-1``.  Byte sequences are
    unique across non-special tokens; special tokens (end-of-sequence
    markers and the like) are excluded from encoding and from prefix
    matching, so their surface bytes may overlap anything.

    ``pretokenize`` records the chunking rules the vocabulary was trained
    with; when set, encoding applies merges within chunks (the behavior
    of real byte-level BPE deployments, and what makes space-prefix and
    indentation tokens canonical).  When None, merges apply globally.
    """

    def __init__(
        self,
        tokens: Sequence[bytes],
        merges: Sequence[tuple[bytes, bytes]] | None = None,
        specials: Iterable[int] = (),
        pretokenize: "PretokenizeOptions | None" = None,
    ):
        self.tokens: tuple[bytes, ...] = tuple(bytes(t) for t in tokens)
        self.merges: tuple[tuple[bytes, bytes], ...] | None = (
            None if merges is None else tuple((bytes(a), bytes(b)) for a, b in merges)
        )
        self.specials: frozenset[int] = frozenset(specials)
        self.pretokenize = pretokenize
        self._validate()
        self._id_by_bytes: dict[bytes, int] = {
            t: i for i, t in enumerate(self.tokens) if i not in self.specials
        }
        self._max_token_len = max(
            (len(t) for i, t in enumerate(self.tokens) if i not in self.specials),
            default=0,
        )
        if self.merges is not None:
            self._merge_rank = {pair: r for r, pair in enumerate(self.merges)}

    def _validate(self) -> None:
        if not self.tokens:
            raise VocabularyValidationError("vocabulary has no tokens")
        seen: dict[bytes, int] = {}
        for i, t in enumerate(self.tokens):
            if len(t) == 0:
                raise VocabularyValidationError(f"token {i} has empty byte sequence")
            if i in self.specials:
                continue
            if t in seen:
                raise VocabularyValidationError(
                    f"duplicate byte sequence for tokens {seen[t]} and {i}: {t!r}"
                )
            seen[t] = i
        for i in self.specials:
            if not 0 <= i < len(self.tokens):
                raise VocabularyValidationError(f"special id {i} out of range")
        if self.merges is not None:
            for r, (left, right) in enumerate(self.merges):
                for side, name in ((left, "left"), (right, "right")):
                    if side not in seen:
                        raise VocabularyValidationError(
                            f"merge {r}: {name} side {side!r} is not a token"
                        )
                if left + right not in seen:
                    raise VocabularyValidationError(
                        f"merge {r}: merged sequence {(left + right)!r} is not a token"
                    )

    def __len__(self) -> int:
        return len(self.tokens)

    def token_bytes(self, token_id: int) -> bytes:
        if not 0 <= token_id < len(self.tokens):
            raise VocabularyError(f"unknown token id {token_id}")
        return self.tokens[token_id]

    def id_of(self, token: bytes) -> int:
        """Id of a non-special token by its exact bytes."""
        try:
            return self._id_by_bytes[bytes(token)]
        except KeyError:
            raise VocabularyError(f"no non-special token with bytes {token!r}") from None

    def non_special_ids(self) -> list[int]:
        return [i for i in range(len(self.tokens)) if i not in self.specials]

    def is_special(self, token_id: int) -> bool:
        return token_id in self.specials

    def has_all_byte_tokens(self) -> bool:
        """True when every one of the 256 single-byte tokens is present."""
        return all(bytes([b]) in self._id_by_bytes for b in range(256))


def decode(vocab: Vocabulary, ids: Sequence[int]) -> bytes:
    """Concatenate the byte sequences of ``ids``, in order."""
    out = bytearray()
    for pos, i in enumerate(ids):
        if not 0 <= i < len(vocab.tokens):
            raise EncodingError(f"unknown token id {i}", pos)
        out += vocab.tokens[i]
    return bytes(out)


def encode(vocab: Vocabulary, text: bytes) -> list[int]:
    """Tokenize ``text`` into ids whose decode equals ``text`` exactly.

    With merge rules present this is standard BPE encoding: split into
    single bytes, then repeatedly apply the lowest-rank applicable merge,
    leftmost occurrence first.  Without merges, greedy longest-match
    left-to-right over the non-special tokens.
    """
    text = bytes(text)
    if not text:
        return []
    if vocab.merges is not None:
        return _encode_bpe(vocab, text)
    return _encode_greedy(vocab, text)


def _encode_greedy(vocab: Vocabulary, text: bytes) -> list[int]:
    table = vocab._id_by_bytes
    max_len = vocab._max_token_len
    ids: list[int] = []
    pos = 0
    n = len(text)
    while pos < n:
        match = None
        for length in range(min(max_len, n - pos), 0, -1):
            candidate = table.get(text[pos : pos + length])
            if candidate is not None:
                match = candidate
                break
        if match is None:
            raise EncodingError(f"byte 0x{text[pos]:02x} not coverable", pos)
        ids.append(match)
        pos += len(vocab.tokens[match])
    return ids


def _encode_bpe(vocab: Vocabulary, text: bytes) -> list[int]:
    if vocab.pretokenize is None:
        return _bpe_chunk(vocab, text, 0)
    ids: list[int] = []
    offset = 0
    for chunk in pretokenize(text, vocab.pretokenize):
        ids.extend(_bpe_chunk(vocab, chunk, offset))
        offset += len(chunk)
    return ids


def _bpe_chunk(vocab: Vocabulary, text: bytes, base_offset: int) -> list[int]:
    table = vocab._id_by_bytes
    parts: list[bytes] = []
    for offset, b in enumerate(text):
        single = bytes([b])
        if single not in table:
            raise EncodingError(f"byte 0x{b:02x} not coverable", base_offset + offset)
        parts.append(single)
    rank = vocab._merge_rank
    while len(parts) > 1:
        best_rank = None
        best_i = -1
        for i in range(len(parts) - 1):
            r = rank.get((parts[i], parts[i + 1]))
            if r is not None and (best_rank is None or r < best_rank):
                best_rank = r
                best_i = i
        if best_rank is None:
            break
        parts[best_i : best_i + 2] = [parts[best_i] + parts[best_i + 1]]
    return [table[p] for p in parts]


# ---------------------------------------------------------------------------
# File format


def _entry_to_bytes(entry: object, where: str) -> bytes:
    if not isinstance(entry, dict):
        raise VocabularyFormatError(f"{where}: expected an object, got {type(entry).__name__}")
    has_text = "text" in entry
    has_b64 = "bytes_b64" in entry
    if has_text == has_b64:
        raise VocabularyFormatError(f"{where}: exactly one of 'text'/'bytes_b64' required")
    if has_text:
        value = entry["text"]
        if not isinstance(value, str):
            raise VocabularyFormatError(f"{where}: 'text' must be a string")
        return value.encode("utf-8")
    value = entry["bytes_b64"]
    if not isinstance(value, str):
        raise VocabularyFormatError(f"{where}: 'bytes_b64' must be a string")
    try:
        return base64.b64decode(value, validate=True)
    except Exception as exc:
        raise VocabularyFormatError(f"{where}: invalid base64: {exc}") from None


def _bytes_to_entry(data: bytes) -> dict:
    # Canonical form: plain text whenever the bytes are valid UTF-8.
    try:
        return {"text": data.decode("utf-8", errors="strict")}
    except UnicodeDecodeError:
        return {"bytes_b64": base64.b64encode(data).decode("ascii")}


def load_vocabulary(path: str) -> Vocabulary:
    """Load a vocabulary from its JSON file format."""
    with open(path, "rb") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise VocabularyFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return vocabulary_from_dict(doc, where=path)


def vocabulary_from_dict(doc: object, where: str = "<vocabulary>") -> Vocabulary:
    if not isinstance(doc, dict):
        raise VocabularyFormatError(f"{where}: top level must be an object")
    if doc.get("version") != VOCAB_FILE_VERSION:
        raise VocabularyFormatError(f"{where}: field 'version' must be {VOCAB_FILE_VERSION}")
    raw_tokens = doc.get("tokens")
    if not isinstance(raw_tokens, list):
        raise VocabularyFormatError(f"{where}: field 'tokens' must be an array")
    by_id: dict[int, bytes] = {}
    for n, entry in enumerate(raw_tokens):
        field = f"{where}: tokens[{n}]"
        data = _entry_to_bytes(entry, field)
        token_id = entry.get("id")
        if not isinstance(token_id, int):
            raise VocabularyFormatError(f"{field}: integer 'id' required")
        if token_id in by_id:
            raise VocabularyValidationError(f"{field}: duplicate id {token_id}")
        by_id[token_id] = data
    if sorted(by_id) != list(range(len(by_id))):
        raise VocabularyValidationError(f"{where}: token ids are not dense 0..V-1")
    tokens = [by_id[i] for i in range(len(by_id))]

    merges = None
    if "merges" in doc and doc["merges"] is not None:
        raw_merges = doc["merges"]
        if not isinstance(raw_merges, list):
            raise VocabularyFormatError(f"{where}: field 'merges' must be an array")
        merges = []
        for n, pair in enumerate(raw_merges):
            field = f"{where}: merges[{n}]"
            if not isinstance(pair, list) or len(pair) != 2:
                raise VocabularyFormatError(f"{field}: expected a 2-element array")
            merges.append((_entry_to_bytes(pair[0], field), _entry_to_bytes(pair[1], field)))

    specials = doc.get("specials", [])
    if not isinstance(specials, list) or not all(isinstance(i, int) for i in specials):
        raise VocabularyFormatError(f"{where}: field 'specials' must be an array of ids")

    options = None
    if doc.get("pretokenize") is not None:
        raw = doc["pretokenize"]
        if not isinstance(raw, dict):
            raise VocabularyFormatError(f"{where}: field 'pretokenize' must be an object")
        options = PretokenizeOptions(
            space_prefix=bool(raw.get("space_prefix", False)),
            group_whitespace=bool(raw.get("group_whitespace", False)),
        )
    return Vocabulary(tokens, merges=merges, specials=specials, pretokenize=options)


def vocabulary_to_dict(vocab: Vocabulary) -> dict:
    doc: dict = {
        "version": VOCAB_FILE_VERSION,
        "tokens": [
            {"id": i, **_bytes_to_entry(t)} for i, t in enumerate(vocab.tokens)
        ],
    }
    if vocab.merges is not None:
        doc["merges"] = [
            [_bytes_to_entry(a), _bytes_to_entry(b)] for a, b in vocab.merges
        ]
    if vocab.pretokenize is not None:
        doc["pretokenize"] = {
            "space_prefix": vocab.pretokenize.space_prefix,
            "group_whitespace": vocab.pretokenize.group_whitespace,
        }
    doc["specials"] = sorted(vocab.specials)
    return doc


def save_vocabulary(vocab: Vocabulary, path: str) -> None:
    """Write the canonical JSON form (text entries wherever bytes are valid UTF-8)."""
    with open(path, "w", encoding="ascii") as fh:
        json.dump(vocabulary_to_dict(vocab), fh, indent=1, ensure_ascii=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Tiny BPE training


@dataclass(frozen=True)
class PretokenizeOptions:
    """Chunking rules applied before pair counting.

    ``space_prefix``: a single space preceding a word sticks to the word,
    so `` like``-style tokens can form.  ``group_whitespace``: runs of
    space/newline/tab stay in one chunk, so multi-whitespace tokens can
    form; when off, whitespace is split into single bytes and never merges.
    """

    space_prefix: bool = False
    group_whitespace: bool = False


def _byte_class(b: int) -> int:
    # 0 whitespace (space/newline/tab), 1 word (alnum, underscore, non-ASCII), 2 other
    if b in (0x20, 0x0A, 0x09):
        return 0
    if b == 0x5F or 0x30 <= b <= 0x39 or 0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A or b >= 0x80:
        return 1
    return 2


def pretokenize(text: bytes, options: PretokenizeOptions) -> list[bytes]:
    """Split ``text`` into chunks; merges never cross chunk boundaries."""
    if not text:
        return []
    runs: list[bytes] = []
    start = 0
    cls = _byte_class(text[0])
    for i in range(1, len(text)):
        c = _byte_class(text[i])
        if c != cls:
            runs.append(text[start:i])
            start, cls = i, c
    runs.append(text[start:])

    chunks: list[bytes] = []
    for n, run in enumerate(runs):
        if _byte_class(run[0]) != 0:
            chunks.append(run)
            continue
        moved = b""
        if (
            options.space_prefix
            and run.endswith(b" ")
            and n + 1 < len(runs)
        ):
            run, moved = run[:-1], b" "
        if run:
            if options.group_whitespace:
                chunks.append(run)
            else:
                chunks.extend(bytes([b]) for b in run)
        if moved:
            runs[n + 1] = moved + runs[n + 1]
    return chunks


def _apply_merge(parts: tuple[bytes, ...], pair: tuple[bytes, bytes]) -> tuple[bytes, ...]:
    merged = pair[0] + pair[1]
    out: list[bytes] = []
    i = 0
    while i < len(parts):
        if i + 1 < len(parts) and parts[i] == pair[0] and parts[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(parts[i])
            i += 1
    return tuple(out)


def train_tiny_bpe(
    corpus: Iterable[bytes],
    target_size: int,
    options: PretokenizeOptions = PretokenizeOptions(),
    specials: Sequence[bytes] = (),
) -> Vocabulary:
    """Train a byte-level BPE vocabulary of ``target_size`` tokens.

    Starts from the 256 single-byte tokens and repeatedly merges the most
    frequent adjacent pair within pretokenized chunks.  Ties break on the
    lexicographically smallest merged byte sequence, then smallest left
    side, so training is fully deterministic.  Stops early if the corpus
    runs out of mergeable pairs.
    """
    documents = [bytes(d) for d in corpus]
    if not documents or all(len(d) == 0 for d in documents):
        raise VocabularyError("training corpus is empty")
    if target_size < 256 + len(specials):
        raise VocabularyError(
            f"target_size {target_size} below base alphabet plus {len(specials)} specials"
        )

    chunk_counts: Counter[tuple[bytes, ...]] = Counter()
    for doc in documents:
        for chunk in pretokenize(doc, options):
            chunk_counts[tuple(bytes([b]) for b in chunk)] += 1

    tokens: list[bytes] = [bytes([i]) for i in range(256)]
    token_set = set(tokens)
    merges: list[tuple[bytes, bytes]] = []
    n_regular = target_size - len(specials)

    while len(tokens) < n_regular:
        pair_counts: Counter[tuple[bytes, bytes]] = Counter()
        for parts, cnt in chunk_counts.items():
            for a, b in zip(parts, parts[1:]):
                pair_counts[(a, b)] += cnt
        if not pair_counts:
            break
        best = min(
            pair_counts.items(),
            key=lambda kv: (-kv[1], kv[0][0] + kv[0][1], kv[0][0]),
        )[0]
        merges.append(best)
        merged = best[0] + best[1]
        if merged not in token_set:
            tokens.append(merged)
            token_set.add(merged)
        next_counts: Counter[tuple[bytes, ...]] = Counter()
        for parts, cnt in chunk_counts.items():
            next_counts[_apply_merge(parts, best)] += cnt
        chunk_counts = next_counts

    n_regular_actual = len(tokens)
    tokens.extend(bytes(s) for s in specials)
    special_ids = range(n_regular_actual, n_regular_actual + len(specials))
    return Vocabulary(tokens, merges=merges, specials=special_ids, pretokenize=options)
