"""Logits providers, samplers, and the unconstrained generation loop.

Providers return full probability vectors (not logits): masking and
renormalization downstream are then unambiguous.  All stochasticity
lives in the sampler, which draws from an explicit seeded generator
(NumPy PCG64) via inverse-CDF over the kept set in token-id order, so
identical seeds reproduce identical outputs byte for byte.
"""

from __future__ import annotations

import base64
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .vocab import Vocabulary, decode, encode

DIST_SUM_TOLERANCE = 1e-6


class LogitsProvider(Protocol):
    """Anything that maps a token-id context to a next-token distribution."""

    vocab_size: int

    def next_distribution(self, context: Sequence[int]) -> np.ndarray: ...


def check_distribution(dist: np.ndarray) -> None:
    """Assert the provider contract: non-negative, sums to 1 within 1e-6."""
    if dist.ndim != 1:
        raise ValueError(f"distribution must be 1-D, got shape {dist.shape}")
    if np.any(dist < 0):
        raise ValueError("distribution has negative entries")
    total = float(dist.sum())
    if abs(total - 1.0) > DIST_SUM_TOLERANCE:
        raise ValueError(f"distribution sums to {total}, not 1")


@dataclass
class SamplerConfig:
    mode: str = "greedy"  # "greedy" | "nucleus"
    top_p: float = 1.0
    temperature: float = 1.0
    seed: int = 0
    max_new_tokens: int = 64
    stop_sequences: tuple[bytes, ...] = ()

    def __post_init__(self):
        if self.mode not in ("greedy", "nucleus"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.mode == "nucleus":
            if not 0.0 < self.top_p <= 1.0:
                raise ValueError("nucleus sampling requires top_p in (0, 1]")
            if self.temperature <= 0.0:
                raise ValueError("nucleus sampling requires temperature > 0")
        if self.max_new_tokens < 0:
            raise ValueError("max_new_tokens must be >= 0")
        self.stop_sequences = tuple(bytes(s) for s in self.stop_sequences)


def make_rng(seed: int) -> np.random.Generator:
    """The pinned generator: PCG64 seeded with a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(seed))


def nucleus_keep_set(dist: np.ndarray, top_p: float, temperature: float = 1.0) -> np.ndarray:
    """Ids of the smallest descending-probability prefix with mass >= top_p.

    Temperature is applied in the log domain first (zero entries stay
    zero).  Ties at equal probability order by ascending id; the boundary
    token is included, so the kept set is never empty.  Returned ids are
    ascending.
    """
    w = _apply_temperature(dist, temperature)
    order = np.argsort(-w, kind="stable")
    cum = np.cumsum(w[order])
    cut = int(np.searchsorted(cum, top_p, side="left"))
    cut = min(cut, len(order) - 1)
    kept = order[: cut + 1]
    return np.sort(kept)


def _apply_temperature(dist: np.ndarray, temperature: float) -> np.ndarray:
    if temperature == 1.0:
        return dist
    w = np.zeros_like(dist, dtype=np.float64)
    positive = dist > 0
    # p^(1/T) == exp(log(p)/T); zero probabilities are never resurrected
    w[positive] = np.exp(np.log(dist[positive]) / temperature)
    return w / w.sum()


def sample(dist: np.ndarray, cfg: SamplerConfig, rng: np.random.Generator) -> int:
    """Draw one token id from ``dist`` under the configured policy."""
    if __debug__:
        check_distribution(np.asarray(dist))
    total = float(np.sum(dist))
    if total <= 0.0:
        raise ValueError("cannot sample from an all-zero distribution")
    if cfg.mode == "greedy":
        # np.argmax returns the first maximum: lowest-id tie-break
        return int(np.argmax(dist))
    kept = nucleus_keep_set(np.asarray(dist, dtype=np.float64), cfg.top_p, cfg.temperature)
    w = _apply_temperature(np.asarray(dist, dtype=np.float64), cfg.temperature)
    probs = w[kept]
    cum = np.cumsum(probs / probs.sum())
    u = rng.random()
    idx = min(int(np.searchsorted(cum, u, side="right")), len(kept) - 1)
    return int(kept[idx])


# ---------------------------------------------------------------------------
# Generation results


@dataclass
class GenerationResult:
    """One completed generation session.

    ``output`` always begins with the prompt bytes (absent a dead end) and
    may be truncated at the first stop-sequence occurrence; ``token_ids``
    lists every token the session emitted, untruncated.  Timings are
    microseconds; ``per_lookup_max`` is the slowest single mask lookup.
    """

    prompt: bytes
    output: bytes
    token_ids: list[int]
    alignment_steps: int
    mask_sizes: list[int] = field(default_factory=list)
    timings_us: dict = field(default_factory=dict)
    dead_end: bool = False

    @property
    def continuation(self) -> bytes:
        """Generated bytes past the prompt (empty if a dead end truncated it)."""
        if self.output.startswith(self.prompt):
            return self.output[len(self.prompt):]
        return b""

    def to_json_dict(self) -> dict:
        return {
            "prompt_b64": base64.b64encode(self.prompt).decode("ascii"),
            "output_b64": base64.b64encode(self.output).decode("ascii"),
            "token_ids": list(self.token_ids),
            "alignment_steps": self.alignment_steps,
            "mask_sizes": list(self.mask_sizes),
            "timings_us": dict(self.timings_us),
            "dead_end": self.dead_end,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GenerationResult":
        return cls(
            prompt=base64.b64decode(doc["prompt_b64"]),
            output=base64.b64decode(doc["output_b64"]),
            token_ids=list(doc["token_ids"]),
            alignment_steps=int(doc["alignment_steps"]),
            mask_sizes=list(doc.get("mask_sizes", [])),
            timings_us=dict(doc.get("timings_us", {})),
            dead_end=bool(doc.get("dead_end", False)),
        )


def first_stop_index(data: bytes, stop_sequences: Sequence[bytes]) -> int | None:
    """Byte index of the earliest stop-sequence occurrence, or None."""
    best: int | None = None
    for stop in stop_sequences:
        if not stop:
            continue
        j = data.find(stop)
        if j != -1 and (best is None or j < best):
            best = j
    return best


def run_free_phase(
    provider: LogitsProvider,
    vocab: Vocabulary,
    context: list[int],
    generated: bytearray,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> int | None:
    """Sample unconstrained until max_new_tokens or a stop sequence appears.

    Mutates ``context`` and ``generated`` in place; ``generated`` holds the
    bytes past the original prompt (it may be non-empty on entry when
    alignment overshot).  Returns the truncation index into ``generated``
    when a stop sequence fired, else None.
    """
    steps = 0
    while True:
        stop_at = first_stop_index(bytes(generated), cfg.stop_sequences)
        if stop_at is not None:
            return stop_at
        if steps >= cfg.max_new_tokens:
            return None
        dist = provider.next_distribution(context)
        chosen = sample(dist, cfg, rng)
        context.append(chosen)
        generated += vocab.tokens[chosen]
        steps += 1


def generate(
    provider: LogitsProvider,
    vocab: Vocabulary,
    prompt: bytes,
    cfg: SamplerConfig,
) -> GenerationResult:
    """Plain completion: encode the prompt as-is, no backtracking, and sample."""
    if provider.vocab_size != len(vocab):
        raise ValueError(
            f"provider vocab size {provider.vocab_size} != vocabulary size {len(vocab)}"
        )
    context = encode(vocab, prompt)
    generated = bytearray()
    rng = make_rng(cfg.seed)
    t0 = time.perf_counter_ns()
    stop_at = run_free_phase(provider, vocab, context, generated, cfg, rng)
    free_us = (time.perf_counter_ns() - t0) / 1000.0
    out = bytes(generated) if stop_at is None else bytes(generated[:stop_at])
    return GenerationResult(
        prompt=bytes(prompt),
        output=bytes(prompt) + out,
        token_ids=context,
        alignment_steps=0,
        mask_sizes=[],
        timings_us={"alignment": 0.0, "free": free_us, "per_lookup_max": 0.0},
    )


# ---------------------------------------------------------------------------
# Desk-scale providers


class NGramModel:
    """Seeded-corpus n-gram provider with add-alpha smoothing.

    ``order`` is the context length in tokens.  Contexts shorter than the
    order are left-padded with a before-start sentinel, which training
    also counts, so sequence-initial transitions are modeled instead of
    falling off a cliff.  Genuinely unseen contexts back off to the
    uniform distribution over the vocabulary.  Immutable after build.
    """

    _BEFORE_START = -1

    def __init__(self, vocab_size: int, order: int, alpha: float):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.vocab_size = vocab_size
        self.order = order
        self.alpha = alpha
        self._counts: dict[tuple[int, ...], Counter[int]] = {}

    def _key(self, context: Sequence[int]) -> tuple[int, ...]:
        if len(context) >= self.order:
            return tuple(context[-self.order:])
        pad = (self._BEFORE_START,) * (self.order - len(context))
        return pad + tuple(context)

    def observe(self, ids: Sequence[int]) -> None:
        padded = (self._BEFORE_START,) * self.order + tuple(ids)
        k = self.order
        for i in range(k, len(padded)):
            ctx = padded[i - k : i]
            self._counts.setdefault(ctx, Counter())[padded[i]] += 1

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        counter = self._counts.get(self._key(context))
        if counter is None:
            return np.full(self.vocab_size, 1.0 / self.vocab_size)
        dist = np.full(self.vocab_size, self.alpha, dtype=np.float64)
        for token, count in counter.items():
            dist[token] += count
        dist /= dist.sum()
        if __debug__:
            check_distribution(dist)
        return dist


def build_ngram_model(
    corpus: Iterable[bytes],
    vocab: Vocabulary,
    order: int,
    alpha: float,
) -> NGramModel:
    """Count token transitions of the encoded corpus, one document at a time."""
    model = NGramModel(len(vocab), order, alpha)
    seen_any = False
    for doc in corpus:
        seen_any = True
        model.observe(encode(vocab, bytes(doc)))
    if not seen_any:
        raise ValueError("n-gram corpus is empty")
    return model


class ScriptedModel:
    """Deterministic provider driven by a byte-suffix lookup table.

    The row whose suffix is the longest match against the decoded context
    wins; the mandatory default row covers everything else.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        rows: Sequence[tuple[bytes, np.ndarray]],
        default: np.ndarray,
    ):
        if default is None:
            raise ValueError("scripted model requires a default row")
        self.vocab = vocab
        self.vocab_size = len(vocab)
        self.default = np.asarray(default, dtype=np.float64)
        check_distribution(self.default)
        if len(self.default) != self.vocab_size:
            raise ValueError("default row length does not match vocabulary")
        seen: set[bytes] = set()
        prepared: list[tuple[bytes, np.ndarray]] = []
        for suffix, probs in rows:
            suffix = bytes(suffix)
            if suffix in seen:
                raise ValueError(f"duplicate scripted suffix {suffix!r}")
            seen.add(suffix)
            arr = np.asarray(probs, dtype=np.float64)
            check_distribution(arr)
            if len(arr) != self.vocab_size:
                raise ValueError(f"row {suffix!r} length does not match vocabulary")
            prepared.append((suffix, arr))
        # longest suffix first so the first match wins
        self._rows = sorted(prepared, key=lambda r: len(r[0]), reverse=True)

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        text = decode(self.vocab, context)
        for suffix, probs in self._rows:
            if text.endswith(suffix):
                return probs
        return self.default

    def to_json_dict(self) -> dict:
        return {
            "rows": [
                {
                    "suffix_b64": base64.b64encode(s).decode("ascii"),
                    "probs": [float(p) for p in probs],
                }
                for s, probs in sorted(self._rows, key=lambda r: r[0])
            ],
            "default": [float(p) for p in self.default],
        }

    @classmethod
    def from_json_dict(cls, vocab: Vocabulary, doc: dict) -> "ScriptedModel":
        if "default" not in doc:
            raise ValueError("scripted model file is missing the default row")
        rows = [
            (base64.b64decode(row["suffix_b64"]), np.asarray(row["probs"], dtype=np.float64))
            for row in doc.get("rows", [])
        ]
        return cls(vocab, rows, np.asarray(doc["default"], dtype=np.float64))


def scripted_model(vocab: Vocabulary, table: dict) -> ScriptedModel:
    """Build a scripted provider from its JSON-shaped table."""
    return ScriptedModel.from_json_dict(vocab, table)
