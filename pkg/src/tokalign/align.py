"""Prompt backtracking and trie-masked decoding.

A prompt that ends mid-token is out-of-distribution for the model.  The
fix: drop the last B tokens from the model context, keep their bytes as
an *alignment prefix*, and constrain decoding so every sampled token
either starts with the remaining prefix or is itself a prefix of it.
Each accepted token consumes its bytes from the prefix; once the prefix
is empty, unconstrained decoding takes over.  The emitted bytes then
reproduce the prompt exactly and continue from a tokenization the model
has actually seen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .decoding import (
    GenerationResult,
    LogitsProvider,
    SamplerConfig,
    check_distribution,
    make_rng,
    run_free_phase,
    sample,
)
from .trie import ByteTrie, MaskCache, TokenMask, cached_mask
from .vocab import Vocabulary, decode, encode


class AlignmentError(RuntimeError):
    """Base class for alignment failures."""


class EmptyMaskError(AlignmentError):
    """No vocabulary token is compatible with the alignment prefix."""

    def __init__(self, prefix: bytes):
        super().__init__(f"no token compatible with alignment prefix {prefix!r}")
        self.prefix = prefix


class DeadEndError(AlignmentError):
    """A dead end was hit and the fallback policy is 'error'."""

    def __init__(self, prefix: bytes, context: list[int], steps_taken: int):
        super().__init__(
            f"alignment dead end: prefix {prefix!r} matches no token "
            f"after {steps_taken} steps (context length {len(context)})"
        )
        self.prefix = prefix
        self.context = context
        self.steps_taken = steps_taken


class AlignmentContractError(AlignmentError):
    """A caller advanced with a token outside the compatibility mask."""


@dataclass
class AlignConfig:
    """Backtracking parameters.

    ``backtrack_tokens`` defaults to 3; one token often under-backtracks
    past multi-token artifacts like space-prefixed words.  The step bound
    is pure defense in depth: termination is already guaranteed because
    every accepted token consumes at least one prefix byte.
    """

    backtrack_tokens: int = 3
    fallback_policy: str = "error"  # "error" | "emit-raw-bytes"
    max_alignment_steps: int | None = None

    def __post_init__(self):
        if self.backtrack_tokens < 1:
            raise ValueError("backtrack_tokens must be >= 1")
        if self.fallback_policy not in ("error", "emit-raw-bytes"):
            raise ValueError(f"unknown fallback policy {self.fallback_policy!r}")
        if self.max_alignment_steps is None:
            self.max_alignment_steps = 4 * self.backtrack_tokens + 16
        if self.max_alignment_steps < self.backtrack_tokens:
            raise ValueError("max_alignment_steps must be >= backtrack_tokens")


@dataclass
class AlignmentState:
    """Loop variable of the alignment phase.

    Invariant: decode(context) + prefix stays constant across advances
    (the prompt bytes, plus any surplus generated past them), and prefix
    strictly shrinks on every advance.
    """

    context: list[int]
    prefix: bytes
    steps_taken: int = 0


def backtrack_split(
    ids: list[int], vocab: Vocabulary, backtrack_tokens: int
) -> tuple[list[int], bytes]:
    """Split ids into (context, alignment-prefix bytes of the last B tokens).

    B is clamped to the sequence length, so short prompts degrade to a
    full backtrack with empty context.
    """
    if backtrack_tokens < 1:
        raise ValueError("backtrack_tokens must be >= 1")
    if not ids:
        raise ValueError("cannot backtrack an empty token sequence")
    b = min(backtrack_tokens, len(ids))
    return list(ids[:-b]), decode(vocab, ids[-b:])


def mask_distribution(dist: np.ndarray, mask: TokenMask) -> np.ndarray:
    """Zero all probabilities outside ``mask`` and renormalize.

    When the model assigns zero mass to every compatible token, the
    result is uniform over the compatible set: alignment promises a
    prompt-consistent continuation whenever one exists, even under toy
    providers that emit hard zeros.
    """
    masked = np.where(mask, dist, 0.0)
    total = masked.sum()
    if total > 0.0:
        return masked / total
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise EmptyMaskError(b"")
    uniform = np.zeros_like(masked, dtype=np.float64)
    uniform[mask] = 1.0 / n
    return uniform


def align_step(
    state: AlignmentState,
    dist: np.ndarray,
    trie: ByteTrie,
    cache: MaskCache | None,
) -> np.ndarray:
    """Constrain one next-token distribution to the tokens compatible with the prefix."""
    if not state.prefix:
        raise ValueError("alignment prefix is already empty")
    dist = np.asarray(dist, dtype=np.float64)
    if __debug__:
        check_distribution(dist)
    mask = cached_mask(cache, trie, state.prefix)
    if not mask.any():
        raise EmptyMaskError(state.prefix)
    return mask_distribution(dist, mask)


def advance(state: AlignmentState, chosen: int, vocab: Vocabulary) -> AlignmentState:
    """Consume the chosen token's bytes from the prefix.

    A token longer than the prefix empties it; the surplus bytes are
    ordinary generated output.
    """
    token = vocab.token_bytes(chosen)
    if vocab.is_special(chosen) or not (
        token.startswith(state.prefix) or state.prefix.startswith(token)
    ):
        raise AlignmentContractError(
            f"token {chosen} ({token!r}) is not compatible with prefix {state.prefix!r}"
        )
    consumed = min(len(token), len(state.prefix))
    return AlignmentState(
        context=state.context + [chosen],
        prefix=state.prefix[consumed:],
        steps_taken=state.steps_taken + 1,
    )


def aligned_generate(
    provider: LogitsProvider,
    vocab: Vocabulary,
    trie: ByteTrie,
    cache: MaskCache | None,
    prompt: bytes,
    align_cfg: AlignConfig,
    sampler_cfg: SamplerConfig,
) -> GenerationResult:
    """Full pipeline: encode, backtrack, masked decoding, then free decoding."""
    prompt = bytes(prompt)
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if provider.vocab_size != len(vocab):
        raise ValueError(
            f"provider vocab size {provider.vocab_size} != vocabulary size {len(vocab)}"
        )
    ids = encode(vocab, prompt)
    context, prefix = backtrack_split(ids, vocab, align_cfg.backtrack_tokens)
    state = AlignmentState(context=context, prefix=prefix)
    rng = make_rng(sampler_cfg.seed)
    mask_sizes: list[int] = []
    per_lookup_max_us = 0.0
    dead_end = False

    t_align = time.perf_counter_ns()
    while state.prefix:
        if state.steps_taken >= align_cfg.max_alignment_steps:
            raise AlignmentError(
                f"alignment exceeded {align_cfg.max_alignment_steps} steps; "
                "provider/vocabulary mismatch?"
            )
        dist = provider.next_distribution(state.context)
        t_lookup = time.perf_counter_ns()
        mask = cached_mask(cache, trie, state.prefix)
        per_lookup_max_us = max(
            per_lookup_max_us, (time.perf_counter_ns() - t_lookup) / 1000.0
        )
        if not mask.any():
            dead_end = True
            if align_cfg.fallback_policy == "error":
                raise DeadEndError(state.prefix, state.context, state.steps_taken)
            state = _emit_raw_bytes(state, vocab)
            break
        mask_sizes.append(int(np.count_nonzero(mask)))
        masked = mask_distribution(np.asarray(dist, dtype=np.float64), mask)
        chosen = sample(masked, sampler_cfg, rng)
        state = advance(state, chosen, vocab)
    alignment_us = (time.perf_counter_ns() - t_align) / 1000.0

    produced = decode(vocab, state.context)
    assert produced.startswith(prompt), "alignment lost prompt bytes"
    generated = bytearray(produced[len(prompt):])

    t_free = time.perf_counter_ns()
    stop_at = run_free_phase(provider, vocab, state.context, generated, sampler_cfg, rng)
    free_us = (time.perf_counter_ns() - t_free) / 1000.0

    out = bytes(generated) if stop_at is None else bytes(generated[:stop_at])
    return GenerationResult(
        prompt=prompt,
        output=prompt + out,
        token_ids=state.context,
        alignment_steps=state.steps_taken,
        mask_sizes=mask_sizes,
        timings_us={
            "alignment": alignment_us,
            "free": free_us,
            "per_lookup_max": per_lookup_max_us,
        },
        dead_end=dead_end,
    )


def _emit_raw_bytes(state: AlignmentState, vocab: Vocabulary) -> AlignmentState:
    """Fallback: append the remaining prefix verbatim via single-byte tokens."""
    context = list(state.context)
    for b in state.prefix:
        try:
            context.append(vocab.id_of(bytes([b])))
        except Exception:
            raise DeadEndError(state.prefix, state.context, state.steps_taken) from None
    return AlignmentState(context=context, prefix=b"", steps_taken=state.steps_taken)
