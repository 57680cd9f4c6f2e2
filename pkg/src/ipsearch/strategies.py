"""The six decoding strategies and the shared generation loop.

Every strategy is a pure function of (backend, context, config): sampling
draws come from a PCG64 stream seeded from the config, consumed one uniform
double at a time through inverse-CDF sampling, so identical seeds reproduce
identical runs on any platform. Probability ties are always resolved toward
the lower token id.
"""
from __future__ import annotations

import math
import time
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .backend import Backend
from .core import (
    CandidateScore,
    DialogueContext,
    GenerationResult,
    GenerationState,
    StepRecord,
    StrategyConfig,
    TokenId,
    validate_config,
)
from .encoding import EncodedContext, encode_context
from .errors import ArgumentError, RangeError
from .scoring import (
    degeneration_penalty,
    ips_score,
    isotropic_value,
    proximal_value,
    response_representation,
)


class Rng:
    """Deterministic draw source: a PCG64 generator consumed as uniform doubles.

    PCG64 is a 64-bit permuted congruential generator with a fixed,
    platform-independent stream; uniform doubles are derived from single
    64-bit outputs, so the draw sequence is reproducible everywhere.
    """

    def __init__(self, seed: int):
        self._gen = np.random.Generator(np.random.PCG64(int(seed)))

    def uniform(self) -> float:
        """Next double in [0, 1)."""
        return float(self._gen.random())


def _as_probs(probs) -> np.ndarray:
    v = np.asarray(probs, dtype=float)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ArgumentError(f"probability vector must be 1-D and non-empty, got shape {v.shape}")
    return v


def greedy_step(probs) -> TokenId:
    """Argmax of the distribution; ties go to the lowest token id."""
    return int(np.argmax(_as_probs(probs)))


def topk_set(probs, k: int) -> list[TokenId]:
    """The k highest-probability ids, ties resolved toward lower ids first."""
    v = _as_probs(probs)
    if not isinstance(k, int) or not 1 <= k <= v.shape[0]:
        raise RangeError("k", f"must be an integer in [1, {v.shape[0]}], got {k!r}")
    order = sorted(range(v.shape[0]), key=lambda i: (-v[i], i))
    return order[:k]


def nucleus_set(probs, p: float) -> list[TokenId]:
    """Smallest descending-probability prefix whose cumulative mass reaches p.

    Ties sort toward lower ids. If rounding keeps the cumulative sum below p
    (possible when the whole vector sums just under 1), the set is the full
    vocabulary.
    """
    v = _as_probs(probs)
    if not isinstance(p, (int, float)) or not 0.0 < p <= 1.0:
        raise RangeError("p", f"must lie in (0, 1], got {p!r}")
    order = sorted(range(v.shape[0]), key=lambda i: (-v[i], i))
    chosen: list[int] = []
    cum = 0.0
    for i in order:
        chosen.append(i)
        cum += float(v[i])
        if cum >= p:
            break
    return chosen


def _sample(ids: Sequence[int], weights: Sequence[float], rng: Rng) -> TokenId:
    total = float(sum(weights))
    u = rng.uniform() * total
    cum = 0.0
    for i, w in zip(ids, weights):
        cum += float(w)
        if u < cum:
            return int(i)
    return int(ids[-1])


def topk_step(probs, k: int, rng: Rng) -> TokenId:
    """Sample from the renormalized top-k of the distribution."""
    v = _as_probs(probs)
    ids = topk_set(v, k)
    return _sample(ids, [float(v[i]) for i in ids], rng)


def nucleus_step(probs, p: float, rng: Rng) -> TokenId:
    """Sample from the renormalized nucleus of the distribution."""
    v = _as_probs(probs)
    ids = nucleus_set(v, p)
    return _sample(ids, [float(v[i]) for i in ids], rng)


def beam_search(
    backend: Backend, enc: EncodedContext, width: int, max_new_tokens: int
) -> GenerationResult:
    """Length-terminated beam over summed log probabilities.

    Beams that emit EOU are frozen; the highest-scoring finished beam wins
    (best unfinished one at the length cap when none finished), with ties
    going to the lexicographically smallest token sequence.
    """
    if not isinstance(width, int) or width < 1:
        raise RangeError("beam_width", f"must be an integer >= 1, got {width!r}")
    t0 = time.perf_counter()
    info = backend.info
    eou = info.eou_token_id
    base = list(enc.tokens)

    # Each beam: (tokens, total logprob, per-token model probs).
    live: list[tuple[tuple[int, ...], float, tuple[float, ...]]] = [((), 0.0, ())]
    finished: list[tuple[tuple[int, ...], float, tuple[float, ...]]] = []
    for _ in range(max_new_tokens):
        candidates = []
        for tokens, logp, probs_path in live:
            out = backend.forward(base + list(tokens))
            step_probs = np.asarray(out.probs, dtype=float)
            for t in range(info.vocab_size):
                pt = float(step_probs[t])
                lpt = logp + (math.log(pt) if pt > 0.0 else -math.inf)
                candidates.append((tokens + (t,), lpt, probs_path + (pt,)))
        candidates.sort(key=lambda c: (-c[1], c[0]))
        live = []
        for cand in candidates[:width]:
            if cand[0][-1] == eou:
                finished.append(cand)
            else:
                live.append(cand)
        if not live:
            break

    pool = finished if finished else live
    tokens, _, probs_path = min(pool, key=lambda c: (-c[1], c[0]))
    return GenerationResult(
        tokens=list(tokens),
        per_step=[StepRecord(token=t, prob=p) for t, p in zip(tokens, probs_path)],
        stop_reason="eou" if tokens and tokens[-1] == eou else "max_len",
        elapsed=time.perf_counter() - t0,
    )


def _argmax_candidate(candidates: list[CandidateScore]) -> CandidateScore:
    # Candidates arrive in ascending token-id order; strict > keeps the
    # lowest id on ties.
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.score > best.score:
            best = cand
    return best


def _contrastive_candidates(
    backend: Backend,
    prefix: list[int],
    k: int,
    alpha_cs: float,
    prefix_hiddens: Sequence,
) -> list[CandidateScore]:
    out = backend.forward(prefix)
    probs = np.asarray(out.probs, dtype=float)
    ids = sorted(topk_set(probs, k))
    hiddens = backend.forward_candidates(prefix, ids)
    scored = []
    for token, hidden in zip(ids, hiddens):
        prob = float(probs[token])
        penalty = degeneration_penalty(hidden, prefix_hiddens)
        scored.append(
            CandidateScore(
                token=token,
                prob=prob,
                penalty=penalty,
                score=(1.0 - alpha_cs) * prob - alpha_cs * penalty,
                hidden=hidden,
            )
        )
    return scored


def contrastive_step(
    backend: Backend,
    state: GenerationState,
    enc: EncodedContext,
    k: int,
    alpha_cs: float,
    context_hiddens: Optional[Sequence] = None,
) -> TokenId:
    """One step of the contrastive baseline: confidence minus max similarity
    to any prefix token (context and generated alike)."""
    prefix = list(enc.tokens) + state.generated
    if context_hiddens is None:
        context_hiddens = backend.forward(list(enc.tokens), want_all_hidden=True).hidden_all
    prefix_hiddens = list(context_hiddens) + list(state.generated_hiddens)
    scored = _contrastive_candidates(backend, prefix, k, alpha_cs, prefix_hiddens)
    return _argmax_candidate(scored).token


def _ips_candidates(
    backend: Backend, state: GenerationState, enc: EncodedContext, cfg: StrategyConfig
) -> list[CandidateScore]:
    prefix = list(enc.tokens) + state.generated
    out = backend.forward(prefix)
    probs = np.asarray(out.probs, dtype=float)
    ids = sorted(topk_set(probs, cfg.m))
    hiddens = backend.forward_candidates(prefix, ids)
    scored = []
    for token, hidden in zip(ids, hiddens):
        prob = float(probs[token])
        p_val = proximal_value(hidden, state.generated_hiddens)
        if cfg.strict_isotropy and state.step >= 1:
            rep = state.response_rep
        else:
            rep = response_representation(state.generated_hiddens, candidate=hidden)
        i_val = isotropic_value(rep, state.utterance_reps)
        scored.append(
            CandidateScore(
                token=token,
                prob=prob,
                p_value=p_val,
                i_value=i_val,
                score=ips_score(prob, p_val, i_val, cfg),
                hidden=hidden,
            )
        )
    return scored


def ips_step(
    backend: Backend, state: GenerationState, enc: EncodedContext, cfg: StrategyConfig
) -> tuple[TokenId, StepRecord]:
    """One isotropic-proximal step over the model's top-m candidates.

    Scores every candidate, returns the argmax (ties to the lower id) along
    with the full per-candidate record.
    """
    scored = _ips_candidates(backend, state, enc, cfg)
    best = _argmax_candidate(scored)
    record = StepRecord(
        token=best.token,
        prob=best.prob,
        p_value=best.p_value,
        i_value=best.i_value,
        score=best.score,
        candidates=scored,
    )
    return best.token, record


def _bootstrap_token(probs, cfg: StrategyConfig, rng: Rng) -> TokenId:
    if cfg.bootstrap_strategy == "topk":
        return topk_step(probs, cfg.bootstrap_k, rng)
    if cfg.bootstrap_strategy == "nucleus":
        return nucleus_step(probs, cfg.bootstrap_p, rng)
    return greedy_step(probs)


def generate(backend: Backend, ctx: DialogueContext, cfg: StrategyConfig) -> GenerationResult:
    """Run one full generation: encode, cache utterance representations, decode.

    Stops at the first generated EOU or at max_new_tokens. For the
    isotropic-proximal strategy, the first bootstrap_n steps use the
    configured bootstrap rule; later steps are deterministic given the
    prefix.
    """
    info = backend.info
    validate_config(cfg, info.vocab_size)
    t0 = time.perf_counter()
    enc = encode_context(ctx, info.eou_token_id)

    if cfg.strategy == "beam":
        result = beam_search(backend, enc, cfg.beam_width, cfg.max_new_tokens)
        return replace(result, elapsed=time.perf_counter() - t0)

    ctx_out = backend.forward(list(enc.tokens), want_all_hidden=True)
    utterance_reps = [ctx_out.hidden_all[p] for p in enc.eou_positions]
    state = GenerationState(utterance_reps=utterance_reps)
    rng = Rng(cfg.seed)
    records: list[StepRecord] = []
    generated: list[int] = []
    stop_reason = "max_len"

    while len(generated) < cfg.max_new_tokens:
        prefix = list(enc.tokens) + generated
        if cfg.strategy == "ips":
            if state.step < cfg.bootstrap_n:
                probs = backend.forward(prefix).probs
                token = _bootstrap_token(probs, cfg, rng)
                hidden = backend.forward_candidates(prefix, [token])[0]
                record = StepRecord(token=token, prob=float(probs[token]))
            else:
                token, record = ips_step(backend, state, enc, cfg)
                hidden = next(c.hidden for c in record.candidates if c.token == token)
            state.append(token, hidden)
        elif cfg.strategy == "contrastive":
            prefix_hiddens = list(ctx_out.hidden_all) + list(state.generated_hiddens)
            scored = _contrastive_candidates(backend, prefix, cfg.m, cfg.alpha, prefix_hiddens)
            best = _argmax_candidate(scored)
            token = best.token
            record = StepRecord(
                token=token, prob=best.prob, score=best.score, candidates=scored
            )
            state.append(token, best.hidden)
        else:
            probs = backend.forward(prefix).probs
            if cfg.strategy == "greedy":
                token = greedy_step(probs)
            elif cfg.strategy == "topk":
                token = topk_step(probs, cfg.bootstrap_k, rng)
            else:  # nucleus
                token = nucleus_step(probs, cfg.bootstrap_p, rng)
            record = StepRecord(token=token, prob=float(probs[token]))

        generated.append(token)
        records.append(record)
        if token == info.eou_token_id:
            stop_reason = "eou"
            break

    return GenerationResult(
        tokens=generated,
        per_step=records,
        stop_reason=stop_reason,
        elapsed=time.perf_counter() - t0,
    )
