"""The numeric heart of the decoder: cosine-based proximity and isotropy terms.

All functions are pure. Candidate ties anywhere in the package are broken by
ascending token id, so scores are compared as exact reals.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import StrategyConfig
from .errors import ArgumentError, DegenerateVectorError, DimensionError

DEGENERATE_NORM = 1e-12


def cosine(a, b) -> float:
    """dot(a,b) / (|a||b|), clamped into [-1, 1] to absorb rounding."""
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.ndim != 1 or vb.ndim != 1 or va.shape != vb.shape:
        raise DimensionError(f"vector shapes differ: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na <= DEGENERATE_NORM or nb <= DEGENERATE_NORM:
        raise DegenerateVectorError(f"near-zero norm ({na}, {nb})")
    return float(min(1.0, max(-1.0, float(va @ vb) / (na * nb))))


def response_representation(
    generated_hiddens: Sequence, candidate=None
) -> np.ndarray:
    """Mean of the generated-token hidden states, optionally with a candidate folded in.

    The divisor is the count of vectors averaged, so the result is the
    undergoing response representation as it would stand after accepting the
    candidate.
    """
    vectors = [np.asarray(h, dtype=float) for h in generated_hiddens]
    if candidate is not None:
        vectors.append(np.asarray(candidate, dtype=float))
    if not vectors:
        raise ArgumentError("need at least one hidden vector or a candidate")
    shape = vectors[0].shape
    if any(v.shape != shape for v in vectors):
        raise DimensionError("hidden vectors have mixed lengths")
    return np.mean(np.stack(vectors), axis=0)


def proximal_value(candidate_hidden, generated_hiddens: Sequence) -> float:
    """Mean cosine of the candidate to each already-generated token's hidden state.

    Defined as 0.0 for an empty history (the very first step when no
    bootstrap ran).
    """
    if len(generated_hiddens) == 0:
        return 0.0
    sims = [cosine(candidate_hidden, h) for h in generated_hiddens]
    return sum(sims) / len(sims)


def isotropic_value(response_rep, utterance_reps: Sequence) -> float:
    """Mean cosine of the response representation to each utterance representation."""
    if len(utterance_reps) == 0:
        raise ArgumentError("utterance_reps must be non-empty")
    sims = [cosine(response_rep, u) for u in utterance_reps]
    return sum(sims) / len(sims)


def ips_score(prob: float, p_value: float, i_value: float, cfg: StrategyConfig) -> float:
    """alpha * prob + (1 - alpha) * penalty.

    penalty_form "eq5" uses (p_value - i_value); "beta" uses
    (1 - beta) * p_value - beta * i_value, which at beta = 0.5 halves the
    penalty scale relative to eq5.
    """
    if cfg.penalty_form == "beta":
        penalty = (1.0 - cfg.beta) * p_value - cfg.beta * i_value
    else:
        penalty = p_value - i_value
    return cfg.alpha * prob + (1.0 - cfg.alpha) * penalty


def degeneration_penalty(candidate_hidden, prefix_hiddens: Sequence) -> float:
    """Maximum cosine of the candidate to any prefix token's hidden state."""
    if len(prefix_hiddens) == 0:
        raise ArgumentError("prefix_hiddens must be non-empty")
    return max(cosine(candidate_hidden, h) for h in prefix_hiddens)
