"""Corpus diversity metrics, per-response cosine diagnostics, and heatmap export."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import GenerationResult, TokenId
from .errors import ArgumentError
from .scoring import cosine, response_representation


def distinct_n(responses: Sequence[Sequence[TokenId]], n: int) -> float:
    """Unique n-grams over total n-grams, pooled across all responses.

    Responses shorter than n contribute nothing; an empty pool yields 0.
    """
    if not isinstance(n, int) or n < 1:
        raise ArgumentError(f"n must be an integer >= 1, got {n!r}")
    total = 0
    unique: set[tuple[int, ...]] = set()
    for resp in responses:
        toks = [int(t) for t in resp]
        for i in range(len(toks) - n + 1):
            unique.add(tuple(toks[i : i + n]))
            total += 1
    return len(unique) / total if total else 0.0


def similarity_heatmap(hiddens: Sequence) -> np.ndarray:
    """L x L matrix of pairwise cosines; symmetric with unit diagonal."""
    vectors = [np.asarray(h, dtype=float) for h in hiddens]
    if not vectors:
        raise ArgumentError("hiddens must be non-empty")
    n = len(vectors)
    matrix = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            matrix[i, j] = matrix[j, i] = cosine(vectors[i], vectors[j])
    return matrix


@dataclass(frozen=True)
class Diagnostics:
    """How concentrated the response is and how far it sits from the context.

    ``mean_intra_response_cosine`` averages the C(L,2) unordered pairs of
    generated-token hiddens (1.0 by convention when L = 1);
    ``mean_context_cosine`` averages the cosine of the final response
    representation against each utterance representation.
    """

    mean_intra_response_cosine: float
    mean_context_cosine: float
    per_step_trace: list[tuple[Optional[float], Optional[float], Optional[float]]]


def diagnostics(
    result: GenerationResult, hiddens: Sequence, utterance_reps: Sequence
) -> Diagnostics:
    if not result.tokens:
        raise ArgumentError("result has no tokens")
    vectors = [np.asarray(h, dtype=float) for h in hiddens]
    if not vectors:
        raise ArgumentError("hiddens must be non-empty")
    n = len(vectors)
    if n == 1:
        intra = 1.0
    else:
        sims = [cosine(vectors[i], vectors[j]) for i in range(n) for j in range(i + 1, n)]
        intra = sum(sims) / len(sims)
    rep = response_representation(vectors)
    ctx_sims = [cosine(rep, u) for u in utterance_reps]
    context = sum(ctx_sims) / len(ctx_sims)
    trace = [(r.p_value, r.i_value, r.score) for r in result.per_step]
    return Diagnostics(
        mean_intra_response_cosine=intra,
        mean_context_cosine=context,
        per_step_trace=trace,
    )


def write_heatmap_csv(path: str | Path, labels: Sequence[str], matrix: np.ndarray) -> None:
    """First row: token labels; each following row: label then L values, 6 decimals."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(labels):
        raise ArgumentError(f"matrix shape {m.shape} does not match {len(labels)} labels")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(labels))
        for label, row in zip(labels, m):
            writer.writerow([label] + [f"{x:.6f}" for x in row])


def read_heatmap_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Inverse of write_heatmap_csv; returns (labels, matrix)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ArgumentError("heatmap file is empty")
    labels = rows[0]
    matrix = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    if matrix.shape != (len(labels), len(labels)):
        raise ArgumentError(f"heatmap body shape {matrix.shape} does not match header")
    return labels, matrix
