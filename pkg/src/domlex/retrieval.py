"""Nearest-neighbor and CSLS retrieval over mapped spaces, plus P@1 scoring.

CSLS subtracts each side's mean local neighborhood similarity from twice
the cosine, which counteracts hubness in high-dimensional retrieval.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .store import BilingualDictionary, EmbeddingSpace

METRICS = ("cosine", "csls")
DEFAULT_CSLS_K = 10


@dataclass
class InducedDictionary:
    """Row-index translation pairs induced by retrieval.

    ``n_src``/``n_tgt`` record the vocabulary sizes of the spaces the
    indices point into; they default to the smallest bound consistent
    with the pairs.
    """

    pairs: list[tuple[int, int, float]]
    direction: str = "src->tgt"
    n_src: int | None = None
    n_tgt: int | None = None

    def __post_init__(self) -> None:
        max_src = -1
        max_tgt = -1
        for src, tgt, score in self.pairs:
            if src < 0 or tgt < 0:
                raise ValueError("negative row index in induced dictionary")
            if not np.isfinite(score):
                raise ValueError("non-finite score in induced dictionary")
            max_src = max(max_src, src)
            max_tgt = max(max_tgt, tgt)
        if self.n_src is None:
            self.n_src = max_src + 1
        if self.n_tgt is None:
            self.n_tgt = max_tgt + 1
        if max_src >= self.n_src or max_tgt >= self.n_tgt:
            raise ValueError("induced pair index out of bounds")

    def __len__(self) -> int:
        return len(self.pairs)

    def src_indices(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs], dtype=np.intp)

    def tgt_indices(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs], dtype=np.intp)

    def scores(self) -> np.ndarray:
        return np.array([p[2] for p in self.pairs], dtype=np.float64)


@dataclass
class RetrievalResult:
    """Ranked translation candidates for one query word."""

    query: str
    candidates: list[tuple[str, float]]

    def __post_init__(self) -> None:
        scores = [score for _, score in self.candidates]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValueError("candidate scores must be non-increasing")
        words = [word for word, _ in self.candidates]
        if len(set(words)) != len(words):
            raise ValueError("duplicate candidate words")

    def top(self) -> str:
        return self.candidates[0][0]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("cosine requires equal dimensions")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize zero-norm rows")
    return matrix / norms


def _topk_mean(sim: np.ndarray, k: int, axis: int) -> np.ndarray:
    top = np.partition(sim, sim.shape[axis] - k, axis=axis)
    if axis == 1:
        return top[:, -k:].mean(axis=1)
    return top[-k:, :].mean(axis=0)


def csls(query_rows: np.ndarray, candidate_rows: np.ndarray, k: int = DEFAULT_CSLS_K) -> np.ndarray:
    """Full CSLS score matrix: 2*cos(x, y) - r_T(x) - r_S(y).

    r_T(x) is the mean cosine of query x to its k nearest candidates and
    r_S(y) the mean cosine of candidate y to its k nearest queries.  Rows
    must already be unit length (cosines are computed as dot products).
    """
    queries = np.asarray(query_rows, dtype=np.float64)
    candidates = np.asarray(candidate_rows, dtype=np.float64)
    if queries.ndim != 2 or candidates.ndim != 2 or queries.shape[1] != candidates.shape[1]:
        raise ValueError("query and candidate matrices must share one dimension")
    if k < 1 or k > candidates.shape[0] or k > queries.shape[0]:
        raise ValueError(f"csls k={k} out of range for {queries.shape[0]} queries, {candidates.shape[0]} candidates")
    for name, rows in (("query", queries), ("candidate", candidates)):
        norms = np.linalg.norm(rows, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            raise ValueError(f"{name} rows must be unit length for csls")
    sim = queries @ candidates.T
    r_t = _topk_mean(sim, k, axis=1)
    r_s = _topk_mean(sim, k, axis=0)
    return 2.0 * sim - r_t[:, None] - r_s[None, :]


def score_rows(
    query_rows: np.ndarray,
    candidate_rows: np.ndarray,
    metric: str = "cosine",
    k: int = DEFAULT_CSLS_K,
) -> np.ndarray:
    """Similarity matrix under the chosen metric; rows are normalized here."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric '{metric}'")
    queries = _unit_rows(np.asarray(query_rows, dtype=np.float64))
    candidates = _unit_rows(np.asarray(candidate_rows, dtype=np.float64))
    if metric == "cosine":
        return queries @ candidates.T
    return csls(queries, candidates, k=k)


def induce(
    src_mapped: EmbeddingSpace,
    tgt_mapped: EmbeddingSpace,
    metric: str = "cosine",
    k: int = DEFAULT_CSLS_K,
) -> InducedDictionary:
    """Best-scoring target row per source row; ties break to the lowest index."""
    if len(tgt_mapped) == 0:
        raise ValueError("cannot induce against an empty target space")
    if src_mapped.dim != tgt_mapped.dim:
        raise ValueError("source and target spaces differ in dimension")
    scores = score_rows(src_mapped.matrix, tgt_mapped.matrix, metric=metric, k=k)
    best = np.argmax(scores, axis=1)
    pairs = [
        (int(i), int(j), float(scores[i, j]))
        for i, j in enumerate(best)
    ]
    return InducedDictionary(
        pairs=pairs,
        direction="src->tgt",
        n_src=len(src_mapped),
        n_tgt=len(tgt_mapped),
    )


@dataclass
class EvalReport:
    """P@1 outcome against a gold dictionary.

    Gold sources missing from the predictions are reported as skipped OOV
    and excluded from the P@1 denominator; both counts are kept so either
    accounting convention can be recomputed.
    """

    p_at_1: float
    evaluated_count: int
    skipped_oov_count: int
    outcomes: list[tuple[str, str | None, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_at_1 <= 1.0:
            raise ValueError("p_at_1 must lie in [0, 1]")
        if self.evaluated_count < 0 or self.skipped_oov_count < 0:
            raise ValueError("counts must be non-negative")

    def summary(self) -> dict:
        return {
            "p_at_1": self.p_at_1,
            "evaluated": self.evaluated_count,
            "skipped": self.skipped_oov_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def to_tsv(self) -> str:
        lines = [f"{src}\t{status}\t{pred if pred is not None else '-'}"
                 for src, pred, status in self.outcomes]
        return "\n".join(lines) + ("\n" if lines else "")


def evaluate_p_at_1(predictions: Mapping[str, str], gold: BilingualDictionary) -> EvalReport:
    """Count a prediction correct iff it is in the gold target set."""
    outcomes: list[tuple[str, str | None, str]] = []
    correct = 0
    evaluated = 0
    skipped = 0
    for source, targets in gold.entries.items():
        predicted = predictions.get(source)
        if predicted is None:
            skipped += 1
            outcomes.append((source, None, "oov"))
            continue
        evaluated += 1
        if predicted in targets:
            correct += 1
            outcomes.append((source, predicted, "correct"))
        else:
            outcomes.append((source, predicted, "wrong"))
    p_at_1 = correct / evaluated if evaluated else 0.0
    return EvalReport(
        p_at_1=p_at_1,
        evaluated_count=evaluated,
        skipped_oov_count=skipped,
        outcomes=outcomes,
    )
