"""Final translation: blend unified-static and mapped-anchor similarities.

The score of a candidate y for a query x is

    S = sim(u_x, u_y) + lambda * sim(a_x, a_y)

with cosine similarity by default (CSLS optionally for either term).
lambda is chosen unsupervised: each grid point is scored by the fraction
of validation words that survive a forward + backward translation round
trip, and the best-scoring (smallest on ties) grid point wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .retrieval import DEFAULT_CSLS_K, METRICS, RetrievalResult, cosine, score_rows
from .spring import UnifiedSpace
from .store import EmbeddingSpace

MISSING_ANCHOR_POLICIES = ("static-only-fallback", "skip")
DEFAULT_LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass
class InterpolationConfig:
    lambda_weight: float = 0.5
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    metric: str = "cosine"
    missing_anchor_policy: str = "static-only-fallback"
    csls_k: int = DEFAULT_CSLS_K

    def __post_init__(self) -> None:
        if self.lambda_weight < 0.0:
            raise ValueError("lambda must be non-negative")
        if not self.lambda_grid:
            raise ValueError("lambda grid must be nonempty")
        if list(self.lambda_grid) != sorted(self.lambda_grid):
            raise ValueError("lambda grid must be sorted")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric '{self.metric}'")
        if self.missing_anchor_policy not in MISSING_ANCHOR_POLICIES:
            raise ValueError(f"unknown missing-anchor policy '{self.missing_anchor_policy}'")


def interpolated_score(
    u_x: np.ndarray,
    u_y: np.ndarray,
    a_x: np.ndarray,
    a_y: np.ndarray,
    lambda_weight: float,
) -> float:
    return cosine(u_x, u_y) + lambda_weight * cosine(a_x, a_y)


@dataclass
class InterpolationTerms:
    """Pre-computed similarity terms shared by translate and tune_lambda.

    ``static`` covers the full unified vocabularies; ``anchor`` is scattered
    from the anchor spaces into the same index frame, with ``anchor_known``
    marking (query, candidate) cells where both sides have anchors.
    """

    src_words: tuple[str, ...]
    tgt_words: tuple[str, ...]
    static: np.ndarray
    anchor: np.ndarray
    anchor_known: np.ndarray
    src_anchored: np.ndarray = field(repr=False)
    tgt_anchored: np.ndarray = field(repr=False)

    def combined(self, lambda_weight: float, policy: str) -> np.ndarray:
        scores = self.static + lambda_weight * self.anchor
        if policy == "skip":
            # Candidates without anchors are dropped from the ranking for
            # queries that do have one; queries without anchors fall back
            # to static-only scores over all candidates.
            mask = self.src_anchored[:, None] & ~self.tgt_anchored[None, :]
            scores = np.where(mask, -np.inf, scores)
        return scores

    def transposed(self) -> "InterpolationTerms":
        """The same terms with query and candidate roles swapped.

        Valid for cosine trivially and for CSLS because swapping roles
        transposes the CSLS matrix.
        """
        return InterpolationTerms(
            src_words=self.tgt_words,
            tgt_words=self.src_words,
            static=self.static.T,
            anchor=self.anchor.T,
            anchor_known=self.anchor_known.T,
            src_anchored=self.tgt_anchored,
            tgt_anchored=self.src_anchored,
        )


def build_terms(
    unified_src: UnifiedSpace,
    unified_tgt: UnifiedSpace,
    anchors_src: EmbeddingSpace | None,
    anchors_tgt: EmbeddingSpace | None,
    metric: str = "cosine",
    csls_k: int = DEFAULT_CSLS_K,
) -> InterpolationTerms:
    src_space = unified_src.space
    tgt_space = unified_tgt.space
    static = score_rows(src_space.matrix, tgt_space.matrix, metric=metric, k=csls_k)
    n_src, n_tgt = static.shape
    anchor = np.zeros_like(static)
    src_anchored = np.zeros(n_src, dtype=bool)
    tgt_anchored = np.zeros(n_tgt, dtype=bool)
    if anchors_src is not None and anchors_tgt is not None and len(anchors_src) and len(anchors_tgt):
        anchor_scores = score_rows(
            anchors_src.matrix, anchors_tgt.matrix, metric=metric, k=min(csls_k, len(anchors_src), len(anchors_tgt))
        )
        src_rows = [src_space.vocab.position(w) for w in anchors_src.vocab.words if w in src_space.vocab]
        src_anchor_rows = [i for i, w in enumerate(anchors_src.vocab.words) if w in src_space.vocab]
        tgt_rows = [tgt_space.vocab.position(w) for w in anchors_tgt.vocab.words if w in tgt_space.vocab]
        tgt_anchor_rows = [j for j, w in enumerate(anchors_tgt.vocab.words) if w in tgt_space.vocab]
        if src_rows and tgt_rows:
            sub = anchor_scores[np.ix_(src_anchor_rows, tgt_anchor_rows)]
            anchor[np.ix_(src_rows, tgt_rows)] = sub
            src_anchored[src_rows] = True
            tgt_anchored[tgt_rows] = True
    anchor_known = src_anchored[:, None] & tgt_anchored[None, :]
    return InterpolationTerms(
        src_words=src_space.vocab.words,
        tgt_words=tgt_space.vocab.words,
        static=static,
        anchor=anchor,
        anchor_known=anchor_known,
        src_anchored=src_anchored,
        tgt_anchored=tgt_anchored,
    )


def _ranked(words: tuple[str, ...], scores: np.ndarray, top_n: int | None) -> list[tuple[str, float]]:
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    ranked = [(words[j], float(scores[j])) for j in order if np.isfinite(scores[j])]
    return ranked[:top_n] if top_n is not None else ranked


def translate(
    word: str,
    unified_src: UnifiedSpace,
    unified_tgt: UnifiedSpace,
    anchors_src: EmbeddingSpace | None,
    anchors_tgt: EmbeddingSpace | None,
    config: InterpolationConfig | None = None,
    top_n: int | None = None,
) -> RetrievalResult:
    """Rank every target candidate for one source word, ties to lowest index."""
    config = config or InterpolationConfig()
    if word not in unified_src.space.vocab:
        raise KeyError(f"word {word!r} absent from the source space")
    terms = build_terms(
        unified_src, unified_tgt, anchors_src, anchors_tgt,
        metric=config.metric, csls_k=config.csls_k,
    )
    scores = terms.combined(config.lambda_weight, config.missing_anchor_policy)
    row = unified_src.space.vocab.position(word)
    return RetrievalResult(query=word, candidates=_ranked(terms.tgt_words, scores[row], top_n))


def translate_all(
    words: list[str],
    unified_src: UnifiedSpace,
    unified_tgt: UnifiedSpace,
    anchors_src: EmbeddingSpace | None,
    anchors_tgt: EmbeddingSpace | None,
    config: InterpolationConfig | None = None,
    top_n: int | None = 1,
) -> dict[str, RetrievalResult]:
    """Batch variant of translate; words missing from the source space are skipped."""
    config = config or InterpolationConfig()
    terms = build_terms(
        unified_src, unified_tgt, anchors_src, anchors_tgt,
        metric=config.metric, csls_k=config.csls_k,
    )
    scores = terms.combined(config.lambda_weight, config.missing_anchor_policy)
    results: dict[str, RetrievalResult] = {}
    vocab = unified_src.space.vocab
    for word in words:
        if word not in vocab:
            continue
        row = vocab.position(word)
        results[word] = RetrievalResult(
            query=word, candidates=_ranked(terms.tgt_words, scores[row], top_n)
        )
    return results


def tune_lambda(
    validation_words: list[str],
    unified_src: UnifiedSpace,
    unified_tgt: UnifiedSpace,
    anchors_src: EmbeddingSpace | None,
    anchors_tgt: EmbeddingSpace | None,
    grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID,
    metric: str = "cosine",
    missing_anchor_policy: str = "static-only-fallback",
    csls_k: int = DEFAULT_CSLS_K,
) -> float:
    """Pick the grid point with the best forward/backward round-trip retention.

    For each lambda, every validation word x is translated to y', then y'
    is translated back; lambda scores the fraction of words with x' == x.
    Ties break toward the smaller lambda.
    """
    if not grid:
        raise ValueError("lambda grid must be nonempty")
    grid = tuple(sorted(grid))
    vocab = unified_src.space.vocab
    rows = [vocab.position(w) for w in validation_words if w in vocab]
    if not rows:
        raise ValueError("empty validation set")
    terms = build_terms(
        unified_src, unified_tgt, anchors_src, anchors_tgt, metric=metric, csls_k=csls_k
    )
    reverse_terms = terms.transposed()
    best_lambda = grid[0]
    best_retention = -1.0
    for lam in grid:
        forward = np.argmax(terms.combined(lam, missing_anchor_policy), axis=1)
        backward = np.argmax(reverse_terms.combined(lam, missing_anchor_policy), axis=1)
        kept = sum(1 for row in rows if backward[forward[row]] == row)
        retention = kept / len(rows)
        if retention > best_retention:
            best_retention = retention
            best_lambda = lam
    return best_lambda
