"""Synthetic space builders shared across the test modules."""

import numpy as np

from domlex.store import EmbeddingSpace, Vocabulary


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal matrix via QR of a Gaussian sample."""
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def gaussian_space(n: int, dim: int, seed: int, prefix: str = "w") -> EmbeddingSpace:
    rng = np.random.default_rng(seed)
    words = [f"{prefix}{i:04d}" for i in range(n)]
    return EmbeddingSpace(
        vocab=Vocabulary.from_words(words), matrix=rng.normal(size=(n, dim))
    )


def rotated_copy(space: EmbeddingSpace, q: np.ndarray, prefix: str = "t") -> EmbeddingSpace:
    words = [f"{prefix}{i:04d}" for i in range(len(space))]
    return EmbeddingSpace(
        vocab=Vocabulary.from_words(words), matrix=space.matrix @ q
    )
