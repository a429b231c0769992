"""Embedding spaces, bilingual dictionaries, and their on-disk formats.

Vector file format (UTF-8 text):
    line 1:  "<count> <dim>"
    lines 2..count+1:  "<word> <v1> ... <vdim>"  (single-space separated)

Dictionary file format (UTF-8 text):
    one "<source>\\t<target>" pair per line; repeated sources merge into
    one entry with several acceptable targets.

Values are written with ``repr`` so that save/load round-trips are exact
at float64 precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DataFormatError

KIND_STATIC = "static"
KIND_CONTEXTUAL_ANCHOR = "contextual-anchor"

NORMALIZATION_SCHEMES = ("unit", "center", "unit-center-unit")
DEFAULT_NORMALIZATION = "unit-center-unit"


def format_float(value: float) -> str:
    """Shortest decimal representation that round-trips in float64."""
    return repr(float(value))


@dataclass(frozen=True)
class Vocabulary:
    """Ordered set of unique tokens with dense 0..n-1 row positions."""

    words: tuple[str, ...]
    index: Mapping[str, int] = field(repr=False)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        ordered = tuple(words)
        index = {word: pos for pos, word in enumerate(ordered)}
        if len(index) != len(ordered):
            raise ValueError("vocabulary contains duplicate tokens")
        return cls(words=ordered, index=index)

    def __post_init__(self) -> None:
        if len(self.index) != len(self.words):
            raise ValueError("index and word list disagree")
        for pos, word in enumerate(self.words):
            if self.index.get(word) != pos:
                raise ValueError(f"index is not the inverse of the word list at {pos}")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def position(self, word: str) -> int:
        return self.index[word]

    def word_at(self, position: int) -> str:
        return self.words[position]


@dataclass
class EmbeddingSpace:
    """A vocabulary plus one dense row vector per word.

    ``normalization_history`` records every normalization step applied, in
    order, so downstream stages can check or replay the pipeline.  The
    matrix is frozen after construction; all transformations return a new
    space.
    """

    vocab: Vocabulary
    matrix: np.ndarray
    kind: str = KIND_STATIC
    normalization_history: tuple[str, ...] = ()
    duplicates_dropped: int = 0

    def __post_init__(self) -> None:
        matrix = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
        if matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-dimensional")
        if matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"matrix has {matrix.shape[0]} rows for {len(self.vocab)} words"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding matrix contains non-finite values")
        if self.normalization_history and self.normalization_history[-1] == "unit":
            norms = np.linalg.norm(matrix, axis=1)
            if matrix.shape[0] and np.max(np.abs(norms - 1.0)) >= 1e-6:
                raise ValueError("history ends with 'unit' but rows are not unit length")
        matrix.flags.writeable = False
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.vocab.position(word)]


def _apply_step(matrix: np.ndarray, step: str) -> np.ndarray:
    if step == "unit":
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            row = int(np.argmin(np.linalg.norm(matrix, axis=1)))
            raise ValueError(f"cannot unit-normalize zero-norm row {row}")
        return matrix / norms
    if step == "center":
        return matrix - matrix.mean(axis=0, keepdims=True)
    raise ValueError(f"unknown normalization step '{step}'")


def normalization_steps(scheme: str) -> tuple[str, ...]:
    if scheme not in NORMALIZATION_SCHEMES:
        raise ValueError(f"unknown normalization scheme '{scheme}'")
    return tuple(scheme.split("-"))


def normalize(space: EmbeddingSpace, scheme: str = DEFAULT_NORMALIZATION) -> EmbeddingSpace:
    """Return a new space with the scheme's steps applied in order."""
    if space.matrix.size == 0:
        raise ValueError("cannot normalize an empty space")
    steps = normalization_steps(scheme)
    matrix = space.matrix
    for step in steps:
        matrix = _apply_step(matrix, step)
    return EmbeddingSpace(
        vocab=space.vocab,
        matrix=matrix,
        kind=space.kind,
        normalization_history=space.normalization_history + steps,
        duplicates_dropped=space.duplicates_dropped,
    )


def load_embeddings(
    path: str,
    expected_dim: int | None = None,
    kind: str = KIND_STATIC,
) -> EmbeddingSpace:
    """Load a text vector file.

    Duplicate words keep their first occurrence; the number of dropped
    lines is recorded on the returned space.
    """
    with open(path, encoding="utf-8") as handle:
        header = handle.readline()
        fields = header.rstrip("\n").split(" ")
        if len(fields) != 2:
            raise DataFormatError(f"{path}: malformed header {header!r}")
        try:
            count, dim = int(fields[0]), int(fields[1])
        except ValueError as exc:
            raise DataFormatError(f"{path}: malformed header {header!r}") from exc
        if count < 0 or dim <= 0:
            raise DataFormatError(f"{path}: malformed header {header!r}")
        if expected_dim is not None and dim != expected_dim:
            raise DataFormatError(
                f"{path}: dimension {dim} does not match expected {expected_dim}"
            )

        words: list[str] = []
        seen: dict[str, int] = {}
        rows: list[np.ndarray] = []
        duplicates = 0
        for lineno in range(2, count + 2):
            line = handle.readline()
            if line == "":
                raise DataFormatError(f"{path}: truncated after {lineno - 2} of {count} rows")
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {dim + 1} fields, found {len(parts)}"
                )
            try:
                vector = np.array(parts[1:], dtype=np.float64)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: unparsable value") from exc
            if not np.all(np.isfinite(vector)):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            word = parts[0]
            if word in seen:
                duplicates += 1
                continue
            seen[word] = len(words)
            words.append(word)
            rows.append(vector)
        trailer = handle.read()
        if trailer.strip():
            raise DataFormatError(f"{path}: unexpected content after {count} rows")

    matrix = np.vstack(rows) if rows else np.empty((0, dim), dtype=np.float64)
    return EmbeddingSpace(
        vocab=Vocabulary.from_words(words),
        matrix=matrix,
        kind=kind,
        duplicates_dropped=duplicates,
    )


def save_embeddings(space: EmbeddingSpace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(space)} {space.dim}\n")
        for word, row in zip(space.vocab.words, space.matrix):
            values = " ".join(format_float(v) for v in row)
            handle.write(f"{word} {values}\n")


@dataclass
class BilingualDictionary:
    """Source word -> acceptable target words, in first-seen order.

    Target collections behave as sets for membership but keep file order
    so that seeded random choices over them are reproducible.
    """

    entries: dict[str, tuple[str, ...]]
    name: str = "seed"

    def __post_init__(self) -> None:
        for source, targets in self.entries.items():
            _check_token(source)
            if not targets:
                raise ValueError(f"empty target set for {source!r}")
            for target in targets:
                _check_token(target)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, source: str) -> bool:
        return source in self.entries

    def targets(self, source: str) -> tuple[str, ...]:
        return self.entries[source]

    def pairs(self) -> Iterable[tuple[str, str]]:
        for source, targets in self.entries.items():
            for target in targets:
                yield source, target


def _check_token(token: str) -> None:
    if not token:
        raise ValueError("empty token")
    if any(ch.isspace() for ch in token):
        raise ValueError(f"token {token!r} contains whitespace")


def load_dictionary(path: str, name: str = "seed") -> BilingualDictionary:
    entries: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(
                    f"{path}:{lineno}: expected exactly one tab, found {len(parts) - 1}"
                )
            source, target = parts
            if not source or not target:
                raise DataFormatError(f"{path}:{lineno}: empty field")
            bucket = entries.setdefault(source, [])
            if target not in bucket:
                bucket.append(target)
    frozen = {source: tuple(targets) for source, targets in entries.items()}
    try:
        return BilingualDictionary(entries=frozen, name=name)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def save_dictionary(dictionary: BilingualDictionary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for source, target in dictionary.pairs():
            handle.write(f"{source}\t{target}\n")
