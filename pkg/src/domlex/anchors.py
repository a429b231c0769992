"""Per-word average anchors built from per-occurrence contextual vectors.

Occurrence dump format (UTF-8 text):
    line 1:  "#dim <d> layer <L>"
    then one record per line:  "<word>\\t<sentence_id>\\t<v1> ... <vd>"

A word's anchor is the arithmetic mean of its occurrence vectors; words
with more occurrences than ``max_contexts`` are averaged over a seeded
uniform sample without replacement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .align import AlignmentModel, SelfLearnConfig, map_space, self_learn
from .errors import DataFormatError
from .seeding import derived_rng
from .store import (
    DEFAULT_NORMALIZATION,
    KIND_CONTEXTUAL_ANCHOR,
    EmbeddingSpace,
    Vocabulary,
    format_float,
    normalize,
)

DEFAULT_MAX_CONTEXTS = 10


@dataclass
class OccurrenceRecord:
    word: str
    sentence_id: int
    vector: np.ndarray


@dataclass
class OccurrenceDump:
    """All contextual vectors captured for one language, one model layer."""

    records: list[OccurrenceRecord]
    layer: int
    dim: int

    def __post_init__(self) -> None:
        self._by_word: dict[str, list[int]] = {}
        for pos, record in enumerate(self.records):
            if record.vector.shape != (self.dim,):
                raise ValueError(
                    f"record {pos} has dimension {record.vector.shape}, expected {self.dim}"
                )
            if not np.all(np.isfinite(record.vector)):
                raise ValueError(f"record {pos} contains non-finite values")
            if record.sentence_id < 0:
                raise ValueError(f"record {pos} has negative sentence id")
            self._by_word.setdefault(record.word, []).append(pos)

    def __len__(self) -> int:
        return len(self.records)

    def words(self) -> list[str]:
        return list(self._by_word)

    def occurrence_count(self, word: str) -> int:
        return len(self._by_word.get(word, ()))

    def vectors_for(self, word: str) -> np.ndarray:
        positions = self._by_word.get(word)
        if not positions:
            raise KeyError(f"word {word!r} absent from dump")
        return np.vstack([self.records[pos].vector for pos in positions])


def load_occurrence_dump(path: str) -> OccurrenceDump:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        fields = header.split(" ")
        if len(fields) != 4 or fields[0] != "#dim" or fields[2] != "layer":
            raise DataFormatError(f"{path}: malformed dump header {header!r}")
        try:
            dim, layer = int(fields[1]), int(fields[3])
        except ValueError as exc:
            raise DataFormatError(f"{path}: malformed dump header {header!r}") from exc
        records: list[OccurrenceRecord] = []
        for lineno, line in enumerate(handle, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            word, sid_text, values = parts
            try:
                sentence_id = int(sid_text)
                vector = np.array(values.split(" "), dtype=np.float64)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: unparsable record") from exc
            if vector.shape != (dim,):
                raise DataFormatError(
                    f"{path}:{lineno}: {vector.shape[0]} values, expected {dim}"
                )
            if not np.all(np.isfinite(vector)):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            records.append(OccurrenceRecord(word=word, sentence_id=sentence_id, vector=vector))
    return OccurrenceDump(records=records, layer=layer, dim=dim)


def save_occurrence_dump(dump: OccurrenceDump, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"#dim {dump.dim} layer {dump.layer}\n")
        for record in dump.records:
            values = " ".join(format_float(v) for v in record.vector)
            handle.write(f"{record.word}\t{record.sentence_id}\t{values}\n")


def average_anchor(
    word: str,
    dump: OccurrenceDump,
    max_contexts: int = DEFAULT_MAX_CONTEXTS,
    rng_seed: int = 0,
) -> np.ndarray:
    """Mean occurrence vector, sampled down to max_contexts when needed.

    The sampling rng is keyed by (seed, word) so results are independent
    of the order words are processed in.
    """
    if max_contexts < 1:
        raise ValueError("max_contexts must be positive")
    vectors = dump.vectors_for(word)
    count = vectors.shape[0]
    if count <= max_contexts:
        return vectors.mean(axis=0)
    rng = derived_rng(rng_seed, "anchor", word)
    chosen = rng.choice(count, size=max_contexts, replace=False)
    return vectors[chosen].mean(axis=0)


@dataclass
class AnchorTable:
    """Anchor space over the covered words plus the names left unanchored."""

    space: EmbeddingSpace
    occurrence_counts: dict[str, int]
    unanchored: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for word in self.space.vocab.words:
            if self.occurrence_counts.get(word, 0) < 1:
                raise ValueError(f"anchored word {word!r} has no recorded occurrences")


def build_anchor_table(
    dump: OccurrenceDump,
    vocab: Vocabulary,
    max_contexts: int = DEFAULT_MAX_CONTEXTS,
    rng_seed: int = 0,
) -> AnchorTable:
    """One anchor per vocabulary word present in the dump.

    Words without occurrences are listed as unanchored rather than
    zero-filled, so they never poison cosine scores downstream.
    """
    if len(dump) == 0:
        raise ValueError("occurrence dump is empty")
    anchored: list[str] = []
    unanchored: list[str] = []
    rows: list[np.ndarray] = []
    counts: dict[str, int] = {}
    for word in vocab.words:
        if dump.occurrence_count(word) == 0:
            unanchored.append(word)
            continue
        anchored.append(word)
        counts[word] = dump.occurrence_count(word)
        rows.append(average_anchor(word, dump, max_contexts=max_contexts, rng_seed=rng_seed))
    if not anchored:
        raise ValueError("no vocabulary word occurs in the dump")
    space = EmbeddingSpace(
        vocab=Vocabulary.from_words(anchored),
        matrix=np.vstack(rows),
        kind=KIND_CONTEXTUAL_ANCHOR,
    )
    return AnchorTable(space=space, occurrence_counts=counts, unanchored=tuple(unanchored))


def align_anchors(
    src: AnchorTable,
    tgt: AnchorTable,
    config: SelfLearnConfig | None = None,
    normalization: str = DEFAULT_NORMALIZATION,
) -> tuple[EmbeddingSpace, EmbeddingSpace, AlignmentModel]:
    """Align the two anchor spaces and return both mapped plus the model."""
    if len(src.space) == 0 or len(tgt.space) == 0:
        raise ValueError("anchor tables must be nonempty")
    if src.space.dim != tgt.space.dim:
        raise ValueError("anchor tables differ in dimension")
    src_norm = normalize(src.space, normalization)
    tgt_norm = normalize(tgt.space, normalization)
    model = self_learn(src_norm, tgt_norm, config)
    return (
        map_space(src_norm, model, "src"),
        map_space(tgt_norm, model, "tgt"),
        model,
    )
