"""Dump per-occurrence hidden states of a pretrained encoder to a text file.

Output format (the contract consumed by the lexicon toolkit's anchor
builder):

    line 1:  "#dim <d> layer <L>"
    records: "<word>\\t<sentence_id>\\t<v1> ... <vd>"

plus a coverage sidecar "<word>\\t<records_emitted>\\t<occurrences_found>"
per vocabulary word.  Occurrences beyond ``max_sentences`` per word are
sampled without replacement with a seed keyed by (rng_seed, word), and
records are emitted sorted by (word, sentence_id, position) so output is
independent of batching or scheduling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

POOLING_MODES = ("mean", "first")


@dataclass
class ExtractorConfig:
    model: str
    layer: int = 1
    max_sentences: int = 10
    pooling: str = "mean"
    rng_seed: int = 0
    max_length: int = 128

    def __post_init__(self) -> None:
        if self.layer < 0:
            raise ValueError("layer index must be non-negative")
        if self.max_sentences < 1:
            raise ValueError("max_sentences must be positive")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"unknown pooling mode '{self.pooling}'")
        if self.max_length < 4:
            raise ValueError("max_length too small")


def _word_rng(seed: int, word: str) -> np.random.Generator:
    h = hashlib.blake2b(digest_size=8)
    for part in (str(seed), "occurrence-sample", word):
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


@dataclass
class _Occurrence:
    word: str
    sentence_id: int
    position: int  # token position within the sentence


def _locate_occurrences(lines: list[str], vocab: list[str]) -> dict[str, list[_Occurrence]]:
    wanted = set(vocab)
    found: dict[str, list[_Occurrence]] = {word: [] for word in vocab}
    for sentence_id, line in enumerate(lines):
        for position, token in enumerate(line.split()):
            if token in wanted:
                found[token].append(_Occurrence(token, sentence_id, position))
    return found


def _piece_spans(tokenizer, tokens: list[str], max_length: int):
    """Input ids plus, per token position, its piece indices.

    Positions whose pieces were truncated away map to an empty list.
    """
    encoded = tokenizer(
        tokens, is_split_into_words=True, truncation=True, max_length=max_length
    )
    spans: dict[int, list[int]] = {}
    for piece_index, word_index in enumerate(encoded.word_ids(0)):
        if word_index is not None:
            spans.setdefault(word_index, []).append(piece_index)
    return encoded["input_ids"], spans


def extract(
    corpus_path: str,
    vocab: list[str],
    config: ExtractorConfig,
    output_path: str,
    coverage_path: str | None = None,
) -> dict[str, tuple[int, int]]:
    """Write the occurrence dump and coverage sidecar; returns the coverage map."""
    with open(corpus_path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not any(line.strip() for line in lines):
        raise ValueError("corpus is empty")
    if len(set(vocab)) != len(vocab):
        raise ValueError("vocabulary contains duplicates")

    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModel.from_pretrained(config.model)
    model.eval()
    depth = model.config.num_hidden_layers
    if config.layer > depth:
        raise ValueError(f"layer {config.layer} exceeds model depth {depth}")
    for word in vocab:
        if not tokenizer.tokenize(word):
            raise ValueError(f"word {word!r} tokenizes to zero pieces")

    found = _locate_occurrences(lines, vocab)
    selected: list[_Occurrence] = []
    coverage: dict[str, tuple[int, int]] = {}
    for word in vocab:
        occurrences = found[word]
        if len(occurrences) > config.max_sentences:
            rng = _word_rng(config.rng_seed, word)
            chosen = rng.choice(len(occurrences), size=config.max_sentences, replace=False)
            kept = [occurrences[i] for i in sorted(chosen)]
        else:
            kept = occurrences
        selected.extend(kept)
        coverage[word] = (len(kept), len(occurrences))

    # one forward pass per unique sentence, batch-independent by construction
    by_sentence: dict[int, list[_Occurrence]] = {}
    for occ in selected:
        by_sentence.setdefault(occ.sentence_id, []).append(occ)
    vectors: dict[tuple[str, int, int], np.ndarray] = {}
    emitted_counts = {word: 0 for word in vocab}
    with torch.no_grad():
        for sentence_id in sorted(by_sentence):
            tokens = lines[sentence_id].split()
            input_ids, spans = _piece_spans(tokenizer, tokens, config.max_length)
            batch = torch.tensor([input_ids])
            output = model(
                input_ids=batch,
                attention_mask=torch.ones_like(batch),
                output_hidden_states=True,
            )
            hidden = output.hidden_states[config.layer][0]
            for occ in by_sentence[sentence_id]:
                piece_indices = spans.get(occ.position, [])
                if not piece_indices:
                    continue  # truncated away
                pieces = hidden[piece_indices]
                if config.pooling == "mean":
                    pooled = pieces.mean(dim=0)
                else:
                    pooled = pieces[0]
                vectors[(occ.word, occ.sentence_id, occ.position)] = pooled.numpy()
                emitted_counts[occ.word] += 1

    dim = model.config.hidden_size
    keys = sorted(vectors)
    with open(output_path, "w", encoding="utf-8") as handle:
        handle.write(f"#dim {dim} layer {config.layer}\n")
        for word, sentence_id, position in keys:
            values = " ".join(repr(float(v)) for v in vectors[(word, sentence_id, position)])
            handle.write(f"{word}\t{sentence_id}\t{values}\n")

    coverage = {word: (emitted_counts[word], found_count)
                for word, (_, found_count) in coverage.items()}
    sidecar = coverage_path or output_path + ".coverage"
    with open(sidecar, "w", encoding="utf-8") as handle:
        for word in vocab:
            emitted, total = coverage[word]
            handle.write(f"{word}\t{emitted}\t{total}\n")
    return coverage
