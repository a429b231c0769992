"""Dictionary-based code switching with domain-aware replacement strategies.

Words are classified general vs. domain by comparing relative frequencies
across a general and a domain corpus (general iff F_G/G >= F_D/D, decided
with exact integer arithmetic).  Per sentence, a seeded draw picks one of
two paths:

    r < alpha        random path: every dictionary-covered token is
                     replaced independently with probability beta
    otherwise        strategy path: if the sentence's domain-token ratio
                     reaches gamma, every covered token is replaced;
                     below the threshold the sentence is left unchanged

All randomness is keyed by (seed, sentence index, token index), so
streaming and batch runs produce byte-identical output.  Whitespace and
untouched tokens are preserved exactly.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator

from .seeding import uniform01
from .store import BilingualDictionary

GENERAL = "general"
DOMAIN = "domain"

_TOKEN_SPLIT = re.compile(r"(\s+)")


@dataclass
class FrequencyTable:
    """Word counts and totals for the general and domain corpora."""

    general_counts: Counter
    general_total: int
    domain_counts: Counter
    domain_total: int

    def __post_init__(self) -> None:
        if self.general_total <= 0 or self.domain_total <= 0:
            raise ValueError("corpus totals must be positive")
        if sum(self.general_counts.values()) != self.general_total:
            raise ValueError("general counts do not sum to the total")
        if sum(self.domain_counts.values()) != self.domain_total:
            raise ValueError("domain counts do not sum to the total")


def build_frequency_table(
    general_corpus: Iterable[str], domain_corpus: Iterable[str]
) -> FrequencyTable:
    """Whitespace-token counts per corpus; raises if either corpus is empty."""
    general = Counter()
    for sentence in general_corpus:
        general.update(sentence.split())
    domain = Counter()
    for sentence in domain_corpus:
        domain.update(sentence.split())
    if not general or not domain:
        raise ValueError("both corpora must contain at least one token")
    return FrequencyTable(
        general_counts=general,
        general_total=sum(general.values()),
        domain_counts=domain,
        domain_total=sum(domain.values()),
    )


def classify_word(word: str, table: FrequencyTable) -> str:
    """General iff the general relative frequency is at least the domain one."""
    f_general = table.general_counts.get(word, 0)
    f_domain = table.domain_counts.get(word, 0)
    # Cross-multiplied to keep the >= boundary exact.
    if f_general * table.domain_total >= f_domain * table.general_total:
        return GENERAL
    return DOMAIN


def domain_ratio(sentence: list[str], table: FrequencyTable) -> float:
    if not sentence:
        raise ValueError("cannot classify an empty sentence")
    domain_count = sum(1 for token in sentence if classify_word(token, table) == DOMAIN)
    return domain_count / len(sentence)


@dataclass
class CodeSwitchConfig:
    alpha: float = 0.5  # sentence replace ratio
    beta: float = 0.5  # per-token replacement ratio on the random path
    gamma: float = 0.5  # domain-ratio threshold on the strategy path
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class SwitchReport:
    sentences_seen: int = 0
    sentences_random_path: int = 0
    sentences_full_path: int = 0
    tokens_seen: int = 0
    tokens_dictionary_covered: int = 0
    tokens_replaced: int = 0

    def __post_init__(self) -> None:
        if not (
            self.tokens_replaced
            <= self.tokens_dictionary_covered
            <= self.tokens_seen
        ):
            raise ValueError("token counters out of order")

    def summary(self) -> dict:
        return {
            "sentences_seen": self.sentences_seen,
            "sentences_random_path": self.sentences_random_path,
            "sentences_full_path": self.sentences_full_path,
            "tokens_seen": self.tokens_seen,
            "tokens_dictionary_covered": self.tokens_dictionary_covered,
            "tokens_replaced": self.tokens_replaced,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _pick_translation(targets: tuple[str, ...], seed: int, sentence_index: int, token_index: int) -> str:
    if len(targets) == 1:
        return targets[0]
    draw = uniform01(seed, "pick", sentence_index, token_index)
    return targets[int(draw * len(targets))]


def switch_sentence(
    line: str,
    sentence_index: int,
    dictionary: BilingualDictionary,
    table: FrequencyTable,
    config: CodeSwitchConfig,
    report: SwitchReport,
) -> str:
    """Apply the per-sentence path choice and token replacements to one line."""
    report.sentences_seen += 1
    pieces = _TOKEN_SPLIT.split(line)
    token_slots = [pos for pos, piece in enumerate(pieces) if piece and not piece.isspace()]
    tokens = [pieces[pos] for pos in token_slots]
    report.tokens_seen += len(tokens)

    random_path = uniform01(config.rng_seed, "sentence", sentence_index) < config.alpha
    replace_all = False
    if random_path:
        report.sentences_random_path += 1
    elif tokens and domain_ratio(tokens, table) >= config.gamma:
        replace_all = True
        report.sentences_full_path += 1

    for token_index, pos in enumerate(token_slots):
        token = pieces[pos]
        if token not in dictionary:
            continue
        report.tokens_dictionary_covered += 1
        if random_path:
            replace = uniform01(config.rng_seed, "token", sentence_index, token_index) < config.beta
        else:
            replace = replace_all
        if replace:
            pieces[pos] = _pick_translation(
                dictionary.targets(token), config.rng_seed, sentence_index, token_index
            )
            report.tokens_replaced += 1
    return "".join(pieces)


def switch_corpus(
    corpus: Iterable[str],
    dictionary: BilingualDictionary,
    table: FrequencyTable,
    config: CodeSwitchConfig,
) -> tuple[list[str], SwitchReport]:
    """Transform every sentence; order and token counts are preserved."""
    if len(dictionary) == 0:
        raise ValueError("replacement dictionary is empty")
    report = SwitchReport()
    output = [
        switch_sentence(line, index, dictionary, table, config, report)
        for index, line in enumerate(corpus)
    ]
    return output, report


def switch_corpus_stream(
    corpus: Iterable[str],
    dictionary: BilingualDictionary,
    table: FrequencyTable,
    config: CodeSwitchConfig,
    report: SwitchReport,
) -> Iterator[str]:
    """Streaming variant; the caller's report is filled in as lines pass through."""
    if len(dictionary) == 0:
        raise ValueError("replacement dictionary is empty")
    for index, line in enumerate(corpus):
        yield switch_sentence(line, index, dictionary, table, config, report)


def switch_corpus_file(
    input_path: str,
    output_path: str,
    dictionary: BilingualDictionary,
    table: FrequencyTable,
    config: CodeSwitchConfig,
) -> SwitchReport:
    report = SwitchReport()
    with open(input_path, encoding="utf-8") as src, open(output_path, "w", encoding="utf-8") as dst:
        lines = (line.rstrip("\n") for line in src)
        for switched in switch_corpus_stream(lines, dictionary, table, config, report):
            dst.write(switched + "\n")
    return report


def read_corpus(path: str) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        return [line.rstrip("\n") for line in handle]
