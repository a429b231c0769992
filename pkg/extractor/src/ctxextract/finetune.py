"""Reduced-scale masked-LM continuation on a code-switched corpus.

This is an optional preprocessing step before extraction: a few hundred
steps of standard MLM training on switched text, saved as a checkpoint
the extractor can load.  Zero steps copies the base model unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoTokenizer,
    DataCollatorForLanguageModeling,
)


@dataclass
class FinetuneConfig:
    model: str
    steps: int = 100
    batch_size: int = 8
    learning_rate: float = 5e-5
    mask_probability: float = 0.15
    max_length: int = 128
    rng_seed: int = 0
    include_original: bool = False

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0.0 < self.mask_probability < 1.0:
            raise ValueError("mask_probability must lie in (0, 1)")


@dataclass
class FinetuneResult:
    checkpoint_dir: str
    steps_run: int
    final_loss: float | None
    diverged: bool = False


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        return [line.rstrip("\n") for line in handle if line.strip()]


def finetune_with_codeswitch(
    corpus_path: str,
    switched_corpus_path: str,
    config: FinetuneConfig,
    output_dir: str,
) -> FinetuneResult:
    """Continue MLM training on the switched corpus and save a checkpoint.

    The original corpus is mixed in only when ``include_original`` is set.
    A non-finite loss stops training; the parameters from before the
    diverging update are what gets saved.
    """
    lines = _read_lines(switched_corpus_path)
    if config.include_original:
        lines = lines + _read_lines(corpus_path)
    if not lines:
        raise ValueError("no training sentences")

    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModelForMaskedLM.from_pretrained(config.model)
    torch.manual_seed(config.rng_seed)

    steps_run = 0
    final_loss = None
    diverged = False
    if config.steps > 0:
        collator = DataCollatorForLanguageModeling(
            tokenizer=tokenizer, mlm_probability=config.mask_probability
        )
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
        encoded = [
            tokenizer(line, truncation=True, max_length=config.max_length)["input_ids"]
            for line in lines
        ]
        model.train()
        cursor = 0
        for _ in range(config.steps):
            batch_ids = []
            for _ in range(config.batch_size):
                batch_ids.append(torch.tensor(encoded[cursor % len(encoded)]))
                cursor += 1
            batch = collator([{"input_ids": ids} for ids in batch_ids])
            if not bool(batch["labels"].ne(-100).any()):
                continue  # nothing was masked in this draw; not a divergence
            output = model(**batch)
            loss = output.loss
            if loss is None or not torch.isfinite(loss):
                diverged = True
                break
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            steps_run += 1
            final_loss = float(loss.detach())
        model.eval()

    model.save_pretrained(output_dir)
    tokenizer.save_pretrained(output_dir)
    return FinetuneResult(
        checkpoint_dir=output_dir,
        steps_run=steps_run,
        final_loss=final_loss,
        diverged=diverged,
    )
