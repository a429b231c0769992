import pytest
import torch
from transformers import BertConfig, BertForMaskedLM, BertTokenizerFast

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
WORDS = [
    "the", "cat", "sat", "on", "mat", "dog", "ran", "fast", "slow",
    "play", "##ing", "##ed", "scalpel", "suture", "ward", "nurse",
    "rain", "sun", "moon", "star",
]

CORPUS = [
    "the cat sat on the mat",
    "the dog ran fast",
    "playing on the mat",
    "the nurse played the scalpel",
    "suture the ward slow",
    "the cat played fast",
    "rain sun moon star",
    "the cat ran on the mat",
    "playing playing playing",
    "the sun sat slow",
    "dog and cat",
    "the moon sat on the ward",
    "the cat sat fast",
    "the cat ran slow",
    "the cat played on the sun",
    "the cat sat on the star",
    "the cat ran on rain",
    "the cat sat near suture",
    "the cat sat by the nurse",
    "the cat sat at the ward",
]


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinybert")
    vocab_path = root / "vocab.txt"
    vocab_path.write_text("\n".join(SPECIALS + WORDS) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab=str(vocab_path), do_lower_case=False)
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(SPECIALS) + len(WORDS),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
        pad_token_id=0,
    )
    BertForMaskedLM(config).save_pretrained(root)
    tokenizer.save_pretrained(root)
    return str(root)


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.txt"
    path.write_text("\n".join(CORPUS) + "\n", encoding="utf-8")
    return str(path)
