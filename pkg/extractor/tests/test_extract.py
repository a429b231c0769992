import numpy as np
import pytest
import torch
from transformers import AutoModel, AutoTokenizer

from ctxextract.extract import ExtractorConfig, extract


def read_dump(path):
    records = []
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        dim, layer = int(header[1]), int(header[3])
        for line in handle:
            word, sid, values = line.rstrip("\n").split("\t")
            records.append((word, int(sid), np.array(values.split(" "), dtype=float)))
    return dim, layer, records


def read_coverage(path):
    out = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            word, emitted, found = line.rstrip("\n").split("\t")
            out[word] = (int(emitted), int(found))
    return out


class TestExtract:
    def test_absent_word_gets_zero_records_but_coverage_entry(self, model_dir, corpus_path, tmp_path):
        out = tmp_path / "occ.dump"
        config = ExtractorConfig(model=model_dir, layer=1, rng_seed=0)
        coverage = extract(corpus_path, ["cat", "star", "nurse", "unseenword"], config, str(out))
        _, _, records = read_dump(str(out))
        words_with_records = {w for w, _, _ in records}
        assert "unseenword" not in words_with_records
        assert coverage["unseenword"] == (0, 0)
        sidecar = read_coverage(str(out) + ".coverage")
        assert sidecar["unseenword"] == (0, 0)

    def test_single_piece_vector_matches_hidden_state_exactly(self, model_dir, corpus_path, tmp_path):
        out = tmp_path / "occ.dump"
        config = ExtractorConfig(model=model_dir, layer=1, rng_seed=0)
        extract(corpus_path, ["scalpel"], config, str(out))
        dim, layer, records = read_dump(str(out))
        assert layer == 1 and len(records) == 1
        word, sid, vector = records[0]

        tokenizer = AutoTokenizer.from_pretrained(model_dir)
        model = AutoModel.from_pretrained(model_dir)
        model.eval()
        with open(corpus_path, encoding="utf-8") as handle:
            sentence = handle.read().splitlines()[sid]
        tokens = sentence.split()
        position = tokens.index("scalpel")
        encoded = tokenizer(tokens, is_split_into_words=True)
        ids = torch.tensor([encoded["input_ids"]])
        with torch.no_grad():
            hidden = model(
                input_ids=ids,
                attention_mask=torch.ones_like(ids),
                output_hidden_states=True,
            ).hidden_states[1][0]
        piece_indices = [i for i, w in enumerate(encoded.word_ids(0)) if w == position]
        assert len(piece_indices) == 1
        expected = hidden[piece_indices[0]].numpy()
        assert np.array_equal(vector, expected.astype(np.float64))

    def test_mean_pooling_averages_pieces(self, model_dir, corpus_path, tmp_path):
        mean_out = tmp_path / "mean.dump"
        first_out = tmp_path / "first.dump"
        extract(corpus_path, ["playing"],
                ExtractorConfig(model=model_dir, layer=1, pooling="mean", rng_seed=0),
                str(mean_out))
        extract(corpus_path, ["playing"],
                ExtractorConfig(model=model_dir, layer=1, pooling="first", rng_seed=0),
                str(first_out))
        _, _, mean_records = read_dump(str(mean_out))
        _, _, first_records = read_dump(str(first_out))
        assert len(mean_records) == len(first_records) > 0
        # "playing" splits into two pieces, so the poolings must differ
        assert not np.allclose(mean_records[0][2], first_records[0][2])

    def test_max_sentences_cap_respected(self, model_dir, corpus_path, tmp_path):
        out = tmp_path / "occ.dump"
        config = ExtractorConfig(model=model_dir, layer=1, max_sentences=5, rng_seed=0)
        coverage = extract(corpus_path, ["the", "cat"], config, str(out))
        _, _, records = read_dump(str(out))
        per_word = {}
        for word, _, _ in records:
            per_word[word] = per_word.get(word, 0) + 1
        assert per_word["the"] == 5 and per_word["cat"] == 5
        assert coverage["the"][0] == 5 and coverage["the"][1] > 5

    def test_sampling_is_deterministic(self, model_dir, corpus_path, tmp_path):
        config = ExtractorConfig(model=model_dir, layer=1, max_sentences=4, rng_seed=11)
        a = tmp_path / "a.dump"
        b = tmp_path / "b.dump"
        extract(corpus_path, ["the", "cat", "sat"], config, str(a))
        extract(corpus_path, ["the", "cat", "sat"], config, str(b))
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.dump.coverage").read_bytes() == (tmp_path / "b.dump.coverage").read_bytes()

    def test_layer_zero_and_one_differ_with_same_counts(self, model_dir, corpus_path, tmp_path):
        zero = tmp_path / "l0.dump"
        one = tmp_path / "l1.dump"
        extract(corpus_path, ["cat", "mat"], ExtractorConfig(model=model_dir, layer=0, rng_seed=0), str(zero))
        extract(corpus_path, ["cat", "mat"], ExtractorConfig(model=model_dir, layer=1, rng_seed=0), str(one))
        dim0, layer0, records0 = read_dump(str(zero))
        dim1, layer1, records1 = read_dump(str(one))
        assert (layer0, layer1) == (0, 1)
        assert dim0 == dim1
        assert len(records0) == len(records1)
        assert [(w, s) for w, s, _ in records0] == [(w, s) for w, s, _ in records1]
        assert not np.allclose(records0[0][2], records1[0][2])

    def test_layer_beyond_depth_rejected(self, model_dir, corpus_path, tmp_path):
        config = ExtractorConfig(model=model_dir, layer=3, rng_seed=0)
        with pytest.raises(ValueError, match="depth"):
            extract(corpus_path, ["cat"], config, str(tmp_path / "x.dump"))

    def test_records_sorted_by_word_then_sentence(self, model_dir, corpus_path, tmp_path):
        out = tmp_path / "occ.dump"
        extract(corpus_path, ["sun", "cat", "dog"],
                ExtractorConfig(model=model_dir, layer=1, rng_seed=0), str(out))
        _, _, records = read_dump(str(out))
        keys = [(w, s) for w, s, _ in records]
        assert keys == sorted(keys)

    def test_duplicate_vocab_rejected(self, model_dir, corpus_path, tmp_path):
        config = ExtractorConfig(model=model_dir, layer=1)
        with pytest.raises(ValueError, match="duplicates"):
            extract(corpus_path, ["cat", "cat"], config, str(tmp_path / "x.dump"))

    def test_empty_corpus_rejected(self, model_dir, tmp_path):
        empty = tmp_path / "empty.txt"
        empty.write_text("\n", encoding="utf-8")
        config = ExtractorConfig(model=model_dir, layer=1)
        with pytest.raises(ValueError, match="empty"):
            extract(str(empty), ["cat"], config, str(tmp_path / "x.dump"))


class TestConfig:
    def test_bad_pooling(self):
        with pytest.raises(ValueError, match="pooling"):
            ExtractorConfig(model="m", pooling="max")

    def test_negative_layer(self):
        with pytest.raises(ValueError, match="layer"):
            ExtractorConfig(model="m", layer=-1)
