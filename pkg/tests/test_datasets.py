import json

import pytest

from srlfuse import datasets, toydata
from srlfuse.datasets import DataError


class TestTokenizer:
    def test_words_and_punctuation(self):
        assert datasets.simple_tokenize("A man parasails, quickly!") == \
            ["A", "man", "parasails", ",", "quickly", "!"]

    def test_offsets_cover_tokens(self):
        text = "heat and pressure."
        for token, start, end in datasets.tokenize_with_offsets(text):
            assert text[start:end] == token


class TestBuiltins:
    def test_known_names_resolve(self):
        for name in ("toy_srl", "toy_nli", "toy_squad"):
            assert datasets.builtin_path(name).exists()

    def test_unknown_name_rejected(self):
        with pytest.raises(DataError, match="unknown builtin"):
            datasets.builtin_path("toy_nope")

    def test_missing_file_rejected(self):
        with pytest.raises(DataError, match="not found"):
            datasets.resolve_data_path("/no/such/file.json")

    def test_checksum_is_stable(self):
        path = datasets.builtin_path("toy_srl")
        assert datasets.file_checksum(path) == datasets.file_checksum(path)


class TestSrlConll:
    def test_bundled_corpus_loads(self, toy_srl_examples):
        assert len(toy_srl_examples) == 30
        first = toy_srl_examples[0]
        assert first.tokens == ("Charlie", "sold", "a", "book", "to", "Sherry", "last", "week")
        assert first.predicate_index == 1

    def test_round_trip(self, tmp_path, toy_srl_examples):
        path = tmp_path / "corpus.conll"
        datasets.save_srl_conll(path, toy_srl_examples)
        assert datasets.load_srl_conll(path) == toy_srl_examples

    def test_bad_flag_count_rejected_with_index(self, tmp_path):
        path = tmp_path / "bad.conll"
        path.write_text("a 1 B-V\nb 1 B-ARG0\n\n", encoding="utf-8")
        with pytest.raises(DataError, match="example 0.*2 predicate flags"):
            datasets.load_srl_conll(path)

    def test_invalid_bio_rejected(self, tmp_path):
        path = tmp_path / "bad.conll"
        path.write_text("a 1 I-V\n\n", encoding="utf-8")
        with pytest.raises(DataError, match="not valid BIO"):
            datasets.load_srl_conll(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.conll"
        path.write_text("a 1\n", encoding="utf-8")
        with pytest.raises(DataError, match="expected 'token flag tag'"):
            datasets.load_srl_conll(path)


class TestNliJsonl:
    def test_bundled_pairs_load_and_skip(self):
        examples, skipped = datasets.load_nli_jsonl("builtin:toy_nli")
        assert len(examples) == 200
        assert skipped == 3

    def test_unknown_label_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"sentence1": "a", "sentence2": "b",
                                    "gold_label": "perhaps"}) + "\n", encoding="utf-8")
        with pytest.raises(DataError, match="unknown label"):
            datasets.load_nli_jsonl(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"sentence1": "a", "gold_label": "neutral"}) + "\n",
                        encoding="utf-8")
        with pytest.raises(DataError, match="bad record"):
            datasets.load_nli_jsonl(path)

    def test_only_unlabeled_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"sentence1": "a", "sentence2": "b",
                                    "gold_label": "-"}) + "\n", encoding="utf-8")
        with pytest.raises(DataError, match="no labeled pairs"):
            datasets.load_nli_jsonl(path)


class TestSquad:
    def test_bundled_corpus_loads(self, toy_squad):
        assert len(toy_squad) == 50

    def test_char_offset_resolves_duplicate_answers(self, toy_squad):
        """The rock passage mentions the answer twice; the official
        answer_start pins the first occurrence."""
        rock = next(e for e in toy_squad if e.qid == "rock-000")
        text = " ".join(rock.document[rock.answer_start : rock.answer_end + 1])
        assert text == "heat and pressure"
        second = " ".join(rock.document).index("heat and pressure",
                                               rock.answer_start + 1)
        assert second > 0  # the duplicate really exists later in the document

    def test_span_text_matches_gold(self, toy_squad):
        from srlfuse.metrics import normalize_answer

        for ex in toy_squad:
            span = " ".join(ex.document[ex.answer_start : ex.answer_end + 1])
            assert normalize_answer(span) == normalize_answer(ex.answer_texts[0]), ex.qid

    def test_normalized_fallback_when_offset_is_wrong(self, tmp_path):
        payload = {"data": [{"paragraphs": [{"context": "The cat sat on a mat.",
                                             "qas": [{"id": "q1", "question": "Where?",
                                                      "answers": [{"text": "a mat",
                                                                   "answer_start": 0}]}]}]}]}
        path = tmp_path / "squad.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        (example,) = datasets.load_squad(path)
        assert example.document[example.answer_start : example.answer_end + 1] == ("a", "mat")

    def test_unalignable_answer_rejected(self, tmp_path):
        payload = {"data": [{"paragraphs": [{"context": "The cat sat.",
                                             "qas": [{"id": "q9", "question": "Where?",
                                                      "answers": [{"text": "the moon",
                                                                   "answer_start": 2}]}]}]}]}
        path = tmp_path / "squad.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(DataError, match="q9"):
            datasets.load_squad(path)

    def test_bad_structure_rejected(self, tmp_path):
        path = tmp_path / "squad.json"
        path.write_text(json.dumps({"rows": []}), encoding="utf-8")
        with pytest.raises(DataError, match="data"):
            datasets.load_squad(path)


class TestToyDataGeneration:
    def test_regeneration_is_byte_stable(self, tmp_path):
        toydata.write_srl(tmp_path / "toy_srl.conll")
        toydata.write_nli(tmp_path / "toy_nli.jsonl")
        toydata.write_squad(tmp_path / "toy_squad.json")
        for name in ("toy_srl.conll", "toy_nli.jsonl", "toy_squad.json"):
            bundled = datasets.resolve_data_path(f"builtin:{name.split('.')[0]}")
            assert (tmp_path / name).read_bytes() == bundled.read_bytes(), name

    def test_fixture_pairs_present(self, toy_nli):
        premise = "A man parasails in the choppy water ."
        rows = {(" ".join(e.premise), " ".join(e.hypothesis), e.label) for e in toy_nli}
        assert (premise, "The water was choppy as the man parasailed .", "entailment") in rows
        assert (premise, "The man parasailed in the calm water .", "contradiction") in rows
        assert (premise, "The man is competing in a competition .", "neutral") in rows
