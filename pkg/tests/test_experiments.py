import json

import numpy as np
import pytest

from srlfuse import experiments
from srlfuse.config import ConfigError, RunConfig
from srlfuse.srl import SrlTagger


def _fast_config(tmp_path, **overrides):
    base = dict(task="entailment", train_data="builtin:toy_nli", srl_data="builtin:toy_srl",
                output_dir=str(tmp_path / "run"), epochs=2, annotator_epochs=8,
                hidden_size=16, word_dim=16, seeds=(7,))
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def shared_source(srl_provider, trained_tagger):
    return srl_provider, {"type": "srl", "payload": trained_tagger.export_state()}


class TestTagProviders:
    def test_pos_provider_vocabulary_and_tags(self):
        provider = experiments.pos_tag_provider()
        assert provider.name == "pos"
        assert "VBD" in provider.vocabulary
        assert provider.tag(["Charlie", "sold"]) == ["NNP", "VBD"]

    def test_ne_provider_tags_bio(self):
        provider = experiments.ne_tag_provider()
        assert provider.name == "ne"
        assert provider.tag(["Charlie", "sold"])[0] == "B-PER"
        assert "O" in provider.vocabulary

    def test_descriptor_round_trip(self, shared_source):
        _, descriptor = shared_source
        provider = experiments.provider_from_descriptor(descriptor)
        tokens = ["Charlie", "sold", "a", "book"]
        assert provider.tag(tokens) == shared_source[0].tag(tokens)

    def test_unknown_descriptor_rejected(self):
        with pytest.raises(ValueError, match="unknown annotator"):
            experiments.provider_from_descriptor({"type": "chunks"})


class TestCmdTrain:
    def test_result_shape_and_outputs(self, tmp_path, shared_source):
        config = _fast_config(tmp_path)
        result = experiments.cmd_train(config, tag_source=shared_source)
        assert result.task == "entailment"
        assert set(result.per_seed) == {7}
        assert {r.name for r in result.reports} == {"accuracy"}
        out = config.resolved_output_dir()
        assert (out / "seed7.ckpt").exists()
        assert (out / "result.json").exists()
        assert (out / "metrics.jsonl").exists()
        assert (out / "table.txt").exists()
        record = json.loads((out / "result.json").read_text())
        assert record["config_hash"] == config.config_hash()
        assert "train_data" in record["provenance"]["data_checksums"]

    def test_rerun_is_bit_identical(self, tmp_path, shared_source):
        config = _fast_config(tmp_path)
        experiments.cmd_train(config, tag_source=shared_source)
        first = (config.resolved_output_dir() / "result.json").read_bytes()
        experiments.cmd_train(config, tag_source=shared_source)
        second = (config.resolved_output_dir() / "result.json").read_bytes()
        assert first == second

    def test_checkpoint_restores_for_eval(self, tmp_path, shared_source):
        config = _fast_config(tmp_path)
        result = experiments.cmd_train(config, tag_source=shared_source)
        reports = experiments.cmd_eval(config.resolved_output_dir() / "seed7.ckpt",
                                       "builtin:toy_nli")
        assert reports[0].name == "accuracy"
        assert reports[0].value == pytest.approx(result.per_seed[7]["accuracy"])

    def test_changed_data_changes_recorded_provenance(self, tmp_path):
        from srlfuse import datasets

        corpus = tmp_path / "pairs.jsonl"
        corpus.write_bytes(datasets.builtin_path("toy_nli").read_bytes())
        config = _fast_config(tmp_path, train_data=str(corpus), tag_source="none",
                              epochs=0)
        first = experiments.cmd_train(config).provenance["data_checksums"]["train_data"]
        with corpus.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"sentence1": "A man rests.", "sentence2": "He rests.",
                                 "gold_label": "entailment"}) + "\n")
        second = experiments.cmd_train(config).provenance["data_checksums"]["train_data"]
        assert first != second

    def test_srl_task_end_to_end(self, tmp_path):
        config = RunConfig(task="srl", train_data="builtin:toy_srl",
                           output_dir=str(tmp_path / "srl"), epochs=5, seeds=(1,))
        result = experiments.cmd_train(config)
        assert {r.name for r in result.reports} == {"span_f1", "span_precision", "span_recall"}
        loaded = experiments.load_checkpoint(config.resolved_output_dir() / "seed1.ckpt")
        assert isinstance(loaded, SrlTagger)

    def test_reading_task_metrics(self, tmp_path, shared_source):
        config = _fast_config(tmp_path, task="reading", train_data="builtin:toy_squad",
                              epochs=1, char_dim=8)
        result = experiments.cmd_train(config, tag_source=shared_source)
        assert {r.name for r in result.reports} == {"em", "f1"}
        reports = experiments.cmd_eval(config.resolved_output_dir() / "seed7.ckpt",
                                       "builtin:toy_squad")
        assert {r.name for r in reports} == {"em", "f1"}
        assert reports[0].value == pytest.approx(result.per_seed[7][reports[0].name])


class TestCmdAnnotate:
    def test_empty_file_empty_output(self, tmp_path, trained_tagger):
        ckpt = tmp_path / "tagger.ckpt"
        trained_tagger.save(ckpt)
        src = tmp_path / "in.txt"
        src.write_text("", encoding="utf-8")
        out = tmp_path / "out.txt"
        written, failed = experiments.cmd_annotate(src, ckpt, out)
        assert (written, failed) == (0, 0)
        assert out.read_text() == ""

    def test_verbless_line_gets_all_outside(self, tmp_path, trained_tagger):
        ckpt = tmp_path / "tagger.ckpt"
        trained_tagger.save(ckpt)
        src = tmp_path / "in.txt"
        src.write_text("choppy water\n", encoding="utf-8")
        out = tmp_path / "out.txt"
        experiments.cmd_annotate(src, ckpt, out)
        assert out.read_text() == "choppy\tO\nwater\tO\n\n"

    def test_fixture_sentence_block(self, tmp_path, trained_tagger):
        ckpt = tmp_path / "tagger.ckpt"
        trained_tagger.save(ckpt)
        src = tmp_path / "in.txt"
        src.write_text("Charlie sold a book to Sherry last week\n", encoding="utf-8")
        out = tmp_path / "out.txt"
        written, failed = experiments.cmd_annotate(src, ckpt, out)
        assert (written, failed) == (1, 0)
        lines = [l.split("\t") for l in out.read_text().strip().splitlines()]
        assert [l[1] for l in lines] == ["B-ARG0", "B-V", "B-ARG1", "I-ARG1",
                                         "B-ARG2", "I-ARG2", "B-AM-TMP", "I-AM-TMP"]

    def test_failed_line_is_reported_and_skipped(self, tmp_path, trained_tagger,
                                                 monkeypatch):
        ckpt = tmp_path / "tagger.ckpt"
        trained_tagger.save(ckpt)
        original = SrlTagger.annotate

        def flaky(self, tokens):
            if tokens and str(tokens[0]) == "BOOM":
                raise RuntimeError("synthetic failure")
            return original(self, tokens)

        monkeypatch.setattr(SrlTagger, "annotate", flaky)
        src = tmp_path / "in.txt"
        src.write_text("BOOM goes the provider\nchoppy water\n", encoding="utf-8")
        out = tmp_path / "out.txt"
        written, failed = experiments.cmd_annotate(src, ckpt, out)
        assert (written, failed) == (1, 1)
        text = out.read_text()
        assert text.startswith("# line 1:")
        assert "choppy\tO" in text

    def test_wrong_checkpoint_kind_rejected(self, tmp_path, shared_source):
        config = _fast_config(tmp_path)
        experiments.cmd_train(config, tag_source=shared_source)
        with pytest.raises(ValueError, match="role-labeler"):
            experiments.cmd_annotate(tmp_path / "in.txt",
                                     config.resolved_output_dir() / "seed7.ckpt",
                                     tmp_path / "out.txt")


class TestCmdDecode:
    def test_matrix_file(self, tmp_path):
        path = tmp_path / "matrix.txt"
        path.write_text("0.1 0.9 2.0\n", encoding="utf-8")
        tags, score = experiments.cmd_decode(["A"], path)
        assert tags == ["B-A"]
        assert score == pytest.approx(0.9)

    def test_width_mismatch_rejected(self, tmp_path):
        path = tmp_path / "matrix.txt"
        path.write_text("0.1 0.9\n", encoding="utf-8")
        with pytest.raises(ValueError, match="columns"):
            experiments.cmd_decode(["A"], path)


class TestSweepAndAblate:
    def test_degenerate_sweep_equals_train(self, tmp_path, shared_source):
        config = _fast_config(tmp_path)
        rows = experiments.cmd_sweep_dim(config, dims=[5])
        assert len(rows) == 1 and rows[0]["tag_dim"] == 5
        single = experiments.cmd_train(config.derived(
            tag_dim=5, output_dir=str(tmp_path / "solo")), tag_source=shared_source)
        assert rows[0]["accuracy"] == pytest.approx(single.per_seed[7]["accuracy"])
        out = config.resolved_output_dir()
        assert (out / "sweep.jsonl").exists() and (out / "sweep.txt").exists()

    def test_sweep_records_per_cell_failures(self, tmp_path, shared_source):
        config = _fast_config(tmp_path)
        rows = experiments.cmd_sweep_dim(config, dims=[0, 5])
        assert "error" in rows[0] and "accuracy" in rows[1]

    def test_sweep_requires_tag_source(self, tmp_path):
        with pytest.raises(ConfigError, match="tag source"):
            experiments.cmd_sweep_dim(_fast_config(tmp_path, tag_source="none"), dims=[5])

    def test_ablation_grid_rows_and_distinct_hashes(self, tmp_path):
        config = _fast_config(tmp_path, epochs=1)
        rows = experiments.cmd_ablate(config)
        assert [r["cell"] for r in rows] == ["full", "-context", "-tags", "-context -tags"]
        hashes = {r["config_hash"] for r in rows if "config_hash" in r}
        assert len(hashes) == 4
        out = config.resolved_output_dir()
        assert (out / "ablation.jsonl").exists()

    def test_tag_source_grid_rows(self, tmp_path):
        config = _fast_config(tmp_path, epochs=1)
        rows = experiments.cmd_ablate(config, tag_sources=True)
        assert [r["cell"] for r in rows] == ["baseline", "word+srl", "word+pos", "word+ne"]
        assert all("accuracy" in r or "error" in r for r in rows)
