import numpy as np
import pytest
import torch
import torch.nn.functional as F

from helpers import gradient_check
from srlfuse import bio
from srlfuse.srl import (AnnotatedSentence, HighwayLstmEncoder, SrlExample, SrlNetwork,
                         SrlTagger, _one_hot_flags)
from srlfuse.taggers import Token


class TestHighwayLstmEncoder:
    def test_directions_interleave(self):
        encoder = HighwayLstmEncoder(4, 8, num_layers=5)
        assert encoder.layer_directions == ("forward", "backward", "forward", "backward", "forward")

    def test_at_least_one_layer(self):
        with pytest.raises(ValueError):
            HighwayLstmEncoder(4, 8, num_layers=0)

    def test_carry_bias_initialized_positive(self):
        encoder = HighwayLstmEncoder(4, 8, num_layers=2)
        for layer in encoder.layers:
            assert (layer.carry_bias == 1.0).all()

    def test_layers_pass_inputs_mostly_unchanged_at_init(self):
        torch.manual_seed(0)
        encoder = HighwayLstmEncoder(6, 6, num_layers=1)
        x = torch.randn(10, 6)
        with torch.no_grad():
            h = encoder.layers[0](encoder.input_proj(x))
        inp = encoder.input_proj(x).detach()
        rel = (h - inp).norm() / inp.norm()
        assert rel < 0.5

    def test_deep_stack_output_is_finite(self):
        torch.manual_seed(0)
        encoder = HighwayLstmEncoder(8, 16, num_layers=8)
        with torch.no_grad():
            out = encoder(torch.randn(12, 8))
        assert torch.isfinite(out).all()
        assert out.norm() < 1e3

    def test_variational_dropout_only_in_training(self):
        torch.manual_seed(0)
        encoder = HighwayLstmEncoder(4, 8, num_layers=2, dropout=0.5)
        x = torch.randn(5, 4)
        encoder.eval()
        with torch.no_grad():
            a, b = encoder(x), encoder(x)
        assert torch.equal(a, b)
        encoder.train()
        torch.manual_seed(1)
        with torch.no_grad():
            c = encoder(x)
        torch.manual_seed(2)
        with torch.no_grad():
            d = encoder(x)
        assert not torch.equal(c, d)


class TestSrlNetwork:
    def test_emissions_shape_and_normalization(self):
        torch.manual_seed(0)
        net = SrlNetwork(context_dim=6, indicator_dim=3, hidden_dim=8, num_layers=2, n_tags=5)
        out = net(torch.randn(4, 6), _one_hot_flags(4, 1))
        assert out.shape == (4, 5)
        assert torch.allclose(out.exp().sum(dim=1), torch.ones(4), atol=1e-5)

    def test_indicator_position_changes_output(self):
        torch.manual_seed(0)
        net = SrlNetwork(context_dim=6, indicator_dim=3, hidden_dim=8, num_layers=2, n_tags=5)
        ctx = torch.randn(4, 6)
        with torch.no_grad():
            a = net(ctx, _one_hot_flags(4, 0))
            b = net(ctx, _one_hot_flags(4, 2))
        assert not torch.allclose(a, b)

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(3)
        net = SrlNetwork(context_dim=4, indicator_dim=2, hidden_dim=8, num_layers=2, n_tags=5).double()
        ctx = torch.randn(3, 4, dtype=torch.float64)
        gold = torch.tensor([0, 1, 2])

        def loss_fn():
            return F.nll_loss(net(ctx, _one_hot_flags(3, 1)), gold, reduction="sum")

        gradient_check(loss_fn, list(net.parameters()), np.random.default_rng(0),
                       n_coords=25, rtol=1e-3)


def _toy_corpus():
    corpus = [
        (("Alice", "sold", "a", "book"), 1, ("B-ARG0", "B-V", "B-ARG1", "I-ARG1")),
        (("Bob", "gave", "a", "ball", "to", "Emma"), 1,
         ("B-ARG0", "B-V", "B-ARG1", "I-ARG1", "B-ARG2", "I-ARG2")),
        (("Carol", "sent", "a", "letter"), 1, ("B-ARG0", "B-V", "B-ARG1", "I-ARG1")),
        (("David", "showed", "a", "camera", "yesterday"), 1,
         ("B-ARG0", "B-V", "B-ARG1", "I-ARG1", "B-AM-TMP")),
    ]
    X = [(tokens, pred) for tokens, pred, _ in corpus]
    y = [tags for _, _, tags in corpus]
    return X, y


class TestFit:
    def test_invalid_gold_rejected_with_example_index(self):
        X, y = _toy_corpus()
        y = [list(t) for t in y]
        y[2][0] = "I-ARG0"  # dangling inside tag
        with pytest.raises(ValueError, match="example 2"):
            SrlTagger(epochs=1).fit(X, y)

    def test_misaligned_gold_rejected(self):
        with pytest.raises(ValueError, match="example 0"):
            SrlTagger(epochs=1).fit([(("a", "b"), 0)], [("O",)])

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            SrlTagger(epochs=1).fit([], [])

    def test_zero_epochs_returns_initial_parameters(self):
        X, y = _toy_corpus()
        tagger = SrlTagger(epochs=0, seed=11, num_layers=2, hidden_size=16, context_dim=8,
                           indicator_dim=4).fit(X, y)
        torch.manual_seed(11)
        fresh = SrlNetwork(context_dim=8, indicator_dim=4, hidden_dim=16,
                           num_layers=2, n_tags=len(tagger.alphabet_))
        for key, value in tagger.model_.state_dict().items():
            assert torch.equal(value, fresh.state_dict()[key]), key

    def test_loss_halves_on_tiny_corpus(self):
        X, y = _toy_corpus()
        tagger = SrlTagger(epochs=40, batch_size=2, seed=0,
                           hidden_size=32, context_dim=16).fit(X, y)
        assert tagger.loss_curve_[-1] <= 0.5 * tagger.loss_curve_[0]

    def test_alphabet_is_data_driven(self):
        X, y = _toy_corpus()
        tagger = SrlTagger(epochs=0).fit(X, y)
        assert set(tagger.alphabet_.roles) == {"ARG0", "V", "ARG1", "ARG2", "AM-TMP"}

    def test_embedder_dim_mismatch_rejected(self):
        from srlfuse.embeddings import HashContextualEmbedder

        X, y = _toy_corpus()
        with pytest.raises(ValueError, match="context embedder dim"):
            SrlTagger(epochs=0, context_dim=32,
                      context_embedder=HashContextualEmbedder(dim=8)).fit(X, y)


@pytest.fixture(scope="module")
def fitted():
    X, y = _toy_corpus()
    return SrlTagger(epochs=0, seed=0, hidden_size=16, context_dim=8).fit(X, y)


class TestEmissions:
    def test_one_matrix_per_predicate_run(self, fitted):
        em = fitted.emissions(["Alice", "sold", "a", "book"], 1)
        assert em.shape == (4, len(fitted.alphabet_))
        assert np.all(np.isfinite(em))

    def test_three_predicates_three_distinct_runs(self, fitted):
        tokens = [Token("Alice", "NNP"), Token("sold", "VBD"), Token("bought", "VBD"),
                  Token("gave", "VBD")]
        runs = [fitted.emissions(tokens, i) for i in (1, 2, 3)]
        assert len(runs) == 3
        assert not np.allclose(runs[0], runs[1])
        assert not np.allclose(runs[1], runs[2])

    def test_non_predicate_index_rejected(self, fitted):
        with pytest.raises(ValueError, match="not a predicate"):
            fitted.emissions(["Alice", "sold", "a", "book"], 2)

    def test_out_of_range_rejected(self, fitted):
        with pytest.raises(ValueError, match="out of range"):
            fitted.emissions(["Alice", "sold"], 5)

    def test_unfitted_rejected(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            SrlTagger().emissions(["a"], 0)


class TestAnnotate:
    def test_no_verb_sentence_gets_all_outside(self, trained_tagger):
        annotated = trained_tagger.annotate(["choppy", "water"])
        assert annotated.label_strings == ["O", "O"]
        assert annotated.provenance == "no-predicate"
        assert annotated.predicate_flags == [False, False]

    def test_collapse_matches_counting_oracle(self, trained_tagger):
        sentences = [
            ["Alice", "sold", "a", "book", "and", "Bob", "bought", "a", "guitar"],
            ["The", "water", "was", "choppy", "as", "the", "man", "parasailed", "."],
            ["Charlie", "gave", "a", "letter", "to", "Emma", "yesterday"],
        ]
        from srlfuse.taggers import identify_predicates

        for tokens in sentences:
            flags = identify_predicates(tokens)
            assert any(flags)
            counts = {}
            for idx, flagged in enumerate(flags):
                if not flagged:
                    continue
                ids = trained_tagger._decode(trained_tagger.emissions(tokens, idx,
                                                                      check_predicate=False))
                counts[idx] = sum(1 for i in ids if i != 0)
            best = max(counts.values())
            expected_idx = min(i for i, c in counts.items() if c == best)
            annotated = trained_tagger.annotate(tokens)
            assert annotated.provenance == f"predicate:{expected_idx}"
            chosen = sum(1 for t in annotated.labels if str(t) != "O")
            assert chosen == best

    def test_annotate_is_deterministic(self, trained_tagger):
        tokens = ["Alice", "sold", "a", "book", "and", "Bob", "bought", "a", "guitar"]
        first = trained_tagger.annotate(tokens)
        second = trained_tagger.annotate(tokens)
        assert first.label_strings == second.label_strings
        assert first.provenance == second.provenance

    def test_output_satisfies_invariants(self, trained_tagger):
        for tokens in (["Charlie", "sold", "a", "book"], ["choppy", "water"],
                       ["Bob", "swims", "and", "Alice", "sails"]):
            annotated = trained_tagger.annotate(tokens)
            assert len(annotated.tokens) == len(annotated.labels) == len(annotated.predicate_flags)
            assert bio.is_valid_sequence(annotated.labels)

    def test_memorized_fixture_sentence(self, trained_tagger):
        annotated = trained_tagger.annotate(
            ["Charlie", "sold", "a", "book", "to", "Sherry", "last", "week"])
        assert annotated.label_strings == ["B-ARG0", "B-V", "B-ARG1", "I-ARG1",
                                           "B-ARG2", "I-ARG2", "B-AM-TMP", "I-AM-TMP"]


class TestAnnotatedSentence:
    def test_invalid_bio_rejected(self):
        with pytest.raises(ValueError, match="valid BIO"):
            AnnotatedSentence([Token("a")], [bio.BioTag("I", "X")], [False], "no-predicate")

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError, match="align"):
            AnnotatedSentence([Token("a")], [bio.O_TAG, bio.O_TAG], [False], "no-predicate")


class TestPersistence:
    def test_save_load_round_trip(self, trained_tagger, tmp_path):
        path = tmp_path / "tagger.ckpt"
        trained_tagger.save(path, config_hash="cafe01")
        loaded = SrlTagger.load(path)
        assert loaded.config_hash_ == "cafe01"
        tokens = ["Charlie", "sold", "a", "book", "to", "Sherry", "last", "week"]
        assert loaded.annotate(tokens).label_strings == trained_tagger.annotate(tokens).label_strings
        assert loaded.alphabet_ == trained_tagger.alphabet_

    def test_wrong_file_rejected(self, tmp_path):
        import torch as _torch

        path = tmp_path / "bogus.ckpt"
        _torch.save({"format": "something-else"}, path)
        with pytest.raises(ValueError, match="not a tagger checkpoint"):
            SrlTagger.load(path)

    def test_tag_provider_labels_match_annotate(self, trained_tagger):
        provider = trained_tagger.tag_provider()
        tokens = ["Alice", "sold", "a", "camera"]
        assert provider.tag(tokens) == trained_tagger.annotate(tokens).label_strings
        assert provider.vocabulary == tuple(str(t) for t in trained_tagger.alphabet_.tags)


class TestSrlExample:
    def test_alignment_enforced(self):
        with pytest.raises(ValueError):
            SrlExample(("a",), 0, ("O", "O"))

    def test_predicate_in_range(self):
        with pytest.raises(ValueError):
            SrlExample(("a",), 3, ("O",))
