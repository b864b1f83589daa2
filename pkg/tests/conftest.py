import pytest
import torch

# Single-threaded math keeps reruns bit-identical.
torch.set_num_threads(1)

from srlfuse import datasets
from srlfuse.srl import SrlTagger

# criterion id -> (label, status string)
ACCEPTANCE_LOG: dict[int, tuple[str, str]] = {}


def record_criterion(number: int, label: str, detail: str = ""):
    ACCEPTANCE_LOG[number] = (label, f"PASS {detail}".strip())


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE_LOG):
        label, status = ACCEPTANCE_LOG[number]
        terminalreporter.write_line(f"criterion {number} ({label}): {status}")


@pytest.fixture(scope="session")
def toy_srl_examples():
    return datasets.load_srl_conll("builtin:toy_srl")


@pytest.fixture(scope="session")
def toy_nli():
    return datasets.load_nli_jsonl("builtin:toy_nli")[0]


@pytest.fixture(scope="session")
def toy_squad():
    return datasets.load_squad("builtin:toy_squad")


@pytest.fixture(scope="session")
def trained_tagger(toy_srl_examples):
    """A memorization-grade tagger shared by downstream tests."""
    X = [(ex.tokens, ex.predicate_index) for ex in toy_srl_examples]
    y = [ex.tags for ex in toy_srl_examples]
    return SrlTagger(epochs=60, seed=0).fit(X, y)


@pytest.fixture(scope="session")
def srl_provider(trained_tagger):
    return trained_tagger.tag_provider()
