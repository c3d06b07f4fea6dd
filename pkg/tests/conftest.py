import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from specdraft.core import build_vocab, synthetic_corpus, tokenize
from specdraft.harness import ExperimentConfig, prepare


@pytest.fixture(scope="session")
def prose_lab():
    """Default configuration trained on the bundled prose corpus."""
    return prepare(ExperimentConfig())


@pytest.fixture(scope="session")
def synth_corpus():
    return synthetic_corpus(12, 20_000, seed=3)


@pytest.fixture(scope="session")
def synth_tokens(synth_corpus):
    vocab = build_vocab(synth_corpus, "word")
    return vocab, tokenize(synth_corpus, vocab)

