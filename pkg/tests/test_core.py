import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdraft.core import (
    BYTE,
    WORD,
    EmptyCorpus,
    FormatError,
    UnknownSymbol,
    build_vocab,
    decode,
    default_corpus,
    load_vocab,
    make_rng,
    save_vocab,
    split_rng,
    synthetic_corpus,
    tokenize,
)


def test_tokenize_examples():
    byte_vocab = build_vocab(b"x")
    assert tokenize(b"", byte_vocab) == ()
    assert tokenize(b"ab", byte_vocab) == (97, 98)
    vocab = build_vocab(b"a b a", WORD)
    assert tokenize(b"a b a", vocab) == (0, 1, 0)


def test_build_vocab_examples():
    assert build_vocab(b"anything at all").size == 256
    v = build_vocab(b"a b a", WORD)
    assert v.size == 2 and v.id_of("a") == 0 and v.id_of("b") == 1
    assert build_vocab(b"x y z x", WORD).size == 3


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_vocab(b"")
    with pytest.raises(EmptyCorpus):
        build_vocab(b"   \n", WORD)


def test_unknown_word():
    vocab = build_vocab(b"a b", WORD)
    with pytest.raises(UnknownSymbol):
        tokenize(b"a c", vocab)


@given(st.binary(max_size=300))
def test_byte_round_trip(data):
    vocab = build_vocab(b"seed")
    assert decode(tokenize(data, vocab), vocab) == data


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["to", "be", "or", "not", "that"]), min_size=1, max_size=40))
def test_word_round_trip(words):
    text = " ".join(words).encode()
    vocab = build_vocab(text, WORD)
    assert decode(tokenize(text, vocab), vocab) == text


def test_vocab_persistence(tmp_path):
    for vocab in (build_vocab(b"z"), build_vocab("le chat été a b".encode(), WORD)):
        path = tmp_path / f"{vocab.mode}.vocab"
        save_vocab(vocab, path)
        assert path.read_text().splitlines()[0] == f"vocab v1 {vocab.mode} {vocab.size}"
        assert load_vocab(path) == vocab


def test_vocab_bad_header(tmp_path):
    path = tmp_path / "v"
    path.write_text("vocab v2 word 1\n0\ta\n")
    with pytest.raises(FormatError):
        load_vocab(path)
    path.write_text("vocab v1 word 3\n0\ta\n")
    with pytest.raises(FormatError):
        load_vocab(path)


def test_rng_determinism():
    a = make_rng(2024).random(1_000_000)
    b = make_rng(2024).random(1_000_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[:10], make_rng(2025).random(10))


def test_split_streams():
    first = [g.random(5) for g in split_rng(7, 3)]
    again = [g.random(5) for g in split_rng(7, 3)]
    assert all(np.array_equal(x, y) for x, y in zip(first, again))
    assert not np.array_equal(first[0], first[1])


def test_default_corpus_is_text():
    text = default_corpus()
    assert len(text) > 100_000
    assert text.isascii()


def test_synthetic_corpus():
    a = synthetic_corpus(8, 500, seed=1)
    assert a == synthetic_corpus(8, 500, seed=1)
    vocab = build_vocab(a, WORD)
    assert vocab.size == 8
    assert vocab.symbols == tuple(f"w{i}" for i in range(8))
    assert build_vocab(a, BYTE).size == 256
