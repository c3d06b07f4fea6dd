"""Vocabularies, tokenization, random streams and the shared error taxonomy."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

TokenSeq = tuple[int, ...]

BYTE = "byte"
WORD = "word"


class LabError(Exception):
    """Base class for every error raised by this package."""


class UnknownSymbol(LabError):
    pass


class EmptyCorpus(LabError):
    pass


class CorpusTooShort(LabError):
    pass


class BadWeights(LabError):
    pass


class BadTemperature(LabError):
    pass


class BadCosts(LabError):
    pass


class ConfigError(LabError):
    pass


class FormatError(LabError):
    """A persisted file is malformed or carries an unexpected version tag."""


class ConstraintViolation(LabError):
    """A redistribution breaks one clause of the improved-profile constraints.

    ``clause`` names the violated clause (``budget``, ``upper``, ``lower``,
    ``strict``, ``nonneg``, ``split``, ``length`` or ``monotone``).
    """

    def __init__(self, clause: str, detail: str = ""):
        self.clause = clause
        super().__init__(f"{clause}: {detail}" if detail else clause)


class Infeasible(LabError):
    pass


@dataclass(frozen=True)
class Vocab:
    """Bijection between token ids and symbols.

    In byte mode the symbol of id ``i`` is the byte value ``i``; in word mode
    symbols are whitespace-free strings numbered in first-occurrence order.
    """

    mode: str
    symbols: tuple = ()
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.mode == BYTE:
            object.__setattr__(self, "symbols", tuple(range(256)))
        elif self.mode != WORD:
            raise ConfigError(f"unknown tokenizer mode {self.mode!r}")
        if len(set(self.symbols)) != len(self.symbols):
            raise FormatError("vocabulary symbols are not unique")
        self._index.update({s: i for i, s in enumerate(self.symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def id_of(self, symbol) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise UnknownSymbol(repr(symbol)) from None


def build_vocab(corpus: bytes, mode: str = BYTE) -> Vocab:
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    if mode == BYTE:
        return Vocab(BYTE)
    words = corpus.decode("utf-8", "surrogateescape").split()
    if not words:
        raise EmptyCorpus("corpus holds no words")
    return Vocab(WORD, tuple(dict.fromkeys(words)))


def tokenize(data: bytes, vocab: Vocab) -> TokenSeq:
    if vocab.mode == BYTE:
        return tuple(data)
    return tuple(vocab.id_of(w) for w in data.decode("utf-8", "surrogateescape").split())


def decode(tokens: Sequence[int], vocab: Vocab) -> bytes:
    if vocab.mode == BYTE:
        return bytes(tokens)
    return " ".join(vocab.symbols[t] for t in tokens).encode("utf-8", "surrogateescape")


def save_vocab(vocab: Vocab, path) -> None:
    lines = [f"vocab v1 {vocab.mode} {vocab.size}"]
    lines += [f"{i}\t{s}" for i, s in enumerate(vocab.symbols)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", errors="surrogateescape")


def load_vocab(path) -> Vocab:
    lines = Path(path).read_text(encoding="utf-8", errors="surrogateescape").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty vocabulary file")
    header = lines[0].split()
    if len(header) != 4 or header[:2] != ["vocab", "v1"]:
        raise FormatError(f"{path}: expected header 'vocab v1 <mode> <size>', got {lines[0]!r}")
    mode, size = header[2], int(header[3])
    symbols = []
    for n, line in enumerate(lines[1:]):
        idx, sym = line.split("\t", 1)
        if int(idx) != n:
            raise FormatError(f"{path}: ids must be dense and ordered (line {n + 2})")
        symbols.append(int(sym) if mode == BYTE else sym)
    if len(symbols) != size:
        raise FormatError(f"{path}: header declares {size} symbols, found {len(symbols)}")
    if mode == BYTE:
        if symbols != list(range(256)):
            raise FormatError(f"{path}: byte vocabulary must map i -> i")
        return Vocab(BYTE)
    return Vocab(WORD, tuple(symbols))


# Random streams: numpy's PCG64 seeded through SeedSequence; children come
# from SeedSequence.spawn, so splitting is deterministic and order-free.

def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split_rng(seed: int, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def default_corpus() -> bytes:
    """English prose bundled with the package (about 200 KB)."""
    return resources.files("specdraft").joinpath("data/prose.txt").read_bytes()


def synthetic_corpus(vocab_size: int, length: int, seed: int, order: int = 2,
                     concentration: float = 0.3) -> bytes:
    """Word-mode corpus sampled from a random Markov chain.

    Words are ``w0 .. w{vocab_size-1}``; each length-``order`` history gets its
    own Dirichlet(concentration) next-word distribution, so low concentration
    gives peaked, predictable text.
    """
    rng = make_rng(seed)
    n_ctx = vocab_size ** order
    table = rng.dirichlet(np.full(vocab_size, concentration), size=n_ctx)
    cdf = np.cumsum(table, axis=1)
    seq = list(rng.integers(0, vocab_size, size=order))
    u = rng.random(length)
    for j in range(length - order):
        ctx = 0
        for t in seq[-order:]:
            ctx = ctx * vocab_size + int(t)
        seq.append(min(int(np.searchsorted(cdf[ctx], u[j], side="right")), vocab_size - 1))
    words = [f"w{t}" for t in seq[:length]]
    # make sure every word appears so the vocabulary is complete and ordered
    words = [f"w{i}" for i in range(vocab_size)] + words
    return " ".join(words).encode()
