"""Interpolated additive-smoothing n-gram model used as the exact target.

For order ``N`` and context ``c`` the next-token probability is

    P(y | c) = sum_k  w_k * (count_k(s_k, y) + alpha) / (count_k(s_k) + alpha * |V|)

where ``s_k`` is the last ``k - 1`` tokens of ``c``.  When the context is
shorter than ``k - 1`` tokens the term uses the longest suffix available, so
the weights never need renormalising and every query is defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BadTemperature, BadWeights, CorpusTooShort, FormatError, TokenSeq

# context tuple -> (next ids, counts, total)
CountTable = dict[tuple, tuple[np.ndarray, np.ndarray, int]]


def count_windows(tokens: np.ndarray, ctx_len: int, gap: int = 0) -> CountTable:
    """Count ``(context, next)`` pairs where next sits ``gap`` tokens past the context.

    ``gap=0`` gives ordinary n-gram counts; skip-gram heads use ``gap > 0``.
    """
    width = ctx_len + gap + 1
    if len(tokens) < width:
        return {}
    win = np.lib.stride_tricks.sliding_window_view(tokens, width)
    rows = np.concatenate([win[:, :ctx_len], win[:, -1:]], axis=1)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    table: CountTable = {}
    # np.unique sorts rows lexicographically, so equal contexts are contiguous
    ctx_keys = uniq[:, :ctx_len]
    if ctx_len:
        breaks = np.flatnonzero(np.any(ctx_keys[1:] != ctx_keys[:-1], axis=1)) + 1
    else:
        breaks = np.array([], dtype=int)
    for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, len(uniq)]):
        key = tuple(int(t) for t in uniq[lo, :ctx_len])
        ids = uniq[lo:hi, -1].astype(np.int64)
        cnt = counts[lo:hi].astype(np.int64)
        table[key] = (ids, cnt, int(cnt.sum()))
    return table


def smoothed(table: CountTable, key: tuple, alpha: float, vocab_size: int) -> np.ndarray:
    out = np.empty(vocab_size)
    entry = table.get(key)
    total = entry[2] if entry else 0
    denom = total + alpha * vocab_size
    out.fill(alpha / denom)
    if entry:
        out[entry[0]] += entry[1] / denom
    return out


def default_weights(order: int) -> tuple[float, ...]:
    """Weights proportional to 1..order, e.g. (0.1, 0.2, 0.3, 0.4) for order 4."""
    total = order * (order + 1) / 2
    return tuple(k / total for k in range(1, order + 1))


def top_tokens(probs: np.ndarray, k: int) -> list[tuple[int, float]]:
    """The ``k`` most probable tokens, by probability desc then id asc."""
    k = min(k, len(probs))
    if k < len(probs):
        # include everything tied with the k-th value so the id tie-break is exact
        kth = np.partition(probs, len(probs) - k)[len(probs) - k]
        idx = np.flatnonzero(probs >= kth)
    else:
        idx = np.arange(len(probs))
    order = np.lexsort((idx, -probs[idx]))[:k]
    return [(int(idx[i]), float(probs[idx[i]])) for i in order]


@dataclass(frozen=True, eq=False)
class NgramModel:
    order: int
    alpha: float
    weights: tuple[float, ...]
    vocab_size: int
    tables: tuple[CountTable, ...]  # tables[k-1] holds contexts of length k-1
    _cache: dict = field(default_factory=dict, repr=False)
    _top: dict = field(default_factory=dict, repr=False)

    def top(self, context: Sequence[int], k: int) -> list[tuple[int, float]]:
        key = (tuple(context[-(self.order - 1):]) if self.order > 1 else (), k)
        hit = self._top.get(key)
        if hit is None:
            hit = self._top[key] = tuple(top_tokens(self.next_distribution(context), k))
        return hit

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        key = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        probs = np.zeros(self.vocab_size)
        for k, w in enumerate(self.weights, start=1):
            if w == 0.0:
                continue
            k_eff = min(k, len(key) + 1)
            suffix = key[len(key) - (k_eff - 1):] if k_eff > 1 else ()
            probs += w * smoothed(self.tables[k_eff - 1], suffix, self.alpha, self.vocab_size)
        probs.flags.writeable = False
        self._cache[key] = probs
        return probs


def train_ngram(corpus_tokens: Sequence[int], order: int, smoothing_alpha: float,
                backoff_weights: Sequence[float] | None, vocab_size: int) -> NgramModel:
    if order < 1:
        raise BadWeights(f"order must be >= 1, got {order}")
    if len(corpus_tokens) < order:
        raise CorpusTooShort(f"need at least {order} tokens, got {len(corpus_tokens)}")
    weights = default_weights(order) if backoff_weights is None else tuple(map(float, backoff_weights))
    if len(weights) != order or min(weights) < 0 or abs(sum(weights) - 1) > 1e-9:
        raise BadWeights(f"need {order} non-negative weights summing to 1, got {weights}")
    if not smoothing_alpha > 0:
        raise BadWeights(f"smoothing alpha must be positive, got {smoothing_alpha}")
    arr = np.asarray(corpus_tokens, dtype=np.int64)
    if arr.min() < 0 or arr.max() >= vocab_size:
        raise BadWeights("corpus holds token ids outside the vocabulary")
    tables = tuple(count_windows(arr, k - 1) for k in range(1, order + 1))
    return NgramModel(order, float(smoothing_alpha), weights, vocab_size, tables)


def next_distribution(model: NgramModel, context: Sequence[int]) -> np.ndarray:
    return model.next_distribution(context)


def greedy_next(model: NgramModel, context: Sequence[int]) -> int:
    # np.argmax returns the first maximum, i.e. the lowest id among ties
    return int(np.argmax(model.next_distribution(context)))


def apply_temperature(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Scale log-probabilities by ``1/temperature`` and renormalise."""
    if not temperature > 0:
        raise BadTemperature(f"temperature must be > 0, got {temperature}")
    if temperature == 1.0:
        return probs
    with np.errstate(divide="ignore"):
        logits = np.log(probs) / temperature
    logits -= logits.max()
    out = np.exp(logits)
    return out / out.sum()


def draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)


def sample_next(model: NgramModel, context: Sequence[int], temperature: float,
                rng: np.random.Generator) -> int:
    return draw(apply_temperature(model.next_distribution(context), temperature), rng)


def vanilla_decode(model: NgramModel, prompt: Sequence[int], n_tokens: int,
                   temperature: float = 0.0, rng: np.random.Generator | None = None) -> TokenSeq:
    """Plain autoregressive decoding; temperature 0 means greedy."""
    ctx = list(prompt)
    out = []
    for _ in range(n_tokens):
        if temperature == 0:
            tok = greedy_next(model, ctx)
        else:
            tok = sample_next(model, ctx, temperature, rng)
        ctx.append(tok)
        out.append(tok)
    return tuple(out)


# Persistence.  Layout:
#   ngram v1
#   order <N>
#   alpha <float>
#   weights <w1> ... <wN>
#   vocab_size <V>
#   vocab <reference>            (free-form pointer to the vocab file)
#   table <k> <n_contexts>
#   <ctx ids, space separated>\t<id>:<count> <id>:<count> ...
#   ... repeated for k = 1..N; an empty context is written as "-"

NGRAM_VERSION = "ngram v1"


def dump_tables(tables: Sequence[CountTable]) -> list[str]:
    lines = []
    for k, table in enumerate(tables, start=1):
        lines.append(f"table {k} {len(table)}")
        for ctx in sorted(table):
            ids, cnt, _ = table[ctx]
            key = " ".join(map(str, ctx)) or "-"
            lines.append(key + "\t" + " ".join(f"{i}:{c}" for i, c in zip(ids.tolist(), cnt.tolist())))
    return lines


def parse_tables(lines: list[str], pos: int, n_tables: int) -> tuple[list[CountTable], int]:
    tables = []
    for k in range(1, n_tables + 1):
        head = lines[pos].split()
        if head[:2] != ["table", str(k)]:
            raise FormatError(f"expected 'table {k}' at line {pos + 1}, got {lines[pos]!r}")
        n = int(head[2])
        table: CountTable = {}
        for line in lines[pos + 1:pos + 1 + n]:
            key_s, body = line.split("\t")
            key = () if key_s == "-" else tuple(int(t) for t in key_s.split())
            pairs = [p.split(":") for p in body.split()]
            ids = np.array([int(a) for a, _ in pairs], dtype=np.int64)
            cnt = np.array([int(b) for _, b in pairs], dtype=np.int64)
            table[key] = (ids, cnt, int(cnt.sum()))
        tables.append(table)
        pos += 1 + n
    return tables, pos


def header_value(lines: list[str], pos: int, key: str) -> str:
    name, _, value = lines[pos].partition(" ")
    if name != key:
        raise FormatError(f"expected {key!r} at line {pos + 1}, got {lines[pos]!r}")
    return value


def model_lines(model: NgramModel, vocab_ref: str = "-") -> list[str]:
    return [
        NGRAM_VERSION,
        f"order {model.order}",
        f"alpha {model.alpha!r}",
        "weights " + " ".join(repr(w) for w in model.weights),
        f"vocab_size {model.vocab_size}",
        f"vocab {vocab_ref}",
        *dump_tables(model.tables),
    ]


def parse_model(lines: list[str], pos: int = 0) -> tuple[NgramModel, int]:
    if lines[pos].strip() != NGRAM_VERSION:
        raise FormatError(f"expected {NGRAM_VERSION!r}, got {lines[pos]!r}")
    order = int(header_value(lines, pos + 1, "order"))
    alpha = float(header_value(lines, pos + 2, "alpha"))
    weights = tuple(float(w) for w in header_value(lines, pos + 3, "weights").split())
    vocab_size = int(header_value(lines, pos + 4, "vocab_size"))
    header_value(lines, pos + 5, "vocab")
    tables, end = parse_tables(lines, pos + 6, order)
    return NgramModel(order, alpha, weights, vocab_size, tuple(tables)), end


def save_model(model: NgramModel, path, vocab_ref: str = "-") -> None:
    Path(path).write_text("\n".join(model_lines(model, vocab_ref)) + "\n")


def load_model(path) -> NgramModel:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty model file")
    return parse_model(lines)[0]
