"""Draft-token proposers built from counts.

The hybrid drafter runs a strong serial n-gram head autoregressively for the
first ``steps`` positions, then a bank of skip-gram heads that all read the
same two serial tokens and each predict one later position.  Each skip-gram
head stands in for one small MLP: it sees only the serial outputs and never
another head's output, which is the information structure that matters here.

Baselines: ``serial_only`` applies the serial head for every position, and
``parallel_only`` uses one skip-gram head per position, each conditioned on
the last verified token alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ConfigError, CorpusTooShort, FormatError
from .ngram import (
    CountTable,
    NgramModel,
    count_windows,
    default_weights,
    dump_tables,
    model_lines,
    parse_model,
    parse_tables,
    smoothed,
    top_tokens,
    train_ngram,
)
from .tree import DraftTree, SERIAL

HYBRID = "hybrid"
SERIAL_ONLY = "serial_only"
PARALLEL_ONLY = "parallel_only"
ARCHITECTURES = (HYBRID, SERIAL_ONLY, PARALLEL_ONLY)


@dataclass(frozen=True)
class DrafterConfig:
    architecture: str = HYBRID
    serial_order: int = 3
    serial_steps: int = 2
    parallel_offsets: tuple[int, ...] = (1, 2, 3, 4, 5)
    alpha: float = 0.1

    @property
    def draft_len(self) -> int:
        if self.architecture == HYBRID:
            return self.serial_steps + len(self.parallel_offsets)
        if self.architecture == SERIAL_ONLY:
            return self.serial_steps
        return len(self.parallel_offsets)


@dataclass(frozen=True)
class SerialHead:
    model: NgramModel
    steps: int = 2


@dataclass(frozen=True, eq=False)
class ParallelHead:
    """Skip-gram table P(y[j+c-1+offset] | y[j .. j+c-1]) with additive smoothing.

    ``cond_len`` is 2 for hybrid heads (the two serial tokens) and 1 for
    parallel-only heads (the last verified token).
    """

    offset: int
    cond_len: int
    alpha: float
    vocab_size: int
    table: CountTable
    _cache: dict = field(default_factory=dict, repr=False)
    _top: dict = field(default_factory=dict, repr=False)

    def top(self, cond: Sequence[int], k: int) -> list[tuple[int, float]]:
        key = (tuple(cond[-self.cond_len:]), k)
        hit = self._top.get(key)
        if hit is None:
            hit = self._top[key] = tuple(top_tokens(self.distribution(cond), k))
        return hit

    def distribution(self, cond: Sequence[int]) -> np.ndarray:
        key = tuple(cond[-self.cond_len:])
        hit = self._cache.get(key)
        if hit is None:
            hit = smoothed(self.table, key, self.alpha, self.vocab_size)
            hit.flags.writeable = False
            self._cache[key] = hit
        return hit


def train_parallel_head(tokens: np.ndarray, offset: int, cond_len: int, alpha: float,
                        vocab_size: int) -> ParallelHead:
    table = count_windows(tokens, cond_len, gap=offset - 1)
    return ParallelHead(offset, cond_len, alpha, vocab_size, table)


@dataclass(frozen=True)
class Drafter:
    architecture: str
    serial: SerialHead | None
    parallel: tuple[ParallelHead, ...] = ()

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if self.architecture != PARALLEL_ONLY and self.serial is None:
            raise ConfigError(f"{self.architecture} drafter needs a serial head")
        if self.architecture == SERIAL_ONLY and self.parallel:
            raise ConfigError("serial_only drafter takes no parallel heads")
        if self.architecture == PARALLEL_ONLY and self.serial_steps:
            raise ConfigError("parallel_only drafter takes no serial steps")
        cond = 2 if self.architecture == HYBRID else 1
        if any(h.cond_len != cond for h in self.parallel):
            raise ConfigError(f"{self.architecture} heads must condition on {cond} token(s)")
        if self.architecture == HYBRID and self.serial.steps != 2 and self.parallel:
            raise ConfigError("hybrid parallel heads read exactly two serial tokens")

    @property
    def serial_steps(self) -> int:
        if self.architecture == PARALLEL_ONLY or self.serial is None:
            return 0
        return self.serial.steps

    @property
    def draft_len(self) -> int:
        return self.serial_steps + len(self.parallel)


def train_drafter(corpus_tokens: Sequence[int], config: DrafterConfig, vocab_size: int) -> Drafter:
    arch = config.architecture
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {arch!r}")
    tokens = np.asarray(corpus_tokens, dtype=np.int64)
    offsets = tuple(config.parallel_offsets) if arch != SERIAL_ONLY else ()
    cond = 2 if arch == HYBRID else 1
    need = max([config.serial_order] + [cond + o for o in offsets])
    if len(tokens) < need:
        raise CorpusTooShort(f"drafter needs at least {need} tokens, got {len(tokens)}")
    serial = None
    if arch != PARALLEL_ONLY:
        model = train_ngram(tokens, config.serial_order, config.alpha,
                            default_weights(config.serial_order), vocab_size)
        serial = SerialHead(model, config.serial_steps)
    heads = tuple(train_parallel_head(tokens, o, cond, config.alpha, vocab_size) for o in offsets)
    return Drafter(arch, serial, heads)


def serial_expand(drafter: Drafter, context: Sequence[int], topk: int) -> DraftTree:
    """Serial part of the draft tree, ``serial_steps`` deep.

    Depth 1 holds the serial head's ``topk`` tokens; every node of the last
    expanded layer's ``topk`` best nodes gets ``topk`` children.  With two
    steps that is all ``topk**2`` depth-2 nodes.
    """
    if topk < 1:
        raise ConfigError("topk must be >= 1")
    tree = DraftTree(root_token=context[-1] if context else -1, context=tuple(context))
    frontier = [0]
    for depth in range(1, drafter.serial_steps + 1):
        layer = []
        for nid in frontier:
            path = tree.tokens_to(nid)
            for tok, conf in drafter.serial.model.top(tuple(context) + path, topk):
                layer.append(tree.add(tok, nid, conf, SERIAL))
        frontier = tree.best(layer, topk)
    return tree


def parallel_expand(drafter: Drafter, serial_pair: Sequence[int], s: int) -> list[list[tuple[int, float]]]:
    """Top-``s`` tokens of every parallel head, all from the same input."""
    if s < 1:
        raise ConfigError("s must be >= 1")
    return [head.top(serial_pair, s) for head in drafter.parallel]


def head_accuracy(drafter: Drafter, tokens: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Top-1 accuracy of each parallel head on ``tokens`` given the true inputs.

    Returns ``(hits, trials)`` per head.
    """
    arr = np.asarray(tokens, dtype=np.int64)
    hits, trials = [], []
    for head in drafter.parallel:
        n = len(arr) - head.cond_len - head.offset + 1
        h = 0
        for j in range(max(n, 0)):
            cond = tuple(arr[j:j + head.cond_len].tolist())
            target = arr[j + head.cond_len - 1 + head.offset]
            h += int(np.argmax(head.distribution(cond)) == target)
        hits.append(h)
        trials.append(max(n, 0))
    return np.array(hits), np.array(trials)


# Persistence: drafter header followed by the serial model (n-gram schema)
# and one skip-gram table block per head.
#   drafter v1
#   architecture <name>
#   serial_steps <n>
#   offsets <o1> ... <oK>
#   cond_len <c>
#   alpha <float>
#   vocab_size <V>
#   serial <0|1>
#   [ngram v1 block]
#   head <offset>
#   table 1 <n_contexts>  ...

DRAFTER_VERSION = "drafter v1"


def save_drafter(drafter: Drafter, path) -> None:
    heads = drafter.parallel
    vocab_size = drafter.serial.model.vocab_size if drafter.serial else heads[0].vocab_size
    alpha = heads[0].alpha if heads else drafter.serial.model.alpha
    lines = [
        DRAFTER_VERSION,
        f"architecture {drafter.architecture}",
        f"serial_steps {drafter.serial_steps}",
        "offsets " + " ".join(str(h.offset) for h in heads),
        f"cond_len {heads[0].cond_len if heads else 0}",
        f"alpha {alpha!r}",
        f"vocab_size {vocab_size}",
        f"serial {int(drafter.serial is not None)}",
    ]
    if drafter.serial is not None:
        lines += model_lines(drafter.serial.model)
    for h in heads:
        lines.append(f"head {h.offset}")
        lines += dump_tables([h.table])
    Path(path).write_text("\n".join(lines) + "\n")


def load_drafter(path) -> Drafter:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != DRAFTER_VERSION:
        raise FormatError(f"{path}: expected {DRAFTER_VERSION!r} header")
    fields = {}
    for i in range(1, 8):
        key, _, value = lines[i].partition(" ")
        fields[key] = value
    arch = fields["architecture"]
    steps = int(fields["serial_steps"])
    offsets = [int(o) for o in fields["offsets"].split()]
    cond_len = int(fields["cond_len"])
    alpha = float(fields["alpha"])
    vocab_size = int(fields["vocab_size"])
    pos = 8
    serial = None
    if fields["serial"] == "1":
        model, pos = parse_model(lines, pos)
        serial = SerialHead(model, steps)
    heads = []
    for off in offsets:
        if lines[pos].split() != ["head", str(off)]:
            raise FormatError(f"{path}: expected 'head {off}' at line {pos + 1}")
        (table,), pos = parse_tables(lines, pos + 1, 1)
        heads.append(ParallelHead(off, cond_len, alpha, vocab_size, table))
    return Drafter(arch, serial, tuple(heads))


def sample_chain(drafter: Drafter, context: Sequence[int], rng: np.random.Generator,
                 temperature: float = 1.0) -> tuple[tuple[int, ...], dict[tuple, np.ndarray]]:
    """Draw one draft chain from the heads instead of picking top tokens.

    Returns the chain and, for every position, the distribution its token was
    drawn from (keyed by the chain prefix ending in that token), which is what
    sampling verification needs to stay lossless for sampled drafts.
    """
    from .ngram import apply_temperature, draw

    ctx = tuple(context)
    chain: tuple[int, ...] = ()
    proposals = {}
    for _ in range(drafter.serial_steps):
        q = apply_temperature(drafter.serial.model.next_distribution(ctx + chain), temperature)
        x = draw(q, rng)
        chain += (x,)
        proposals[chain] = q
    if drafter.parallel:
        cond = (ctx + chain)[-drafter.parallel[0].cond_len:]
        for head in drafter.parallel:
            q = apply_temperature(head.distribution(cond), temperature)
            x = draw(q, rng)
            chain += (x,)
            proposals[chain] = q
    return chain, proposals


def forced_chain(drafter: Drafter, context: Sequence[int], reference: Sequence[int]) -> tuple[int, ...]:
    """Top-1 draft at every position when earlier positions hold ``reference``.

    Serial position ``k`` reads the context plus ``reference[:k-1]``; every
    parallel head reads the serial tokens taken from ``reference``.  This is
    the head-by-head prediction with true inputs, one per draft position.
    """
    ctx = tuple(context)
    ref = tuple(reference)
    out = [drafter.serial.model.top(ctx + ref[:k], 1)[0][0] for k in range(drafter.serial_steps)]
    if drafter.parallel:
        cond = (ctx + ref[:drafter.serial_steps])[-drafter.parallel[0].cond_len:]
        out += [h.top(cond, 1)[0][0] for h in drafter.parallel]
    return tuple(out)
