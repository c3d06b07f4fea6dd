"""Lossless verification of candidate paths against the target model.

Candidates are merged into a token trie.  Greedy verification walks the trie
while the target's argmax matches a child.  Sampling verification offers the
children of the current trie node one at a time, best draft score first,
using the speculative-sampling rule: accept ``x`` with probability
``min(1, p(x) / q(x))``, otherwise replace ``p`` by the normalised residual
``max(0, p - q)`` and try the next child.  When every child is rejected the
bonus token is drawn from whatever residual remains.

The proposal ``q`` of a child must be the distribution the child was drawn
from.  Tree candidates are picked deterministically by score, so their
proposal is a point mass on the token itself; the rule then accepts ``x``
with probability ``p(x)`` and removes ``x`` from ``p`` on rejection.  Chains
sampled from the heads carry the head distributions instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import BadTemperature, TokenSeq
from .ngram import NgramModel, apply_temperature, draw, greedy_next
from .tree import CandidateSet


@dataclass(frozen=True)
class VerifyResult:
    accepted: TokenSeq
    bonus: int
    source_path_id: int

    @property
    def accepted_len(self) -> int:
        return len(self.accepted)

    @property
    def emitted(self) -> TokenSeq:
        return self.accepted + (self.bonus,)


def candidate_trie(candidates) -> tuple[dict[tuple, list[int]], list[tuple[int, ...]]]:
    """Map each token prefix to its children, best draft score first.

    ``candidates`` is a CandidateSet or a plain sequence of token paths, in
    which case earlier paths rank higher.
    """
    if isinstance(candidates, CandidateSet):
        tree = candidates.tree
        paths = candidates.token_paths()
        keys = [[tree.key(i) for i in p] for p in candidates.paths]
    else:
        paths = [tuple(p) for p in candidates]
        keys = [[(rank, d) for d in range(len(p))] for rank, p in enumerate(paths)]
    best: dict[tuple, dict[int, tuple]] = {}
    for toks, ks in zip(paths, keys):
        for d, (tok, k) in enumerate(zip(toks, ks)):
            slot = best.setdefault(toks[:d], {})
            if tok not in slot or k < slot[tok]:
                slot[tok] = k
    trie = {prefix: sorted(slot, key=slot.get) for prefix, slot in best.items()}
    return trie, paths


def _source(paths: list[tuple[int, ...]], accepted: TokenSeq) -> int:
    for i, p in enumerate(paths):
        if p[:len(accepted)] == accepted:
            return i
    return -1


def verify_greedy(target: NgramModel, context: Sequence[int], candidates) -> VerifyResult:
    trie, paths = candidate_trie(candidates)
    ctx = list(context)
    accepted: tuple[int, ...] = ()
    while True:
        tok = greedy_next(target, ctx)
        if tok not in trie.get(accepted, ()):
            return VerifyResult(accepted, tok, _source(paths, accepted))
        accepted += (tok,)
        ctx.append(tok)


def speculative_accept(p: np.ndarray, q: np.ndarray | None, x: int, u: float) -> tuple[bool, np.ndarray]:
    """One accept/reject step for draft ``x`` with proposal ``q`` (None = point mass).

    Returns ``(accepted, residual)``; ``residual`` is ``p`` when accepted.
    """
    qx = 1.0 if q is None else float(q[x])
    if qx <= 0.0:
        raise ValueError(f"draft token {x} has zero proposal probability")
    if u < min(1.0, p[x] / qx):
        return True, p
    if q is None:
        res = p.copy()
        res[x] = 0.0
    else:
        res = np.maximum(p - q, 0.0)
    total = res.sum()
    if total <= 0.0:
        # only reachable through rounding when p == q; p itself is the exact residual then
        return False, p
    return False, res / total


def verify_sampling(target: NgramModel, context: Sequence[int], candidates, temperature: float,
                    rng: np.random.Generator,
                    proposals: Mapping[tuple, np.ndarray] | None = None) -> VerifyResult:
    """Multi-draft speculative sampling over the candidate trie.

    ``proposals`` maps a token path (prefix plus the child token) to the
    distribution that child was sampled from; children without an entry are
    treated as deterministic picks.
    """
    if not temperature > 0:
        raise BadTemperature(f"temperature must be > 0, got {temperature}")
    trie, paths = candidate_trie(candidates)
    proposals = proposals or {}
    ctx = list(context)
    accepted: tuple[int, ...] = ()
    while True:
        p = apply_temperature(target.next_distribution(ctx), temperature)
        nxt = None
        for x in trie.get(accepted, ()):
            ok, p = speculative_accept(p, proposals.get(accepted + (x,)), x, rng.random())
            if ok:
                nxt = x
                break
        if nxt is None:
            return VerifyResult(accepted, draw(p, rng), _source(paths, accepted))
        accepted += (nxt,)
        ctx.append(nxt)
