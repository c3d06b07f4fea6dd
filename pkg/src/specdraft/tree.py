"""Draft trees, candidate selection and full-tree supplementation.

Serial nodes form an ordinary tree.  Parallel tokens are stored once per
``(anchor, depth, token)``, where the anchor is the last serial node they
hang from; their score is ``score(anchor) * confidence``.  Paths through the
parallel region are never materialised in the tree: any token a head proposed
at one depth may be combined with any token proposed at another depth under
the same anchor, and paths are formed only when candidates are selected.

Parallel records live in per-head slots (plain arrays sorted best first) and
get ids in contiguous blocks after all serial nodes; ``DraftTree.node``
materialises a record on demand.

Every ordering uses the key ``(-score, depth, token, node id)``.
"""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SERIAL = "serial"
PARALLEL = "parallel"


@dataclass(frozen=True)
class Node:
    id: int
    token: int
    parent: int
    depth: int
    score: float
    conf: float
    region: str
    anchor: int  # last serial node on the way to this node (itself for serial nodes)


@dataclass(frozen=True)
class Slot:
    """Proposals of one parallel head under one anchor, best first."""

    anchor: int
    depth: int
    base: int
    tokens: tuple[int, ...]
    confs: tuple[float, ...]
    scores: tuple[float, ...]

    def __len__(self):
        return len(self.tokens)

    @property
    def ids(self) -> range:
        return range(self.base, self.base + len(self.tokens))


class DraftTree:
    def __init__(self, root_token: int, context: tuple = ()):
        self.context = context
        self.serial: list[Node] = [Node(0, root_token, -1, 0, 1.0, 1.0, SERIAL, 0)]
        self.children: list[list[int]] = [[]]
        self.slots: list[Slot] = []
        self.slot_at: dict[tuple[int, int], Slot] = {}
        self.anchor_slots: dict[int, list[Slot]] = {}
        self._bases: list[int] = []

    def __len__(self):
        return self.serial_count + sum(len(s) for s in self.slots)

    @property
    def serial_count(self) -> int:
        return len(self.serial)

    def add(self, token: int, parent: int, conf: float, region: str = SERIAL) -> int:
        if self.slots:
            raise ValueError("serial nodes must be added before parallel records")
        p = self.serial[parent]
        nid = len(self.serial)
        self.serial.append(Node(nid, token, parent, p.depth + 1, p.score * conf, conf, SERIAL, nid))
        self.children.append([])
        self.children[parent].append(nid)
        return nid

    def add_slot(self, anchor: int, depth: int, proposals) -> Slot:
        """Attach one head's ``(token, confidence)`` proposals below ``anchor``."""
        a = self.serial[anchor].score
        toks = np.fromiter((t for t, _ in proposals), dtype=np.int64, count=len(proposals))
        confs = np.fromiter((c for _, c in proposals), dtype=float, count=len(proposals))
        scores = a * confs
        order = np.lexsort((toks, -scores))
        slot = Slot(anchor, depth, len(self), tuple(toks[order].tolist()),
                    tuple(confs[order].tolist()), tuple(scores[order].tolist()))
        self.slots.append(slot)
        self._bases.append(slot.base)
        self.slot_at[(anchor, depth)] = slot
        self.anchor_slots.setdefault(anchor, []).append(slot)
        return slot

    def slot_of(self, nid: int) -> Slot:
        return self.slots[bisect.bisect_right(self._bases, nid) - 1]

    def node(self, nid: int) -> Node:
        if nid < len(self.serial):
            return self.serial[nid]
        s = self.slot_of(nid)
        i = nid - s.base
        return Node(nid, s.tokens[i], s.anchor, s.depth, s.scores[i], s.confs[i], PARALLEL, s.anchor)

    @property
    def nodes(self) -> list[Node]:
        return [self.node(i) for i in range(len(self))]

    def key(self, nid: int):
        if nid < len(self.serial):
            n = self.serial[nid]
            return (-n.score, n.depth, n.token, nid)
        s = self.slot_of(nid)
        i = nid - s.base
        return (-s.scores[i], s.depth, s.tokens[i], nid)

    def child_ids(self, nid: int) -> list[int]:
        out = list(self.children[nid]) if nid < len(self.serial) else []
        for s in self.anchor_slots.get(nid, ()):
            out.extend(s.ids)
        return out

    def best(self, ids, k: int) -> list[int]:
        return sorted(ids, key=self.key)[:k]

    def path_ids(self, nid: int) -> list[int]:
        """Stored parent chain from just below the root to ``nid``."""
        out = []
        while nid > 0:
            out.append(nid)
            nid = self.node(nid).parent
        return out[::-1]

    def tokens_to(self, nid: int) -> tuple[int, ...]:
        return tuple(self.node(i).token for i in self.path_ids(nid))

    @property
    def max_depth(self) -> int:
        return max([n.depth for n in self.serial] + [s.depth for s in self.slots])

    @property
    def serial_depth(self) -> int:
        return max(n.depth for n in self.serial)


def build_tree(serial_part: DraftTree, parallel_lists: dict[int, list[list[tuple[int, float]]]]) -> DraftTree:
    """Attach parallel proposals below their anchors.

    ``parallel_lists`` maps an anchor node id to the per-offset lists returned
    by ``parallel_expand``; offset ``i`` lands at depth ``depth(anchor) + i``.
    The serial part is copied, not modified.
    """
    if serial_part.slots:
        raise ValueError("serial part already carries parallel records")
    tree = DraftTree(serial_part.serial[0].token, serial_part.context)
    tree.serial = list(serial_part.serial)
    tree.children = [list(c) for c in serial_part.children]
    for anchor in sorted(parallel_lists):
        base = tree.serial[anchor].depth
        for offset, cands in enumerate(parallel_lists[anchor], start=1):
            if cands:
                tree.add_slot(anchor, base + offset, cands)
    return tree


def build_draft_tree(drafter, context, topk: int, s: int) -> DraftTree:
    """Full drafting step: serial expansion, then parallel heads on the best anchors."""
    from .drafter import HYBRID, PARALLEL_ONLY, parallel_expand, serial_expand

    tree = serial_expand(drafter, context, topk)
    if not drafter.parallel:
        return tree
    if drafter.architecture == PARALLEL_ONLY:
        anchors = [0]
    else:
        last = [n.id for n in tree.serial if n.depth == drafter.serial_steps]
        anchors = tree.best(last, topk)
    cond_len = 2 if drafter.architecture == HYBRID else 1
    lists = {}
    for a in anchors:
        cond = (tuple(context) + tree.tokens_to(a))[-cond_len:]
        lists[a] = parallel_expand(drafter, cond, s)
    return build_tree(tree, lists)


@dataclass(frozen=True)
class CandidateSet:
    tree: DraftTree = field(repr=False)
    paths: tuple[tuple[int, ...], ...]  # node ids, root excluded
    budget: int
    selected: frozenset = frozenset()

    def token_paths(self) -> list[tuple[int, ...]]:
        node = self.tree.node
        return [tuple(node(i).token for i in p) for p in self.paths]

    @property
    def distinct_tokens(self) -> frozenset:
        """Distinct verification entries: one per (depth, token) under a serial prefix.

        Parallel records are unique per (anchor, depth, token) and serial nodes
        are unique per prefix, so node ids identify entries exactly.
        """
        return frozenset(i for p in self.paths for i in p)

    def total_length(self) -> int:
        return sum(len(p) for p in self.paths)


def _maximal(paths: list[tuple[int, ...]]) -> tuple[tuple[int, ...], ...]:
    uniq = list(dict.fromkeys(paths))
    prefixes = {p[:k] for p in uniq for k in range(len(p))}
    return tuple(p for p in uniq if p not in prefixes)


def implied_path(tree: DraftTree, nid: int, selected: set) -> tuple[int, ...]:
    """Root path of ``nid``; parallel gaps take the best selected token, else the head's best."""
    n = tree.node(nid)
    if n.region == SERIAL:
        return tuple(tree.path_ids(nid))
    a = tree.serial[n.anchor]
    fill = []
    for d in range(a.depth + 1, n.depth):
        slot = tree.slot_at[(n.anchor, d)]
        # slots are sorted best first, so the first selected id is the best one
        fill.append(next((i for i in slot.ids if i in selected), slot.base))
    return tuple(tree.path_ids(n.anchor)) + tuple(fill) + (nid,)


def select_candidates(tree: DraftTree, budget: int) -> CandidateSet:
    """Take the ``budget`` best nodes and the maximal root paths they imply.

    Best-first search over sorted child groups: a node's key is never better
    than its parent's, so the frontier only needs the head of each group
    opened by a selected node, advanced one step whenever that head is taken.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    groups: list = []
    heap: list = []

    def open_groups(nid: int):
        if nid >= tree.serial_count:
            return
        kids = tree.children[nid]
        if kids:
            groups.append(sorted(kids, key=tree.key))
            heapq.heappush(heap, (tree.key(groups[-1][0]), len(groups) - 1, 0))
        for s in tree.anchor_slots.get(nid, ()):
            groups.append(s.ids)
            heapq.heappush(heap, (tree.key(s.base), len(groups) - 1, 0))

    open_groups(0)
    chosen: list[int] = []
    while heap and len(chosen) < budget:
        _, g, idx = heapq.heappop(heap)
        nid = groups[g][idx]
        chosen.append(nid)
        if idx + 1 < len(groups[g]):
            heapq.heappush(heap, (tree.key(groups[g][idx + 1]), g, idx + 1))
        open_groups(nid)
    sel = set(chosen)
    paths = _maximal([implied_path(tree, nid, sel) for nid in chosen])
    return CandidateSet(tree, paths, budget, frozenset(sel))


def apply_fta(candidates: CandidateSet, tree: DraftTree | None = None) -> CandidateSet:
    """Extend short parallel-region paths with tokens other paths already use.

    A path ending in the parallel region borrows, for each missing depth, the
    best-scoring token that a longer path under the same anchor uses at that
    depth.  No new (depth, token) entries are introduced.
    """
    tree = tree or candidates.tree
    node = tree.node
    by_anchor: dict[int, list[tuple[int, ...]]] = {}
    for p in candidates.paths:
        by_anchor.setdefault(node(p[-1]).anchor, []).append(p)
    out = []
    for p in candidates.paths:
        last = node(p[-1])
        if last.region != PARALLEL:
            out.append(p)
            continue
        donors = [q for q in by_anchor[last.anchor] if len(q) > len(p)]
        ext = list(p)
        depth = last.depth + 1
        while True:
            pool = {i for q in donors for i in q if node(i).depth == depth}
            if not pool:
                break
            ext.append(min(pool, key=tree.key))
            depth += 1
        out.append(tuple(ext))
    return CandidateSet(tree, _maximal(out), candidates.budget, candidates.selected)


def fta_extension(before: CandidateSet, after: CandidateSet) -> int:
    """Tokens added by supplementation (total path length difference)."""
    return after.total_length() - before.total_length()


@dataclass(frozen=True)
class BatchEntry:
    node: int
    depth: int
    token: int
    ancestors: frozenset  # entry indices that directly precede this one in some path


@dataclass(frozen=True)
class VerificationBatch:
    entries: tuple[BatchEntry, ...]
    paths: tuple[tuple[int, ...], ...]  # entry indices per candidate path

    @property
    def size(self) -> int:
        return len(self.entries)


def linearize(candidates: CandidateSet) -> VerificationBatch:
    tree = candidates.tree
    index: dict[int, int] = {}
    preds: dict[int, set] = {}
    for p in candidates.paths:
        prev = None
        for nid in p:
            if nid not in index:
                index[nid] = len(index)
                preds[nid] = set()
            if prev is not None:
                preds[nid].add(index[prev])
            prev = nid
    entries = []
    for nid in index:
        n = tree.node(nid)
        entries.append(BatchEntry(nid, n.depth, n.token, frozenset(preds[nid])))
    paths = tuple(tuple(index[n] for n in p) for p in candidates.paths)
    return VerificationBatch(tuple(entries), paths)


def dump_tree(tree: DraftTree, path) -> None:
    """One node per line: id, parent, depth, token, score, region (tab separated)."""
    lines = ["tree v1"]
    lines += [f"{n.id}\t{n.parent}\t{n.depth}\t{n.token}\t{n.score!r}\t{n.region}" for n in tree.nodes]
    Path(path).write_text("\n".join(lines) + "\n")


def load_tree(path) -> DraftTree:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "tree v1":
        raise ValueError(f"{path}: not a tree dump")
    rows = [line.split("\t") for line in lines[1:]]
    tree = DraftTree(int(rows[0][3]))
    slots: dict[tuple[int, int], list] = {}
    for nid, parent, depth, token, score, region in rows[1:]:
        parent = int(parent)
        if region == SERIAL:
            p = tree.serial[parent].score
            tree.add(int(token), parent, float(score) / p if p else 0.0)
        else:
            slots.setdefault((parent, int(depth)), []).append((int(token), float(score)))
    for (anchor, depth), recs in slots.items():
        a = tree.serial[anchor].score
        tree.add_slot(anchor, depth, [(t, s / a if a else 0.0) for t, s in recs])
    return tree
