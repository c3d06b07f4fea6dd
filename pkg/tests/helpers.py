"""Small builders shared by several test modules."""

from specdraft.core import build_vocab, tokenize
from specdraft.tree import DraftTree, SERIAL


def word_tokens(text: str):
    vocab = build_vocab(text.encode(), "word")
    return vocab, tokenize(text.encode(), vocab)


def random_tree(rng, max_nodes: int = 200, levels=(0.25, 0.5, 0.75, 1.0), max_anchors: int = 3, max_slot: int = 7):
    """Random serial tree plus parallel slots; confidences come from a coarse grid so ties are common."""
    tree = DraftTree(int(rng.integers(0, 50)))
    n_serial = int(rng.integers(1, 20))
    for _ in range(n_serial):
        parent = int(rng.integers(0, len(tree.serial)))
        if tree.serial[parent].depth >= 3:
            parent = 0
        tree.add(int(rng.integers(0, 50)), parent, float(rng.choice(levels)), SERIAL)
    anchors = rng.choice(len(tree.serial), size=min(len(tree.serial), int(rng.integers(1, max_anchors + 1))), replace=False)
    for a in sorted(int(x) for x in anchors):
        for offset in range(1, int(rng.integers(1, 6)) + 1):
            if len(tree) >= max_nodes:
                break
            s = min(int(rng.integers(1, max_slot + 1)), max_nodes - len(tree))
            toks = rng.choice(50, size=s, replace=False)
            tree.add_slot(a, tree.serial[a].depth + offset,
                          [(int(t), float(rng.choice(levels))) for t in toks])
    return tree
