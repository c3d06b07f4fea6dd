"""
Growing and pruning a draft tree
================================

The drafter runs a small serial model for two steps, keeping the top-k
tokens at each step, then asks five skip-gram heads what comes at depths
3..7 given the two serial tokens.  Each node is scored by the product of
confidences along its path and the best few nodes are kept.
"""

from specdraft import ExperimentConfig, build_draft_tree, decode, select_candidates
from specdraft.harness import prepare

lab = prepare(ExperimentConfig())
held = lab.heldout_tokens.tolist()
# byte tokens line up with characters, so a text search gives a token offset
end = decode(held, lab.vocab).find(b" of the ", 4000) + len(b" of the ")
ctx = held[end - 32:end]
print("context:", decode(ctx, lab.vocab))

tree = build_draft_tree(lab.drafter, ctx, topk=4, s=3)
print(f"{len(tree)} nodes: {tree.serial_count} serial, {len(tree.slots)} parallel slots")

# the serial part, depth first
for nid in tree.child_ids(0):
    n = tree.node(nid)
    kids = [tree.node(c) for c in tree.child_ids(nid) if tree.node(c).region == n.region]
    shown = ", ".join(f"{decode([k.token], lab.vocab)!r}:{k.score:.3f}" for k in kids)
    print(f"  {decode([n.token], lab.vocab)!r} ({n.score:.3f}) -> {shown}")

# %%
# Keep the 12 best nodes.  A parallel node only makes sense together with a
# token at every depth above it, so gaps are filled with the best choice from
# the same slot.
cands = select_candidates(tree, 12)
for path in cands.token_paths():
    print("  candidate:", decode(path, lab.vocab))
print("tokens fed to the verifier:", cands.total_length())
