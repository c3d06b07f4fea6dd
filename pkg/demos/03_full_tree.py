"""
Lending tokens to short candidates
==================================

Pruning can leave a candidate that stops early while a sibling under the
same serial prefix goes deeper.  Copying the deeper tokens onto the short
path gives it more chances to be accepted, and since those tokens are
already in the verification batch it costs nothing extra.
"""

from specdraft import CandidateSet, DraftTree, apply_fta, linearize
from specdraft.tree import fta_extension

# parallel slots straight under the root
tree = DraftTree(0)
tree.add_slot(0, 1, [(11, 0.9), (21, 0.8)])
tree.add_slot(0, 2, [(22, 0.3)])
tree.add_slot(0, 3, [(23, 0.1)])
ids = {n.token: n.id for n in tree.nodes[1:]}

short = CandidateSet(tree, ((ids[11],), (ids[21], ids[22], ids[23])), budget=4)
full = apply_fta(short)
print("before:", short.token_paths())
print("after: ", full.token_paths())
print("extra path tokens:", fta_extension(short, full))
print("batch size before/after:", linearize(short).size, linearize(full).size)

# %%
# On real text: pair every round with and without the extension.
from specdraft import ExperimentConfig
from specdraft.harness import TreeConfig, paired_fta_rounds, prepare, sample_prompts
from specdraft.core import make_rng

lab = prepare(ExperimentConfig())
prompts = sample_prompts(lab.heldout_tokens, 32, 20, make_rng(1))
for budget in (8, 40):
    rounds = [r for p in prompts for r in paired_fta_rounds(lab.target, lab.drafter, p, 20, TreeConfig(budget=budget))]
    won = sum(r.accepted_on > r.accepted_off for r in rounds)
    lost = sum(r.accepted_on < r.accepted_off for r in rounds)
    print(f"budget {budget:2d}: {len(rounds)} rounds, longer in {won}, shorter in {lost}")
