"""
Sampling without changing the distribution
==========================================

With a temperature the verifier accepts draft tokens at random and, on a
rejection, draws from what is left of the target distribution.  Done right,
the first emitted token follows the target exactly, however good or bad the
draft was.  Here we count first tokens over many rounds on a 12-word corpus.
"""

import numpy as np

from specdraft import ExperimentConfig, apply_fta, build_draft_tree, select_candidates, synthetic_corpus, verify_sampling
from specdraft.core import make_rng
from specdraft.harness import DecodeConfig, prepare
from specdraft.ngram import apply_temperature

cfg = ExperimentConfig(tokenizer="word", decode=DecodeConfig(prompt_len=8))
lab = prepare(cfg, synthetic_corpus(12, 30_000, seed=0))
ctx = lab.heldout_tokens[:8].tolist()
cands = apply_fta(select_candidates(build_draft_tree(lab.drafter, ctx, 10, 35), 20))

rng = make_rng(0)
for T in (1.0, 0.6):
    counts = np.zeros(lab.vocab.size)
    for _ in range(20_000):
        counts[verify_sampling(lab.target, ctx, cands, T, rng).emitted[0]] += 1
    p = apply_temperature(lab.target.next_distribution(ctx), T)
    tv = 0.5 * np.abs(counts / counts.sum() - p).sum()
    print(f"T={T}: target {np.round(p, 3)}")
    print(f"       seen   {np.round(counts / counts.sum(), 3)}  TV={tv:.4f}")
