"""Speculative-decoding lab: n-gram target, hybrid serial/parallel drafter, draft
trees with full-tree supplementation, lossless verification, expected-length
theory and an experiment harness."""

from .core import (
    BYTE,
    WORD,
    BadCosts,
    BadTemperature,
    BadWeights,
    ConfigError,
    ConstraintViolation,
    CorpusTooShort,
    EmptyCorpus,
    FormatError,
    Infeasible,
    LabError,
    TokenSeq,
    UnknownSymbol,
    Vocab,
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
from .drafter import (
    HYBRID,
    PARALLEL_ONLY,
    SERIAL_ONLY,
    Drafter,
    DrafterConfig,
    load_drafter,
    parallel_expand,
    save_drafter,
    serial_expand,
    train_drafter,
)
from .harness import (
    Costs,
    DecodeConfig,
    ExperimentConfig,
    ExperimentReport,
    RoundReport,
    TargetConfig,
    TreeConfig,
    compare_architectures,
    cost_speedup,
    load_config,
    run_experiment,
    save_config,
    speculative_generate,
    write_report,
)
from .ngram import (
    NgramModel,
    greedy_next,
    load_model,
    next_distribution,
    sample_next,
    save_model,
    train_ngram,
    vanilla_decode,
)
from .theory import (
    Redistribution,
    check_theorem1,
    expected_length,
    make_concentrated,
    make_improved,
    sample_redistribution,
)
from .tree import CandidateSet, DraftTree, apply_fta, build_draft_tree, build_tree, linearize, select_candidates
from .verify import VerifyResult, verify_greedy, verify_sampling

__version__ = "0.1.0"
