"""Experiment driver: configuration, the draft/verify loop, metrics and reports."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .core import (
    BYTE,
    BadCosts,
    ConfigError,
    FormatError,
    TokenSeq,
    build_vocab,
    default_corpus,
    tokenize,
)
from .drafter import (
    HYBRID,
    PARALLEL_ONLY,
    SERIAL_ONLY,
    Drafter,
    DrafterConfig,
    forced_chain,
    train_drafter,
)
from .ngram import NgramModel, train_ngram, vanilla_decode
from .tree import apply_fta, build_draft_tree, fta_extension, linearize, select_candidates
from .verify import VerifyResult, verify_greedy, verify_sampling


@dataclass(frozen=True)
class TargetConfig:
    order: int = 4
    alpha: float = 0.1
    weights: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)


@dataclass(frozen=True)
class TreeConfig:
    topk: int = 10
    s: int = 35
    budget: int = 8
    fta: bool = True


@dataclass(frozen=True)
class DecodeConfig:
    temperature: float = 0.0
    prompt_len: int = 32
    gen_len: int = 64
    num_prompts: int = 20
    seed: int = 0


@dataclass(frozen=True)
class Costs:
    """Per-round component costs in units of one target forward pass.

    The defaults are illustrative: two serial steps cost more than one batched
    parallel step, and both are cheap next to the target.
    """

    c_T: float = 0.10
    c_M: float = 0.05
    c_V: float = 1.0
    c_O: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_path: str = ""  # empty selects the bundled prose corpus
    tokenizer: str = BYTE
    target: TargetConfig = TargetConfig()
    drafter: DrafterConfig = DrafterConfig()
    tree: TreeConfig = TreeConfig()
    decode: DecodeConfig = DecodeConfig()
    costs: Costs = Costs()

    def validate(self) -> "ExperimentConfig":
        positive = {
            "target.order": self.target.order,
            "drafter.serial_order": self.drafter.serial_order,
            "tree.topk": self.tree.topk,
            "tree.s": self.tree.s,
            "tree.budget": self.tree.budget,
            "decode.prompt_len": self.decode.prompt_len,
            "decode.num_prompts": self.decode.num_prompts,
        }
        for name, v in positive.items():
            if v < 1:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.decode.gen_len < 0:
            raise ConfigError("decode.gen_len must be >= 0")
        if self.decode.temperature < 0:
            raise ConfigError("decode.temperature must be >= 0 (0 selects greedy)")
        if self.drafter.architecture not in (HYBRID, SERIAL_ONLY, PARALLEL_ONLY):
            raise ConfigError(f"unknown architecture {self.drafter.architecture!r}")
        if self.tokenizer not in (BYTE, "word"):
            raise ConfigError(f"unknown tokenizer {self.tokenizer!r}")
        try:
            check_costs(self.costs)
        except BadCosts as e:
            raise ConfigError(str(e)) from None
        return self


# --- config files -----------------------------------------------------------
# INI layout, one section per nested config, keys named exactly like the
# dataclass fields.  Top-level fields live in [experiment].  Tuples are
# space separated; booleans are on/off.

_SECTIONS = {
    "experiment": None,
    "target": TargetConfig,
    "drafter": DrafterConfig,
    "tree": TreeConfig,
    "decode": DecodeConfig,
    "costs": Costs,
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str, like, name: str):
    try:
        if isinstance(like, bool):
            if text.lower() not in ("on", "off", "true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("on", "true", "1")
        if isinstance(like, tuple):
            kind = type(like[0]) if like else float
            return tuple(kind(x) for x in text.replace(",", " ").split())
        return type(like)(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def config_items(config: ExperimentConfig) -> list[tuple[str, str, str]]:
    items = [("experiment", "corpus_path", config.corpus_path),
             ("experiment", "tokenizer", config.tokenizer)]
    for section, cls in _SECTIONS.items():
        if cls is None:
            continue
        sub = getattr(config, section)
        items += [(section, f.name, _fmt(getattr(sub, f.name))) for f in dataclasses.fields(cls)]
    return items


def config_from_items(items: dict[str, dict[str, str]]) -> ExperimentConfig:
    base = ExperimentConfig()
    kwargs = {}
    for section, values in items.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if section == "experiment":
            for key, text in values.items():
                if key not in ("corpus_path", "tokenizer"):
                    raise ConfigError(f"unknown key experiment.{key}")
                kwargs[key] = text
            continue
        cls = _SECTIONS[section]
        default = getattr(base, section)
        names = {f.name for f in dataclasses.fields(cls)}
        sub = {}
        for key, text in values.items():
            if key not in names:
                raise ConfigError(f"unknown key {section}.{key}")
            sub[key] = _parse(text, getattr(default, key), f"{section}.{key}")
        kwargs[section] = dataclasses.replace(default, **sub)
    return dataclasses.replace(base, **kwargs)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    items = {s: dict(parser.items(s)) for s in parser.sections()}
    return config_from_items(items).validate()


def save_config(config: ExperimentConfig, path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, key, value in config_items(config):
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    with open(path, "w") as fh:
        parser.write(fh)


# --- cost model -------------------------------------------------------------

def check_costs(costs: Costs) -> None:
    if min(costs.c_T, costs.c_M, costs.c_V, costs.c_O) < 0:
        raise BadCosts("costs must be non-negative")
    if not costs.c_V > 0:
        raise BadCosts("target forward cost c_V must be positive")


def round_cost(costs: Costs, serial_steps: int = 2, parallel: bool = True) -> float:
    return serial_steps * costs.c_T + (costs.c_M if parallel else 0.0) + costs.c_V + costs.c_O


def cost_speedup(tau: float, costs: Costs, serial_steps: int = 2, parallel: bool = True) -> float:
    """Tokens per unit cost relative to vanilla decoding (one token per ``c_V``)."""
    check_costs(costs)
    return tau * costs.c_V / round_cost(costs, serial_steps, parallel)


def architecture_round_cost(drafter: DrafterConfig, costs: Costs) -> float:
    """Round cost of a drafter layout: serial steps at ``c_T`` each, one ``c_M`` if any parallel heads."""
    steps = 0 if drafter.architecture == PARALLEL_ONLY else drafter.serial_steps
    parallel = drafter.architecture != SERIAL_ONLY and bool(drafter.parallel_offsets)
    return round_cost(costs, steps, parallel)


# --- the draft/verify loop --------------------------------------------------

@dataclass(frozen=True)
class RoundReport:
    round_index: int
    accepted_len: int
    bonus: int
    candidate_count: int
    distinct_token_count: int
    fta_extension: int


def draft_round(target: NgramModel, drafter: Drafter, context: Sequence[int], tree_cfg: TreeConfig,
                temperature: float = 0.0, rng: np.random.Generator | None = None,
                round_index: int = 0) -> tuple[VerifyResult, RoundReport]:
    tree = build_draft_tree(drafter, context, tree_cfg.topk, tree_cfg.s)
    cands = select_candidates(tree, tree_cfg.budget)
    ext = 0
    if tree_cfg.fta:
        full = apply_fta(cands)
        ext = fta_extension(cands, full)
        cands = full
    if temperature == 0:
        res = verify_greedy(target, context, cands)
    else:
        res = verify_sampling(target, context, cands, temperature, rng)
    rep = RoundReport(round_index, res.accepted_len, res.bonus, len(cands.paths),
                      linearize(cands).size, ext)
    return res, rep


def speculative_generate(target: NgramModel, drafter: Drafter, prompt: Sequence[int], n_tokens: int,
                         tree_cfg: TreeConfig = TreeConfig(), temperature: float = 0.0,
                         rng: np.random.Generator | None = None) -> tuple[TokenSeq, list[RoundReport]]:
    """Generate ``n_tokens`` with speculative decoding.

    The last round may overshoot; its surplus tokens are cut from the output
    but the round is reported as it happened.
    """
    ctx = list(prompt)
    out: list[int] = []
    rounds = []
    while len(out) < n_tokens:
        res, rep = draft_round(target, drafter, ctx, tree_cfg, temperature, rng, len(rounds))
        rounds.append(rep)
        out += res.emitted
        ctx += res.emitted
    return tuple(out[:n_tokens]), rounds


@dataclass(frozen=True)
class PairedRound:
    accepted_on: int
    accepted_off: int
    batch_on: int
    batch_off: int


def paired_fta_rounds(target: NgramModel, drafter: Drafter, prompt: Sequence[int], n_rounds: int,
                      tree_cfg: TreeConfig = TreeConfig(), temperature: float = 0.0,
                      seed: int = 0) -> list[PairedRound]:
    """Verify the same pre-supplementation candidates with and without FTA.

    Under sampling both arms get an identically seeded stream each round.  The
    context advances along the FTA arm.
    """
    from .core import make_rng

    ctx = list(prompt)
    out = []
    for i in range(n_rounds):
        tree = build_draft_tree(drafter, ctx, tree_cfg.topk, tree_cfg.s)
        off = select_candidates(tree, tree_cfg.budget)
        on = apply_fta(off)
        if temperature == 0:
            r_on = verify_greedy(target, ctx, on)
            r_off = verify_greedy(target, ctx, off)
        else:
            r_on = verify_sampling(target, ctx, on, temperature, make_rng(seed + i))
            r_off = verify_sampling(target, ctx, off, temperature, make_rng(seed + i))
        out.append(PairedRound(r_on.accepted_len, r_off.accepted_len,
                               linearize(on).size, linearize(off).size))
        ctx += r_on.emitted
    return out


# --- experiments ------------------------------------------------------------

@dataclass
class Lab:
    """Trained models plus the token split they came from."""

    config: ExperimentConfig
    vocab: object
    train_tokens: np.ndarray
    heldout_tokens: np.ndarray
    target: NgramModel
    drafter: Drafter


def read_corpus(config: ExperimentConfig) -> bytes:
    if not config.corpus_path:
        return default_corpus()
    return Path(config.corpus_path).read_bytes()


def prepare(config: ExperimentConfig, corpus: bytes | None = None, target: NgramModel | None = None) -> Lab:
    """Tokenize, split 90/10 and train the target and the drafter on the first 90%."""
    config.validate()
    corpus = read_corpus(config) if corpus is None else corpus
    vocab = build_vocab(corpus, config.tokenizer)
    tokens = np.asarray(tokenize(corpus, vocab), dtype=np.int64)
    cut = int(len(tokens) * 0.9)
    train, held = tokens[:cut], tokens[cut:]
    if target is None:
        target = train_ngram(train, config.target.order, config.target.alpha,
                             config.target.weights, vocab.size)
    drafter = train_drafter(train, config.drafter, vocab.size)
    return Lab(config, vocab, train, held, target, drafter)


@dataclass(frozen=True)
class ExperimentReport:
    tau: float
    rounds: int
    total_tokens: int
    per_position_accept_rate: tuple[float, ...]
    position_trials: tuple[int, ...]
    position_accepts: tuple[int, ...]
    cost_speedup: float
    config: ExperimentConfig
    # verification-based rates: position k accepted given positions < k were
    conditional_accept_rate: tuple[float, ...] = ()
    conditional_trials: tuple[int, ...] = ()
    conditional_accepts: tuple[int, ...] = ()
    round_reports: tuple[RoundReport, ...] = ()
    lossless: bool | None = None  # greedy runs only: SPD stream == vanilla stream
    empty: bool = False
    wall_time: float = field(default=0.0, compare=False)


def position_profile(target: NgramModel, drafter: Drafter, tokens: Sequence[int],
                     max_windows: int | None = None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Per-position acceptance on natural text: ``(accepts, trials)``.

    At every offset ``j`` of ``tokens`` the true text supplies the prefix, and
    position ``k`` counts as accepted when the drafter's top-1 token there
    (reading the true earlier tokens) equals the target's greedy token after
    ``tokens[:j + k - 1]``.  Every position is scored on every window, so the
    rates are free of the survivor effect that conditional verification rates
    carry: rounds reaching deep positions are biased towards easy contexts.
    """
    D = drafter.draft_len
    serial_order = drafter.serial.model.order if drafter.serial else 1
    w = max(target.order, serial_order, 3) - 1
    arr = list(map(int, tokens))
    starts = range(w, len(arr) - D + 1)
    if max_windows is not None:
        starts = starts[:max_windows]
    hits = np.zeros(D, dtype=np.int64)
    for j in starts:
        ctx, ref = tuple(arr[j - w:j]), tuple(arr[j:j + D])
        draft = forced_chain(drafter, ctx, ref)
        for k in range(D):
            hits[k] += draft[k] == target.top(ctx + ref[:k], 1)[0][0]
    return tuple(hits.tolist()), (len(starts),) * D


def position_stats(accepted: Sequence[int], D: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Per position k: rounds that reached k (accepted >= k-1) and rounds that accepted it."""
    acc = np.asarray(accepted, dtype=np.int64)
    trials = tuple(int((acc >= k - 1).sum()) for k in range(1, D + 1))
    accepts = tuple(int((acc >= k).sum()) for k in range(1, D + 1))
    return trials, accepts


def sample_prompts(held: np.ndarray, prompt_len: int, n: int, rng: np.random.Generator) -> list[TokenSeq]:
    if len(held) < prompt_len:
        raise ConfigError(f"held-out slice ({len(held)} tokens) shorter than prompt_len")
    starts = rng.integers(0, len(held) - prompt_len + 1, size=n)
    return [tuple(held[s:s + prompt_len].tolist()) for s in starts]


def run_lab(lab: Lab, check_lossless: bool = True) -> ExperimentReport:
    cfg = lab.config
    t0 = time.perf_counter()
    seq = np.random.SeedSequence(cfg.decode.seed)
    prompt_seq, *stream_seqs = seq.spawn(cfg.decode.num_prompts + 1)
    prompts = sample_prompts(lab.heldout_tokens, cfg.decode.prompt_len, cfg.decode.num_prompts,
                             np.random.Generator(np.random.PCG64(prompt_seq)))
    temp = cfg.decode.temperature
    reports: list[RoundReport] = []
    lossless = True if temp == 0 and check_lossless else None
    for prompt, ss in zip(prompts, stream_seqs):
        rng = np.random.Generator(np.random.PCG64(ss))
        out, rounds = speculative_generate(lab.target, lab.drafter, prompt, cfg.decode.gen_len,
                                           cfg.tree, temp, rng)
        if lossless is not None and out != vanilla_decode(lab.target, prompt, cfg.decode.gen_len):
            lossless = False
        base = len(reports)
        reports += [dataclasses.replace(r, round_index=base + i) for i, r in enumerate(rounds)]
    profile = position_profile(lab.target, lab.drafter, lab.heldout_tokens)
    return summarize(reports, cfg, lossless, time.perf_counter() - t0, profile)


def summarize(reports: Sequence[RoundReport], cfg: ExperimentConfig,
              lossless: bool | None = None, wall_time: float = 0.0,
              profile: tuple | None = None) -> ExperimentReport:
    """Aggregate rounds; ``profile`` is ``(accepts, trials)`` from ``position_profile``."""
    D = cfg.drafter.draft_len
    acc = [r.accepted_len for r in reports]
    c_trials, c_accepts = position_stats(acc, D)
    accepts, trials = profile if profile is not None else ((0,) * D, (0,) * D)
    n = len(reports)
    total = sum(acc) + n
    tau = total / n if n else 0.0
    speed = tau * cfg.costs.c_V / architecture_round_cost(cfg.drafter, cfg.costs)
    return ExperimentReport(tau, n, total, _rates(accepts, trials), trials, accepts, speed, cfg,
                            _rates(c_accepts, c_trials), c_trials, c_accepts, tuple(reports),
                            lossless, n == 0, wall_time)


def _rates(accepts, trials) -> tuple[float, ...]:
    return tuple(a / t if t else 0.0 for a, t in zip(accepts, trials))


def run_experiment(config: ExperimentConfig, corpus: bytes | None = None) -> ExperimentReport:
    return run_lab(prepare(config, corpus))


def decreasing_violations(accepts: Sequence[int], trials: Sequence[int], level: float = 0.99) -> list[int]:
    """Positions k where rate[k+1] is significantly above rate[k].

    One-sided pooled two-proportion z-test at ``level``; returns 1-based k.
    """
    z_crit = NormalDist().inv_cdf(level)
    bad = []
    for k in range(len(trials) - 1):
        n1, n2 = trials[k], trials[k + 1]
        if n1 == 0 or n2 == 0:
            continue
        p1, p2 = accepts[k] / n1, accepts[k + 1] / n2
        pooled = (accepts[k] + accepts[k + 1]) / (n1 + n2)
        se = (pooled * (1 - pooled) * (1 / n1 + 1 / n2)) ** 0.5
        if se == 0:
            if p2 > p1:
                bad.append(k + 1)
            continue
        if (p2 - p1) / se > z_crit:
            bad.append(k + 1)
    return bad


@dataclass(frozen=True)
class ArchitectureResult:
    architecture: str
    tau: float
    cost_speedup: float
    rates: tuple[float, ...]
    trials: tuple[int, ...]
    accepts: tuple[int, ...]


def architecture_configs(config: ExperimentConfig) -> dict[str, ExperimentConfig]:
    D = config.drafter.draft_len
    d = config.drafter
    return {
        HYBRID: dataclasses.replace(config, drafter=dataclasses.replace(d, architecture=HYBRID)),
        SERIAL_ONLY: dataclasses.replace(config, drafter=dataclasses.replace(
            d, architecture=SERIAL_ONLY, serial_steps=D, parallel_offsets=())),
        PARALLEL_ONLY: dataclasses.replace(config, drafter=dataclasses.replace(
            d, architecture=PARALLEL_ONLY, serial_steps=0, parallel_offsets=tuple(range(1, D + 1)))),
    }


def compare_architectures(config: ExperimentConfig, corpus: bytes | None = None,
                          architectures: Sequence[str] = (HYBRID, SERIAL_ONLY, PARALLEL_ONLY),
                          check_lossless: bool = False) -> list[ArchitectureResult]:
    """Run every architecture on the same corpus, prompts, seed and costs."""
    configs = architecture_configs(config)
    corpus = read_corpus(config) if corpus is None else corpus
    target = None
    out = []
    for arch in architectures:
        lab = prepare(configs[arch], corpus, target)
        target = lab.target
        rep = run_lab(lab, check_lossless)
        out.append(ArchitectureResult(arch, rep.tau, rep.cost_speedup, rep.per_position_accept_rate,
                                      rep.position_trials, rep.position_accepts))
    return out


# --- reports ----------------------------------------------------------------

RUN_COLUMNS = ["round", "accepted_len", "candidates", "distinct_tokens", "fta_extension"]
REPORT_VERSION = "report v1"


def write_report(report: ExperimentReport, fmt: str, path) -> None:
    """``csv`` writes the per-round table; ``text`` writes every field."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RUN_COLUMNS)
            for r in report.round_reports:
                w.writerow([r.round_index, r.accepted_len, r.candidate_count,
                            r.distinct_token_count, r.fta_extension])
        return
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        REPORT_VERSION,
        f"tau = {report.tau!r}",
        f"rounds = {report.rounds}",
        f"total_tokens = {report.total_tokens}",
        f"cost_speedup = {report.cost_speedup!r}",
        f"per_position_accept_rate = {_fmt(report.per_position_accept_rate)}",
        f"position_trials = {_fmt(report.position_trials)}",
        f"position_accepts = {_fmt(report.position_accepts)}",
        f"conditional_accept_rate = {_fmt(report.conditional_accept_rate)}",
        f"conditional_trials = {_fmt(report.conditional_trials)}",
        f"conditional_accepts = {_fmt(report.conditional_accepts)}",
        f"lossless = {'none' if report.lossless is None else _fmt(report.lossless)}",
        f"empty = {_fmt(report.empty)}",
        f"wall_time = {report.wall_time!r}",
    ]
    lines += [f"config.{s}.{k} = {v}" for s, k, v in config_items(report.config)]
    lines += [f"round = {r.round_index} {r.accepted_len} {r.bonus} {r.candidate_count} "
              f"{r.distinct_token_count} {r.fta_extension}" for r in report.round_reports]
    Path(path).write_text("\n".join(lines) + "\n")


def read_run_csv(path) -> list[RoundReport]:
    """Rounds from a run CSV; the bonus token is not part of that schema and reads as -1."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != RUN_COLUMNS:
        raise FormatError(f"{path}: expected header {','.join(RUN_COLUMNS)}")
    return [RoundReport(int(a), int(b), -1, int(c), int(d), int(e)) for a, b, c, d, e in rows[1:]]


def read_report(path) -> ExperimentReport:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != REPORT_VERSION:
        raise FormatError(f"{path}: expected {REPORT_VERSION!r} header")
    kv: dict[str, str] = {}
    cfg: dict[str, dict[str, str]] = {}
    rounds = []
    for line in lines[1:]:
        key, sep, value = line.partition(" = ")
        if not sep:
            raise FormatError(f"{path}: bad line {line!r}")
        if key == "round":
            rounds.append(RoundReport(*map(int, value.split())))
        elif key.startswith("config."):
            _, section, name = key.split(".", 2)
            cfg.setdefault(section, {})[name] = value
        else:
            kv[key] = value
    ints = lambda s: tuple(int(x) for x in s.split())  # noqa: E731
    floats = lambda s: tuple(float(x) for x in s.split())  # noqa: E731
    return ExperimentReport(
        tau=float(kv["tau"]),
        rounds=int(kv["rounds"]),
        total_tokens=int(kv["total_tokens"]),
        per_position_accept_rate=floats(kv["per_position_accept_rate"]),
        position_trials=ints(kv["position_trials"]),
        position_accepts=ints(kv["position_accepts"]),
        cost_speedup=float(kv["cost_speedup"]),
        config=config_from_items(cfg),
        conditional_accept_rate=floats(kv["conditional_accept_rate"]),
        conditional_trials=ints(kv["conditional_trials"]),
        conditional_accepts=ints(kv["conditional_accepts"]),
        round_reports=tuple(rounds),
        lossless=None if kv["lossless"] == "none" else kv["lossless"] == "on",
        empty=kv["empty"] == "on",
        wall_time=float(kv["wall_time"]),
    )


def comparison_columns(D: int) -> list[str]:
    return ["architecture", "tau", "cost_speedup"] + [f"p{k}" for k in range(1, D + 1)]


def write_comparison_csv(results: Sequence[ArchitectureResult], path) -> None:
    D = max((len(r.rates) for r in results), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(comparison_columns(D))
        for r in results:
            rates = list(r.rates) + [""] * (D - len(r.rates))
            w.writerow([r.architecture, repr(r.tau), repr(r.cost_speedup)] +
                       [x if x == "" else repr(x) for x in rates])


def read_comparison_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
