"""Expected accepted length and acceptance-profile redistribution.

A profile ``p[0..D-1]`` gives the probability that the draft token at each
position is accepted, given that every earlier one was.  The accepted length
``L`` then satisfies ``P(L >= k) = p_1 * ... * p_k`` and

    E[L] = sum_k prod_{i <= k} p_i.

A redistribution raises the first ``d`` entries by ``zeta[:d]`` and lowers
the rest by ``zeta[d:]``, keeping the total fixed.  Moving acceptance mass
towards the front never lowers ``E[L]`` when the profile is non-increasing;
``check_theorem1`` verifies that numerically and also checks the two links
of the chain improved >= concentrated >= original, where the concentrated
profile moves the whole shift onto positions ``d`` and ``d + 1``.

Split indices ``d`` are 1-based throughout, as in ``1 < d < D``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConstraintViolation, Infeasible

TOL = 1e-12


def expected_length(profile: Sequence[float]) -> float:
    total = 0.0
    prod = 1.0
    for p in profile:
        prod *= p
        total += prod
    return total


def length_pmf(profile: Sequence[float]) -> np.ndarray:
    """P(L = l) for l = 0..D, using P(L = l) = (prod_{i<=l} p_i) * (1 - p_{l+1})."""
    D = len(profile)
    out = np.empty(D + 1)
    prod = 1.0
    for l in range(D + 1):
        nxt = profile[l] if l < D else 0.0
        out[l] = prod * (1.0 - nxt)
        prod *= nxt
    return out


def is_monotone(profile: Sequence[float]) -> bool:
    return all(0.0 <= p <= 1.0 for p in profile) and all(
        a >= b for a, b in zip(profile, profile[1:]))


@dataclass(frozen=True)
class Redistribution:
    d: int
    zeta: tuple[float, ...]


def check_redistribution(profile: Sequence[float], r: Redistribution) -> None:
    p, z, d, D = list(profile), r.zeta, r.d, len(profile)
    if len(z) != D:
        raise ConstraintViolation("length", f"zeta has {len(z)} entries, profile has {D}")
    if not 1 < d < D:
        raise ConstraintViolation("split", f"need 1 < d < D, got d={d}, D={D}")
    if any(not 0.0 <= v <= 1.0 for v in z):
        raise ConstraintViolation("nonneg", "every zeta must lie in [0, 1]")
    if abs(sum(z[:d]) - sum(z[d:])) > TOL:
        raise ConstraintViolation("budget", f"front {sum(z[:d])!r} != back {sum(z[d:])!r}")
    for i in range(D):
        if i < d and p[i] + z[i] > 1.0:
            raise ConstraintViolation("upper", f"p[{i + 1}] + zeta exceeds 1")
        if i >= d and p[i] - z[i] < 0.0:
            raise ConstraintViolation("lower", f"p[{i + 1}] - zeta is negative")
        # zeta_i < p_i; an untouched position (zeta_i = 0) is always allowed
        if z[i] > 0.0 and not z[i] < p[i]:
            raise ConstraintViolation("strict", f"zeta[{i + 1}] must be below p[{i + 1}]")


def make_improved(profile: Sequence[float], r: Redistribution) -> tuple[float, ...]:
    check_redistribution(profile, r)
    return tuple(p + z if i < r.d else p - z for i, (p, z) in enumerate(zip(profile, r.zeta)))


def concentrate_feasible(profile: Sequence[float], d: int, zeta_total: float) -> bool:
    p = list(profile)
    return (1 < d < len(p) and zeta_total >= 0.0 and p[d] - zeta_total >= 0.0
            and sum(1.0 - v for v in p[:d]) >= zeta_total)


def make_concentrated(profile: Sequence[float], d: int, zeta_total: float) -> tuple[float, ...]:
    """Move ``zeta_total`` from position ``d + 1`` onto position ``d``.

    If that would push position ``d`` past 1, positions ``d, d-1, ...`` are
    filled to exactly 1 in turn and the remainder lands on the first
    position with room left.
    """
    p = list(map(float, profile))
    D = len(p)
    if not 1 < d < D:
        raise Infeasible(f"need 1 < d < D, got d={d}, D={D}")
    if zeta_total < 0:
        raise Infeasible("zeta must be non-negative")
    if p[d] - zeta_total < 0.0:
        raise Infeasible(f"p[{d + 1}] = {p[d]} cannot give up {zeta_total}")
    left = zeta_total
    i = d - 1
    while left > 0.0:
        if i < 0:
            raise Infeasible(f"positions 1..{d} lack headroom for {zeta_total}")
        room = 1.0 - p[i]
        if left <= room:
            p[i] += left
            left = 0.0
        else:
            p[i] = 1.0
            left -= room
        i -= 1
    p[d] -= zeta_total
    return tuple(p)


def sample_redistribution(profile: Sequence[float], d: int, rng: np.random.Generator,
                          magnitude: float = 1.0, max_tries: int = 10_000) -> Redistribution:
    """Random zeta satisfying every constraint of ``check_redistribution``.

    The budget is ``u * magnitude * min(front headroom, back capacity)`` with
    ``u ~ U[0, 1)``; it is split across positions with random weights and
    redrawn until no position exceeds its allowance.
    """
    p = np.asarray(profile, dtype=float)
    D = len(p)
    if not 1 < d < D:
        raise ConstraintViolation("split", f"need 1 < d < D, got d={d}, D={D}")
    if not is_monotone(p):
        raise ConstraintViolation("monotone", "profile must be non-increasing in [0, 1]")
    front = np.minimum(1.0 - p[:d], p[:d])
    back = p[d:].copy()
    room = min(front.sum(), back.sum())
    if room <= 0.0:
        return Redistribution(d, (0.0,) * D)
    budget = rng.random() * magnitude * room
    for attempt in range(max_tries):
        # late attempts fall back to a proportional split, which stays under every cap
        proportional = attempt >= 32
        zf = _split(budget, front, rng, proportional)
        zb = _split(budget, back, rng, proportional)
        if zf is None or zb is None:
            continue
        if zb.sum() > 0:
            zb *= zf.sum() / zb.sum()
        r = Redistribution(d, tuple(zf.tolist() + zb.tolist()))
        try:
            check_redistribution(p, r)
        except ConstraintViolation:
            continue
        return r
    raise Infeasible(f"no feasible redistribution after {max_tries} attempts")


def _split(budget: float, cap: np.ndarray, rng: np.random.Generator,
           proportional: bool = False) -> np.ndarray | None:
    if budget == 0.0:
        return np.zeros_like(cap)
    w = cap.copy() if proportional else rng.random(len(cap)) * cap
    if w.sum() <= 0.0:
        return None
    z = budget * w / w.sum()
    return z if np.all((z < cap) | (z == 0.0)) else None


@dataclass(frozen=True)
class OrderingReport:
    e_orig: float
    e_imp: float
    e_con: float | None
    improved_ok: bool
    chain_ok: bool | None

    @property
    def ok(self) -> bool:
        return self.improved_ok and self.chain_ok is not False


def check_theorem1(profile: Sequence[float], r: Redistribution) -> OrderingReport:
    if not is_monotone(profile):
        raise ConstraintViolation("monotone", "profile must be non-increasing in [0, 1]")
    improved = make_improved(profile, r)
    e_orig = expected_length(profile)
    e_imp = expected_length(improved)
    zeta = math.fsum(r.zeta[:r.d])
    e_con = chain_ok = None
    if concentrate_feasible(profile, r.d, zeta):
        e_con = expected_length(make_concentrated(profile, r.d, zeta))
        chain_ok = e_imp >= e_con - TOL and e_con >= e_orig - TOL
    return OrderingReport(e_orig, e_imp, e_con, e_imp >= e_orig - TOL, chain_ok)


def random_monotone_profile(D: int, rng: np.random.Generator) -> tuple[float, ...]:
    """Sorted uniforms, with occasional exact 0s and 1s to hit the boundaries."""
    p = rng.random(D)
    if rng.random() < 0.1:
        p[: rng.integers(1, D + 1)] = 1.0
    if rng.random() < 0.1:
        p[rng.integers(0, D):] = 0.0
    return tuple(sorted(p.tolist(), reverse=True))


@dataclass(frozen=True)
class SweepRow:
    D: int
    d: int
    e_orig: float
    e_con: float | None
    e_imp: float
    ok: bool


def theorem1_sweep(n: int, rng: np.random.Generator, d_range: tuple[int, int] = (2, 12),
                   magnitude: float = 1.0) -> list[SweepRow]:
    """Check ``n`` random feasible instances with ``D`` drawn from ``d_range`` (inclusive)."""
    rows = []
    lo, hi = d_range
    lo = max(lo, 3)  # 1 < d < D needs D >= 3; D = 2 admits no split
    if hi < lo:
        raise ConstraintViolation("split", f"no D in {d_range} admits a split 1 < d < D")
    for _ in range(n):
        D = int(rng.integers(lo, hi + 1))
        d = int(rng.integers(2, D))
        profile = random_monotone_profile(D, rng)
        r = sample_redistribution(profile, d, rng, magnitude)
        rep = check_theorem1(profile, r)
        rows.append(SweepRow(D, d, rep.e_orig, rep.e_con, rep.e_imp, rep.ok))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["D", "d", "E_orig", "E_con", "E_imp", "ok"])
        for r in rows:
            w.writerow([r.D, r.d, repr(r.e_orig), "" if r.e_con is None else repr(r.e_con),
                        repr(r.e_imp), int(r.ok)])
