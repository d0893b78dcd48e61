"""Benchmark problems, status maps, and exact chain builders.

Four pseudo-Boolean benchmarks are modeled: OneMax, Peak, a deceptive trap,
and a three-tier knapsack with repair.  For each, search points sharing an
approximation error form one status, statuses are indexed by increasing
error, and the two elitist heuristics (one-bit local search and the
standard bitwise-mutation (1+1) EA) induce upper triangular column
stochastic transition matrices over the statuses.

Chain builders return exact rational models by default.  Local search
transitions have closed forms; bitwise mutation is enumerated exactly over
block counts (fitness only depends on how many bits per block are set, so
the transition law is identical for every point of a status and multinomial
sums over block counts give the exact probabilities at any n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .chain import NumericMode, StatusModel, UpperTriMatrix


class ProblemKind(Enum):
    ONEMAX = "onemax"
    PEAK = "peak"
    DECEPTIVE = "deceptive"
    KNAPSACK = "knapsack"


class AlgorithmKind(Enum):
    RLS = "rls"
    ONE_PLUS_ONE_EA = "ea"


@dataclass(frozen=True)
class ProblemInstance:
    """One benchmark at one size (plus the knapsack tier fraction alpha).

    The knapsack instance has item 1 with profit and weight n, items
    2..alpha*n with profit 1 and weight 1/(alpha*n), items alpha*n+1..n with
    profit 1/n and weight n, and capacity n.  alpha*n must be an integer
    with 2 <= alpha*n <= n-1.
    """

    kind: ProblemKind
    n: int
    alpha: Optional[Fraction] = None

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if self.kind is ProblemKind.KNAPSACK:
            if self.alpha is None:
                raise ValueError("knapsack requires alpha")
            alpha = Fraction(self.alpha)
            object.__setattr__(self, "alpha", alpha)
            an = alpha * self.n
            if an.denominator != 1:
                raise ValueError(f"alpha*n must be an integer, got {an}")
            an = int(an)
            if not 2 <= an <= self.n - 1:
                raise ValueError(f"alpha*n={an} outside [2, n-1] for n={self.n}")
        elif self.alpha is not None:
            raise ValueError(f"{self.kind.value} takes no alpha")

    @property
    def alpha_n(self) -> int:
        if self.alpha is None:
            raise ValueError(f"{self.kind.value} has no alpha")
        return int(self.alpha * self.n)

    @property
    def num_statuses(self) -> int:
        if self.kind is ProblemKind.KNAPSACK:
            return self.alpha_n + 2
        return self.n + 1


def problem_from_config(cfg: dict) -> ProblemInstance:
    """Build an instance from ``{"problem": ..., "n": ..., "alpha": "p/q"}``."""
    kind = ProblemKind(cfg["problem"])
    alpha = None
    if "alpha" in cfg and cfg["alpha"] is not None:
        alpha = Fraction(cfg["alpha"])
    return ProblemInstance(kind, int(cfg["n"]), alpha)


def problem_to_config(p: ProblemInstance) -> dict:
    cfg = {"problem": p.kind.value, "n": p.n}
    if p.alpha is not None:
        cfg["alpha"] = str(p.alpha)
    return cfg


# -- bitstrings -----------------------------------------------------------


def as_bits(x, n: int) -> np.ndarray:
    """Validate and return x as a length-n boolean array."""
    arr = np.asarray(x)
    if arr.shape != (n,):
        raise ValueError(f"bitstring has shape {arr.shape}, expected ({n},)")
    if arr.dtype != np.bool_:
        vals = np.unique(arr)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("bitstring entries must be 0/1")
        arr = arr.astype(np.bool_)
    return arr


def _knap_blocks(p: ProblemInstance, bits: np.ndarray):
    """Counts of chosen items per tier: (x1, |x2|, |x3|)."""
    an = p.alpha_n
    return int(bits[0]), int(np.count_nonzero(bits[1:an])), int(np.count_nonzero(bits[an:]))


def knapsack_feasible(p: ProblemInstance, x) -> bool:
    """Total weight within capacity.

    Weights are n, 1/(alpha*n), n for the three tiers with capacity n, so a
    selection is feasible exactly when at most one tier is occupied and at
    most one tier-3 item is chosen.
    """
    if p.kind is not ProblemKind.KNAPSACK:
        raise ValueError("feasibility is a knapsack notion")
    b1, b2, b3 = _knap_blocks(p, as_bits(x, p.n))
    weight = Fraction(p.n) * b1 + Fraction(b2, p.alpha_n) + Fraction(p.n) * b3
    return weight <= p.n


def fitness(p: ProblemInstance, x):
    """Objective value of a search point (exact; rational for knapsack).

    Knapsack rejects infeasible selections: fitness there is only defined
    after repair.
    """
    bits = as_bits(x, p.n)
    ones = int(np.count_nonzero(bits))
    if p.kind is ProblemKind.ONEMAX:
        return ones
    if p.kind is ProblemKind.PEAK:
        return 1 if ones == p.n else 0
    if p.kind is ProblemKind.DECEPTIVE:
        return ones if ones > p.n - 1 else p.n - 1 - ones
    if not knapsack_feasible(p, bits):
        raise ValueError("fitness undefined for an infeasible knapsack selection")
    b1, b2, b3 = _knap_blocks(p, bits)
    return Fraction(p.n) * b1 + b2 + Fraction(b3, p.n)


def status_of(p: ProblemInstance, x) -> int:
    """Status index (0 = optimal, larger = worse) of a search point."""
    bits = as_bits(x, p.n)
    ones = int(np.count_nonzero(bits))
    if p.kind in (ProblemKind.ONEMAX, ProblemKind.PEAK):
        return p.n - ones
    if p.kind is ProblemKind.DECEPTIVE:
        return 0 if ones == p.n else ones + 1
    if not knapsack_feasible(p, bits):
        raise ValueError("status undefined for an infeasible knapsack selection")
    b1, b2, b3 = _knap_blocks(p, bits)
    an = p.alpha_n
    if b1:
        return 0
    if b2:
        return an - b2
    if b3:
        return an
    return an + 1


def status_errors(p: ProblemInstance) -> tuple:
    """Approximation error of each status, as exact rationals."""
    if p.kind is ProblemKind.ONEMAX:
        return tuple(Fraction(i) for i in range(p.n + 1))
    if p.kind is ProblemKind.PEAK:
        return (Fraction(0),) + (Fraction(1),) * p.n
    if p.kind is ProblemKind.DECEPTIVE:
        return tuple(Fraction(i) for i in range(p.n + 1))
    an = p.alpha_n
    errs = [Fraction(0)]
    errs += [Fraction(p.n - an + k) for k in range(1, an)]
    errs.append(Fraction(p.n) - Fraction(1, p.n))
    errs.append(Fraction(p.n))
    return tuple(errs)


def status_representative(p: ProblemInstance, status: int) -> np.ndarray:
    """A canonical search point of the given status (statuses are uniform:
    every member shares the same transition law, so one member suffices for
    empirical column checks)."""
    if not 0 <= status < p.num_statuses:
        raise ValueError(f"status {status} out of range")
    bits = np.zeros(p.n, dtype=np.bool_)
    if p.kind in (ProblemKind.ONEMAX, ProblemKind.PEAK):
        bits[status:] = True
        return bits
    if p.kind is ProblemKind.DECEPTIVE:
        if status == 0:
            bits[:] = True
        else:
            bits[: status - 1] = True
        return bits
    an = p.alpha_n
    if status == 0:
        bits[0] = True
    elif status < an:
        bits[1 : 1 + (an - status)] = True
    elif status == an:
        bits[an] = True
    return bits


def knapsack_repair(p: ProblemInstance, x, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Drop items in increasing profit/weight order until feasible.

    Tier-3 items have the smallest ratio and go first, then item 1; tier-2
    items never need removal.  Ties only arise among tier-3 items; when the
    rest of the selection is empty and several tier-3 items remain, one
    survivor is kept uniformly at random (successive uniform removals leave
    a uniform survivor).  A feasible input is returned unchanged.
    """
    if p.kind is not ProblemKind.KNAPSACK:
        raise ValueError("repair is a knapsack notion")
    bits = as_bits(x, p.n).copy()
    b1, b2, b3 = _knap_blocks(p, bits)
    an = p.alpha_n
    if b1 + b3 <= 1 and (b2 == 0 or (b1 == 0 and b3 == 0)):
        return bits  # feasible: at most one occupied tier, at most one tier-3 item
    if b1 or b2:
        # Some higher-ratio item is chosen, so every tier-3 item must go,
        # and item 1 follows whenever tier-2 items remain.
        bits[an:] = False
        if b1 and b2:
            bits[0] = False
        return bits
    # Only tier-3 items: keep exactly one, chosen uniformly.
    idx = np.flatnonzero(bits[an:])
    if rng is None:
        raise ValueError("repair of an all-tier-3 selection needs a random generator")
    keep = idx[int(rng.integers(0, len(idx)))]
    bits[an:] = False
    bits[an + keep] = True
    return bits


# -- initial distributions -------------------------------------------------


def initial_distribution(p: ProblemInstance) -> tuple:
    """Status distribution of a uniform random point (knapsack: after repair)."""
    n = p.n
    half_n = Fraction(1, 2**n)
    if p.kind in (ProblemKind.ONEMAX, ProblemKind.PEAK):
        return tuple(math.comb(n, i) * half_n for i in range(n + 1))
    if p.kind is ProblemKind.DECEPTIVE:
        return (half_n,) + tuple(math.comb(n, i - 1) * half_n for i in range(1, n + 1))
    an = p.alpha_n
    out = [Fraction(1, 2**an)]
    for k in range(1, an):
        out.append(Fraction(math.comb(an - 1, an - k), 2 ** (an - 1)))
    out.append(Fraction(1, 2**an) - half_n)
    out.append(half_n)
    return tuple(out)


# -- transition builders ---------------------------------------------------


def _flip_count_dist(m: int, b: int, pflip: Fraction) -> list:
    """Distribution of the number of set bits after independent flips.

    A block of m bits with b set, each flipped with probability pflip,
    lands on c set bits with probability
    sum_k C(b, k) C(m-b, c-b+k) pflip^(2k+c-b) (1-pflip)^(m-2k-c+b).
    """
    q = 1 - pflip
    pw = [pflip**s * q ** (m - s) for s in range(m + 1)]
    dist = [Fraction(0)] * (m + 1)
    for k1 in range(b + 1):
        cb = math.comb(b, k1)
        for k0 in range(m - b + 1):
            c = b - k1 + k0
            dist[c] += cb * math.comb(m - b, k0) * pw[k1 + k0]
    return dist


def _empty_rows(dim: int) -> list:
    return [[Fraction(0)] * dim for _ in range(dim)]


def _finish(rows, errors, initial, numeric_mode: NumericMode) -> StatusModel:
    model = StatusModel(
        tuple(errors),
        tuple(initial),
        UpperTriMatrix(rows, NumericMode.RATIONAL),
    )
    if numeric_mode is NumericMode.FLOAT64:
        return model.to_float()
    return model


def _fill_diagonal_complements(rows, columns=None) -> None:
    dim = len(rows)
    for j in columns if columns is not None else range(dim):
        off = sum((rows[i][j] for i in range(dim) if i != j), Fraction(0))
        rows[j][j] = 1 - off


def build_exact_chain(
    p: ProblemInstance,
    a: AlgorithmKind,
    numeric_mode: NumericMode = NumericMode.RATIONAL,
) -> StatusModel:
    """Exact status chain of one heuristic on one problem.

    Local-search columns come from the one-bit closed forms; bitwise
    mutation columns are exact multinomial sums over block counts.
    """
    n = p.n
    inv = Fraction(1, n)
    if p.kind is ProblemKind.ONEMAX:
        dim = n + 1
        rows = _empty_rows(dim)
        rows[0][0] = Fraction(1)
        if a is AlgorithmKind.RLS:
            for j in range(1, dim):
                rows[j - 1][j] = j * inv
                rows[j][j] = 1 - j * inv
        else:
            for j in range(1, dim):
                dist = _flip_count_dist(n, n - j, inv)  # over the count of ones
                for i in range(j):
                    rows[i][j] = dist[n - i]
                _fill_diagonal_complements(rows, [j])
    elif p.kind is ProblemKind.PEAK:
        dim = n + 1
        rows = _empty_rows(dim)
        rows[0][0] = Fraction(1)
        for j in range(1, dim):
            if a is AlgorithmKind.RLS:
                rows[0][j] = inv if j == 1 else Fraction(0)
            else:
                rows[0][j] = inv**j * (1 - inv) ** (n - j)
            rows[j][j] = 1 - rows[0][j]
    elif p.kind is ProblemKind.DECEPTIVE:
        dim = n + 1
        rows = _empty_rows(dim)
        rows[0][0] = Fraction(1)
        if a is AlgorithmKind.RLS:
            for j in range(1, dim):
                ones = j - 1  # status j holds the points with j-1 ones
                if j == n:
                    rows[0][j] += Fraction(n - ones, n)  # flip the last zero
                if ones:
                    rows[j - 1][j] += Fraction(ones, n)  # flip a one: fewer ones is better
                _fill_diagonal_complements(rows, [j])
        else:
            for j in range(1, dim):
                dist = _flip_count_dist(n, j - 1, inv)
                rows[0][j] = dist[n]
                for i in range(1, j):
                    rows[i][j] = dist[i - 1]
                _fill_diagonal_complements(rows, [j])
    else:
        model = _knapsack_exact(p, a)
        if numeric_mode is NumericMode.FLOAT64:
            return model.to_float()
        return model
    return _finish(rows, status_errors(p), initial_distribution(p), numeric_mode)


def _knapsack_exact(p: ProblemInstance, a: AlgorithmKind) -> StatusModel:
    n, an = p.n, p.alpha_n
    inv = Fraction(1, n)
    alpha = p.alpha
    dim = an + 2
    rows = _empty_rows(dim)
    rows[0][0] = Fraction(1)
    if a is AlgorithmKind.RLS:
        if an >= 2:
            rows[1][1] = Fraction(1)
        for k in range(2, an):
            rows[k - 1][k] = (k - 1) * inv
            rows[k][k] = 1 - (k - 1) * inv
        for j in (an, an + 1):
            rows[0][j] = inv
            rows[an - 1][j] = (an - 1) * inv
            rows[an][j] = 1 - alpha
        rows[an][an] = 1 - alpha
        rows[an][an + 1] = 1 - alpha
        rows[an + 1][an + 1] = Fraction(0)
        _fill_diagonal_complements(rows, [an])
    else:
        m2, m3 = an - 1, n - an
        d1 = {0: [1 - inv, inv], 1: [inv, 1 - inv]}

        def blocks_of(status: int):
            if status < an:
                return (0, an - status, 0)
            if status == an:
                return (0, 0, 1)
            return (0, 0, 0)

        def scaled_fitness(b1: int, b2: int, b3_single: int) -> int:
            # n * fitness of a repaired configuration, always an integer.
            if b1:
                return n * n
            if b2:
                return n * b2
            return b3_single  # 1 for a lone tier-3 item, 0 for empty

        for j in range(1, dim):
            b1, b2, b3 = blocks_of(j)
            f_x = scaled_fitness(b1, b2, 1 if b3 else 0)
            dist2 = _flip_count_dist(m2, b2, inv)
            dist3 = _flip_count_dist(m3, b3, inv)
            for c1 in (0, 1):
                p1 = d1[b1][c1]
                for c2 in range(m2 + 1):
                    p2 = dist2[c2]
                    if p2 == 0:
                        continue
                    for c3 in range(m3 + 1):
                        prob = p1 * p2 * dist3[c3]
                        if prob == 0:
                            continue
                        # Repair: tier-3 items go first, then item 1.
                        if c1 and c2 == 0:
                            r1, r2, r3 = 1, 0, 0
                        elif c2 >= 1:
                            r1, r2, r3 = 0, c2, 0
                        else:
                            r1, r2, r3 = 0, 0, min(c3, 1)
                        f_y = scaled_fitness(r1, r2, r3)
                        if f_y <= f_x:
                            continue
                        if r1:
                            target = 0
                        elif r2:
                            target = an - r2
                        else:
                            target = an
                        rows[target][j] += prob
            _fill_diagonal_complements(rows, [j])
    return _finish(rows, status_errors(p), initial_distribution(p), NumericMode.RATIONAL)


def build_merged_knapsack_chain(
    p: ProblemInstance, numeric_mode: NumericMode = NumericMode.RATIONAL
) -> StatusModel:
    """Exact bitwise-mutation knapsack chain with the two worst statuses merged.

    The lone-tier-3 status and the empty status transition identically to
    every better status and stay inside the pair with the same probability
    (1-1/n)^(alpha*n), so merging them is again a Markov chain.  The merged
    status carries the larger error n of its two members, which makes the
    merged curve an upper bound on the unmerged one.
    """
    if p.kind is not ProblemKind.KNAPSACK:
        raise ValueError("merged chain is a knapsack notion")
    full = _knapsack_exact(p, AlgorithmKind.ONE_PLUS_ONE_EA)
    an = p.alpha_n
    T = full.transition
    for i in range(an):
        if T.entry(i, an) != T.entry(i, an + 1):
            raise AssertionError(
                f"merge precondition broken: rows {i} of the last two columns differ"
            )
    stay = (1 - Fraction(1, p.n)) ** an
    col_sum = sum((T.entry(i, an) for i in range(an)), Fraction(0))
    if col_sum + stay != 1:
        raise AssertionError("merge precondition broken: merged column is not stochastic")
    rows = _empty_rows(an + 1)
    for i in range(an + 1):
        for j in range(i, an):
            rows[i][j] = T.entry(i, j)
    for i in range(an):
        rows[i][an] = T.entry(i, an)
    rows[an][an] = stay
    errors = list(full.errors[: an + 1])
    errors[an] = Fraction(p.n)
    initial = list(full.initial[: an + 1])
    initial[an] = full.initial[an] + full.initial[an + 1]
    return _finish(rows, errors, initial, numeric_mode)


def build_auxiliary_chain(
    p: ProblemInstance,
    a: AlgorithmKind,
    numeric_mode: NumericMode = NumericMode.RATIONAL,
) -> StatusModel:
    """Dominating bidiagonal-style surrogate for a bitwise-mutation chain.

    Only the (1+1) EA has surrogates, for OneMax, Deceptive and Knapsack.
    The surrogate keeps single-status improvements only (at the one-flip
    rate), routes direct jumps to the optimum at the all-flips rate where
    the original chain has them, and keeps the exact final column where the
    bound argument splits the worst status off.  For knapsack the surrogate
    lives on the merged statuses.
    """
    if a is not AlgorithmKind.ONE_PLUS_ONE_EA:
        raise ValueError("auxiliary chains exist for the bitwise-mutation EA only")
    n = p.n
    inv = Fraction(1, n)
    if p.kind is ProblemKind.ONEMAX:
        dim = n + 1
        rows = _empty_rows(dim)
        rows[0][0] = Fraction(1)
        one_flip = (1 - inv) ** (n - 1)
        for j in range(1, dim):
            rows[j - 1][j] = j * inv * one_flip
            rows[j][j] = 1 - rows[j - 1][j]
        return _finish(rows, status_errors(p), initial_distribution(p), numeric_mode)
    if p.kind is ProblemKind.DECEPTIVE:
        dim = n + 1
        rows = _empty_rows(dim)
        rows[0][0] = Fraction(1)
        one_flip = (1 - inv) ** (n - 1)
        for j in range(1, n):
            rows[0][j] = inv**n
            if j >= 2:
                rows[j - 1][j] += (j - 1) * inv * one_flip
            _fill_diagonal_complements(rows, [j])
        exact = build_exact_chain(p, a)
        for i in range(n + 1):
            rows[i][n] = exact.transition.entry(i, n)
        return _finish(rows, status_errors(p), initial_distribution(p), numeric_mode)
    if p.kind is ProblemKind.KNAPSACK:
        an = p.alpha_n
        dim = an + 1
        rows = _empty_rows(dim)
        rows[0][0] = Fraction(1)
        one_flip = (1 - inv) ** (an - 2)
        for j in range(1, an):
            rows[0][j] = inv**an
            if j >= 2:
                rows[j - 1][j] += (j - 1) * inv * one_flip
            _fill_diagonal_complements(rows, [j])
        merged = build_merged_knapsack_chain(p)
        for i in range(dim):
            rows[i][an] = merged.transition.entry(i, an)
        return _finish(rows, merged.errors, merged.initial, numeric_mode)
    raise ValueError(f"no auxiliary chain for {p.kind.value}")
