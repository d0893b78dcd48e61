"""Closed-form spectral machinery for diagonal and bidiagonal chains.

For an upper bidiagonal transition matrix with pairwise distinct diagonal
entries, eigenvalues are the diagonal and both eigenvector families have
closed forms built from running products of superdiagonal entries over
diagonal gaps.  That turns t-step error curves into O(L) sums per t and
makes matrix powers cheap at any horizon.

Everything here follows the column-stochastic convention of
:mod:`rsh_error_lab.chain`: matrices act on distributions from the left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .chain import (
    MAX_POWER_STEPS,
    MixedModeError,
    Number,
    NumericMode,
    SearchClass,
    UpperTriMatrix,
    classify_search,
    coerce_vector,
    dot,
)

#: Relative gap under which two float diagonal entries count as duplicates.
DUPLICATE_REL_TOL = 1e-9


class DuplicateDiagonalError(ValueError):
    """Two diagonal entries coincide, so the closed forms would divide by ~0."""

    def __init__(self, i: int, j: int, value):
        self.indices = (i, j)
        super().__init__(
            f"diagonal entries {i} and {j} coincide (value {value}); "
            "the bidiagonal eigenvector closed forms are undefined"
        )


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues with biorthogonal right/left eigenvector families.

    ``right_vectors[j]`` is the right eigenvector p_j (column), zero below
    index j and 1 at index j; ``left_vectors[j]`` the left eigenvector q_j
    (row), zero before index j and 1 at index j.  q_i . p_j = delta_ij.
    """

    eigenvalues: tuple
    right_vectors: tuple
    left_vectors: tuple
    numeric_mode: NumericMode

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


def bidiagonal_decompose(R: UpperTriMatrix) -> SpectralDecomposition:
    """Closed-form eigendecomposition of a diagonal or bidiagonal matrix.

    Diagonal input needs no distinctness (unit eigenvectors).  Bidiagonal
    input requires pairwise distinct diagonal entries; float-mode entries
    closer than ``DUPLICATE_REL_TOL`` relative to the largest magnitude
    raise :class:`DuplicateDiagonalError`.  Eigenvector entries are built
    by running products, never whole-row quotients of factorials.
    """
    cls = classify_search(R)
    if cls is SearchClass.ELITIST:
        raise ValueError(
            "bidiagonal_decompose: matrix has mass above the superdiagonal; "
            "no closed-form decomposition applies"
        )
    lam = R.diagonal()
    dim = R.dim
    if cls is SearchClass.BIDIAGONAL:
        if R.numeric_mode is NumericMode.RATIONAL:
            seen = {}
            for k, v in enumerate(lam):
                if v in seen:
                    raise DuplicateDiagonalError(seen[v], k, v)
                seen[v] = k
        else:
            scale = max(abs(v) for v in lam) or 1.0
            order = sorted(range(dim), key=lam.__getitem__)
            for a, b in zip(order, order[1:]):
                if abs(lam[a] - lam[b]) <= DUPLICATE_REL_TOL * scale:
                    i, j = min(a, b), max(a, b)
                    raise DuplicateDiagonalError(i, j, lam[i])

    one = Fraction(1) if R.numeric_mode is NumericMode.RATIONAL else 1.0
    zero = Fraction(0) if R.numeric_mode is NumericMode.RATIONAL else 0.0

    rights = []
    lefts = []
    for j in range(dim):
        p = [zero] * dim
        p[j] = one
        for i in range(j - 1, -1, -1):
            sup = R.entry(i, i + 1)
            if sup == 0:
                break
            p[i] = p[i + 1] * sup / (lam[j] - lam[i])
        q = [zero] * dim
        q[j] = one
        for i in range(j + 1, dim):
            sup = R.entry(i - 1, i)
            if sup == 0:
                break
            q[i] = q[i - 1] * sup / (lam[j] - lam[i])
        rights.append(tuple(p))
        lefts.append(tuple(q))
    return SpectralDecomposition(
        eigenvalues=tuple(lam),
        right_vectors=tuple(rights),
        left_vectors=tuple(lefts),
        numeric_mode=R.numeric_mode,
    )


def biorthogonality_residual(d: SpectralDecomposition) -> Number:
    """Largest |q_i . p_j - delta_ij| over all index pairs."""
    worst = Fraction(0) if d.numeric_mode is NumericMode.RATIONAL else 0.0
    for i in range(d.dim):
        for j in range(d.dim):
            v = dot(d.left_vectors[i], d.right_vectors[j], d.numeric_mode)
            r = abs(v - (1 if i == j else 0))
            if r > worst:
                worst = r
    return worst


def _scalar_pow(base: Number, t: int, mode: NumericMode) -> Number:
    if mode is NumericMode.RATIONAL:
        return Fraction(base) ** t
    return float(base) ** t


def spectral_power(d: SpectralDecomposition, t: int) -> UpperTriMatrix:
    """Reassemble the t-step matrix sum(lambda_j^t p_j q_j')."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t > MAX_POWER_STEPS:
        raise ValueError(f"t={t} exceeds the supported cap {MAX_POWER_STEPS}")
    mode = d.numeric_mode
    dim = d.dim
    zero = Fraction(0) if mode is NumericMode.RATIONAL else 0.0
    lam_t = [_scalar_pow(v, t, mode) for v in d.eigenvalues]
    rows = [[zero] * dim for _ in range(dim)]
    for i in range(dim):
        for k in range(i, dim):
            terms = [
                lam_t[j] * d.right_vectors[j][i] * d.left_vectors[j][k]
                for j in range(i, k + 1)
            ]
            if mode is NumericMode.RATIONAL:
                rows[i][k] = sum(terms, Fraction(0))
            else:
                rows[i][k] = math.fsum(terms)
    return UpperTriMatrix(rows, mode)


def _check_monotone_errors(e: Sequence[Number]) -> None:
    for i in range(1, len(e)):
        if e[i] < e[i - 1]:
            raise ValueError(
                f"error vector must be monotone nondecreasing; "
                f"e[{i}]={e[i]} < e[{i - 1}]={e[i - 1]}"
            )


def _check_substochastic(p: Sequence[Number], mode: NumericMode) -> None:
    tol = 0 if mode is NumericMode.RATIONAL else 1e-12
    s = Fraction(0) if mode is NumericMode.RATIONAL else 0.0
    for i, v in enumerate(p):
        if v < -tol:
            raise ValueError(f"distribution entry p[{i}]={v} is negative")
        s += v
    if s > 1 + tol:
        raise ValueError(f"distribution mass {s} exceeds 1")


class SpectralErrorEvaluator:
    """Precomputed scalar pairs for O(L)-per-horizon error evaluation.

    Evaluating e' R^t p0 for many t only needs the eigenvalues and the two
    scalar families a_j = e . p_j and b_j = q_j . p0, both computed once.
    """

    def __init__(self, e: Sequence[Number], R: UpperTriMatrix, p0: Sequence[Number]):
        mode = R.numeric_mode
        e = coerce_vector(e, mode, "e")
        p0 = coerce_vector(p0, mode, "p0")
        if len(e) != R.dim or len(p0) != R.dim:
            raise ValueError(
                f"vector lengths ({len(e)}, {len(p0)}) must equal matrix dim {R.dim}"
            )
        _check_monotone_errors(e)
        _check_substochastic(p0, mode)
        d = bidiagonal_decompose(R)
        self.numeric_mode = mode
        self.decomposition = d
        self.e_pairs = tuple(dot(e, p, mode) for p in d.right_vectors)
        self.p0_pairs = tuple(dot(q, p0, mode) for q in d.left_vectors)

    def __call__(self, t: int) -> Number:
        if t < 0:
            raise ValueError("t must be nonnegative")
        if t > MAX_POWER_STEPS:
            raise ValueError(f"t={t} exceeds the supported cap {MAX_POWER_STEPS}")
        mode = self.numeric_mode
        terms = [
            _scalar_pow(lam, t, mode) * a * b
            for lam, a, b in zip(
                self.decomposition.eigenvalues, self.e_pairs, self.p0_pairs
            )
            if a != 0 and b != 0
        ]
        if mode is NumericMode.RATIONAL:
            return sum(terms, Fraction(0))
        return math.fsum(terms)


def expected_error_spectral(
    e: Sequence[Number], R: UpperTriMatrix, p0: Sequence[Number], t: int
) -> Number:
    """One-shot e' R^t p0 via the spectral closed form."""
    return SpectralErrorEvaluator(e, R, p0)(t)


# -- dominance ------------------------------------------------------------


@dataclass(frozen=True)
class DominanceCertificate:
    """Outcome of the three prefix-sum dominance conditions.

    ``ok`` asserts that the second matrix's error curve can only sit above
    the first one's for monotone error vectors.  The first failed condition
    is reported with its indices and the offending partial sum.
    """

    ok: bool
    dim: int
    first_violation: Optional[str] = None


def dominance_check(R: UpperTriMatrix, S: UpperTriMatrix) -> DominanceCertificate:
    """Certify that S is a slower (dominating) chain than R.

    Checks, with prefix sums realizing the all-ones triangular transform:
      (C1) S[j][j] >= R[j][j] for every column j;
      (C2) partial sums over l < i of (R[l][j] - S[l][j]) stay nonnegative
           for every i < j;
      (C3) partial sums over l <= i of (S[l][j-1] - S[l][j]) stay
           nonnegative for every i < j-1.
    """
    if R.numeric_mode is not S.numeric_mode:
        raise MixedModeError("dominance_check: matrices use different numeric modes")
    if R.dim != S.dim:
        raise ValueError(f"dominance_check: dim mismatch {R.dim} vs {S.dim}")
    dim = R.dim
    tol = 0 if R.numeric_mode is NumericMode.RATIONAL else 1e-12

    for j in range(dim):
        if S.entry(j, j) < R.entry(j, j) - tol:
            return DominanceCertificate(
                False,
                dim,
                f"(C1) at j={j}: S[{j}][{j}]={S.entry(j, j)} < R[{j}][{j}]={R.entry(j, j)}",
            )
    for j in range(dim):
        acc = Fraction(0) if R.numeric_mode is NumericMode.RATIONAL else 0.0
        for i in range(1, j):
            acc += R.entry(i - 1, j) - S.entry(i - 1, j)
            if acc < -tol:
                return DominanceCertificate(
                    False, dim, f"(C2) at i={i}, j={j}: partial sum {acc}"
                )
    for j in range(1, dim):
        acc = Fraction(0) if R.numeric_mode is NumericMode.RATIONAL else 0.0
        for i in range(0, j - 1):
            acc += S.entry(i, j - 1) - S.entry(i, j)
            if acc < -tol:
                return DominanceCertificate(
                    False, dim, f"(C3) at i={i}, j={j}: partial sum {acc}"
                )
    return DominanceCertificate(True, dim, None)


def bound_via_auxiliary(
    e: Sequence[Number],
    S: UpperTriMatrix,
    p0: Sequence[Number],
    t: int,
    certificate: Optional[DominanceCertificate] = None,
) -> Number:
    """Upper bound e' S^t p0 evaluated spectrally on an auxiliary chain.

    Refuses to run without a *passed* dominance certificate for the parent
    pair: the number computed here only bounds the true curve when the
    auxiliary chain dominates and the error vector is monotone.  ``S`` is
    the non-optimal submatrix, one row/column smaller than the certified
    full matrices.
    """
    if certificate is None:
        raise ValueError(
            "bound_via_auxiliary: no dominance certificate attached; "
            "run dominance_check on the full matrix pair first"
        )
    if not isinstance(certificate, DominanceCertificate):
        raise TypeError("bound_via_auxiliary: certificate must come from dominance_check")
    if not certificate.ok:
        raise ValueError(
            f"bound_via_auxiliary: dominance certificate records a violation: "
            f"{certificate.first_violation}"
        )
    if S.dim != certificate.dim - 1:
        raise ValueError(
            f"bound_via_auxiliary: submatrix dim {S.dim} does not match "
            f"certified pair dim {certificate.dim} (expected one less)"
        )
    return expected_error_spectral(e, S, p0, t)


# -- last-status block partition -------------------------------------------


def _as_scalar(v: Number, mode: NumericMode, name: str) -> Number:
    return coerce_vector([v], mode, name)[0]


def block_error(
    e_hat: Sequence[Number],
    R_hat: UpperTriMatrix,
    p0_hat: Sequence[Number],
    r1_hat: Sequence[Number],
    r_LL: Number,
    p_L0: Number,
    e_L: Number,
    t: int,
    method: str = "auto",
) -> Number:
    """Expected error of a chain split into a leading block plus last status.

    For the partition R = [[R_hat, r1_hat], [0, r_LL]] with initial mass
    p_L0 on the last status (error e_L), the t-step expected error is

        e_hat' R_hat^t p0_hat
        + p_L0 * sum_{k=0}^{t-1} r_LL^k * (e_hat' R_hat^{t-1-k} r1_hat)
        + p_L0 * e_L * r_LL^t.

    ``method`` selects the evaluation route: "power" iterates vector-matrix
    products; "spectral" uses the closed forms on the reduced leading block
    (requires e_hat[0] = 0 and a diagonal/bidiagonal reduced block);
    "auto" tries spectral and falls back to power.  In the spectral route
    the inner geometric sums are accumulated term-by-term in rational mode
    and use the closed form with a resonance guard in float mode.
    """
    mode = R_hat.numeric_mode
    m = R_hat.dim
    e_hat = coerce_vector(e_hat, mode, "e_hat")
    p0_hat = coerce_vector(p0_hat, mode, "p0_hat")
    r1_hat = coerce_vector(r1_hat, mode, "r1_hat")
    if not (len(e_hat) == len(p0_hat) == len(r1_hat) == m):
        raise ValueError("block_error: vector lengths must equal the block dimension")
    r_LL = _as_scalar(r_LL, mode, "r_LL")
    p_L0 = _as_scalar(p_L0, mode, "p_L0")
    e_L = _as_scalar(e_L, mode, "e_L")
    if not 0 <= r_LL <= 1:
        raise ValueError(f"block_error: r_LL={r_LL} outside [0, 1]")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t > MAX_POWER_STEPS:
        raise ValueError(f"t={t} exceeds the supported cap {MAX_POWER_STEPS}")
    if method not in ("auto", "power", "spectral"):
        raise ValueError(f"block_error: unknown method {method!r}")

    if method in ("auto", "spectral"):
        try:
            return _block_error_spectral(
                e_hat, R_hat, p0_hat, r1_hat, r_LL, p_L0, e_L, t
            )
        except (ValueError, DuplicateDiagonalError):
            if method == "spectral":
                raise
    return _block_error_power(e_hat, R_hat, p0_hat, r1_hat, r_LL, p_L0, e_L, t)


def _block_error_power(e_hat, R_hat, p0_hat, r1_hat, r_LL, p_L0, e_L, t) -> Number:
    mode = R_hat.numeric_mode
    m = R_hat.dim
    # Row-vector iteration w_s' = e_hat' R_hat^s, collecting the scalars
    # w_s . r1_hat for s <= t-1 and w_t . p0_hat at the end.
    w = list(e_hat)
    inner = []
    for s in range(t):
        inner.append(dot(w, r1_hat, mode))
        w = [
            dot([w[i] for i in range(j + 1)], [R_hat.entry(i, j) for i in range(j + 1)], mode)
            for j in range(m)
        ]
    head = dot(w, p0_hat, mode)
    geom_terms = []
    rk = Fraction(1) if mode is NumericMode.RATIONAL else 1.0
    for k in range(t):
        geom_terms.append(rk * inner[t - 1 - k])
        rk = rk * r_LL
    if mode is NumericMode.RATIONAL:
        tail = sum(geom_terms, Fraction(0))
    else:
        tail = math.fsum(geom_terms)
    return head + p_L0 * tail + p_L0 * e_L * _scalar_pow(r_LL, t, mode)


def _block_error_spectral(e_hat, R_hat, p0_hat, r1_hat, r_LL, p_L0, e_L, t) -> Number:
    mode = R_hat.numeric_mode
    m = R_hat.dim
    if e_hat[0] != 0:
        raise ValueError("spectral block route needs e_hat[0] = 0")
    if m < 2:
        raise ValueError("spectral block route needs at least two leading statuses")
    for i in range(1, m):
        if p0_hat[i] < 0 or r1_hat[i] < 0:
            raise ValueError("spectral block route needs nonnegative mass vectors")
    R = R_hat.submatrix(1, m)
    d = bidiagonal_decompose(R)  # raises on elitist blocks or duplicates
    e = e_hat[1:]
    _check_monotone_errors(e)
    a = [dot(e, p, mode) for p in d.right_vectors]
    b = [dot(q, p0_hat[1:], mode) for q in d.left_vectors]
    c = [dot(q, r1_hat[1:], mode) for q in d.left_vectors]
    lam = d.eigenvalues

    head_terms = [_scalar_pow(lam[j], t, mode) * a[j] * b[j] for j in range(len(lam))]
    tail_terms = []
    for j in range(len(lam)):
        if a[j] == 0 or c[j] == 0:
            continue
        tail_terms.append(a[j] * c[j] * _geometric_mix(lam[j], r_LL, t, mode))
    if mode is NumericMode.RATIONAL:
        head = sum(head_terms, Fraction(0))
        tail = sum(tail_terms, Fraction(0))
    else:
        head = math.fsum(head_terms)
        tail = math.fsum(tail_terms)
    return head + p_L0 * tail + p_L0 * e_L * _scalar_pow(r_LL, t, mode)


def _geometric_mix(lam: Number, r: Number, t: int, mode: NumericMode) -> Number:
    """sum_{k=0}^{t-1} r^k lam^{t-1-k}, exactly or with a resonance guard."""
    if t == 0:
        return Fraction(0) if mode is NumericMode.RATIONAL else 0.0
    if mode is NumericMode.RATIONAL:
        acc = Fraction(0)
        rk = Fraction(1)
        lam_pow = Fraction(lam) ** (t - 1)
        # Walk k upward, maintaining r^k and lam^{t-1-k} incrementally.
        lam = Fraction(lam)
        for k in range(t):
            acc += rk * lam_pow
            rk *= r
            if k < t - 1:
                if lam != 0:
                    lam_pow /= lam
                else:
                    lam_pow = Fraction(1) if t - 2 - k == 0 else Fraction(0)
        return acc
    lam = float(lam)
    r = float(r)
    scale = max(abs(lam), abs(r), 1.0)
    if abs(lam - r) > 1e-12 * scale:
        return (lam**t - r**t) / (lam - r)
    # Near-resonant geometric sum: all t terms are essentially lam^{t-1}.
    return t * ((lam + r) / 2.0) ** (t - 1)


@dataclass(frozen=True)
class BoundResult:
    """Lower/exact/upper values of one analytic error formula at one horizon.

    At least one field is populated; whenever two are present they must be
    ordered lower <= exact <= upper.  ``formula_id`` names the producing
    formula (one of the theorem ids or an auxiliary-chain tag).
    """

    formula_id: str
    lower: Optional[Number] = None
    exact: Optional[Number] = None
    upper: Optional[Number] = None

    def __post_init__(self):
        present = [v for v in (self.lower, self.exact, self.upper) if v is not None]
        if not present:
            raise ValueError(f"BoundResult {self.formula_id}: no values present")
        if self.lower is not None and self.exact is not None and self.lower > self.exact:
            raise ValueError(
                f"BoundResult {self.formula_id}: lower {self.lower} > exact {self.exact}"
            )
        if self.exact is not None and self.upper is not None and self.exact > self.upper:
            raise ValueError(
                f"BoundResult {self.formula_id}: exact {self.exact} > upper {self.upper}"
            )
        if (
            self.exact is None
            and self.lower is not None
            and self.upper is not None
            and self.lower > self.upper
        ):
            raise ValueError(
                f"BoundResult {self.formula_id}: lower {self.lower} > upper {self.upper}"
            )
