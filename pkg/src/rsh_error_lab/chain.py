"""Status-level Markov chains for elitist search heuristics.

A run of an elitist heuristic on a finite problem is tracked through a
finite set of *statuses* (equivalence classes of search points sharing one
approximation error).  Status 0 is the optimum (error 0) and errors grow
with the status index.  Because the heuristics never accept a worse point,
the status index can only decrease, so the transition matrix is upper
triangular under the convention used throughout this package:

    transition[i][j] = Pr{next status = i | current status = j}

i.e. matrices are *column*-stochastic and the state distribution evolves by
left multiplication, p_{t+1} = R p_t.

Two numeric modes are supported and never mixed inside one object: exact
rational arithmetic (``fractions.Fraction``) and IEEE float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

Number = Union[int, float, Fraction]

#: Tolerance for probability-sum checks in float mode.  Violations larger
#: than this are reported as hard validation errors.
STOCHASTIC_TOL = 1e-12

#: Hard cap on the horizon accepted by the matrix-power routines, keeping
#: their O(t * L^2) cost predictable.
MAX_POWER_STEPS = 10**7


class NumericMode(Enum):
    """Arithmetic used for every entry of a matrix or model."""

    FLOAT64 = "float64"
    RATIONAL = "rational"


class SearchClass(Enum):
    """Structural class of a transition matrix, most specific first.

    DIAGONAL: mass only on the diagonal (each status improves straight to
    itself... i.e. never leaves except implicitly via other columns).
    BIDIAGONAL: mass on the diagonal and first superdiagonal only, so a
    step improves by at most one status.
    ELITIST: any upper-triangular matrix (multi-status jumps allowed).
    """

    DIAGONAL = "diagonal"
    BIDIAGONAL = "bidiagonal"
    ELITIST = "elitist"


class MixedModeError(TypeError):
    """Raised when float64 and rational objects meet in one operation."""


class InvalidModelError(ValueError):
    """Raised when an operation requires a valid model but validation fails."""


def _coerce_entry(value: Number, mode: NumericMode, context: str) -> Number:
    """Coerce ``value`` into the arithmetic of ``mode`` or raise.

    Ints are exact in both modes and are converted.  Anything else must
    already match the mode; silent lossy conversion is never performed.
    """
    if mode is NumericMode.RATIONAL:
        if isinstance(value, bool):
            raise MixedModeError(f"{context}: bool is not a rational entry")
        if isinstance(value, (int, Fraction)):
            return Fraction(value)
        raise MixedModeError(
            f"{context}: {type(value).__name__} entry in rational-mode object"
        )
    if isinstance(value, bool):
        raise MixedModeError(f"{context}: bool is not a float entry")
    if isinstance(value, int):
        return float(value)
    if isinstance(value, float):
        return value
    raise MixedModeError(
        f"{context}: {type(value).__name__} entry in float64-mode object"
    )


def coerce_vector(values: Sequence[Number], mode: NumericMode, context: str = "vector"):
    """Return ``values`` as a tuple in the arithmetic of ``mode``."""
    return tuple(_coerce_entry(v, mode, f"{context}[{k}]") for k, v in enumerate(values))


def dot(u: Sequence[Number], v: Sequence[Number], mode: NumericMode) -> Number:
    """Inner product of two equal-length vectors.

    Float mode accumulates with ``math.fsum`` semantics via numpy being
    avoided on purpose: exact summation makes alternating-sign spectral
    sums safe.  Rational mode is exact anyway.
    """
    if len(u) != len(v):
        raise ValueError(f"dot: length mismatch {len(u)} vs {len(v)}")
    if mode is NumericMode.RATIONAL:
        return sum((a * b for a, b in zip(u, v)), Fraction(0))
    import math

    return math.fsum(a * b for a, b in zip(u, v))


class UpperTriMatrix:
    """Immutable square upper-triangular matrix in one numeric mode.

    Rows are stored dense and row-major.  Construction rejects nonzero
    entries below the diagonal; it does not check stochasticity (that is a
    model-level validation, see :func:`validate_model`).
    """

    __slots__ = ("dim", "rows", "numeric_mode")

    def __init__(self, rows: Sequence[Sequence[Number]], numeric_mode: NumericMode):
        dim = len(rows)
        if dim == 0:
            raise ValueError("UpperTriMatrix: dimension must be at least 1")
        coerced = []
        for i, row in enumerate(rows):
            if len(row) != dim:
                raise ValueError(
                    f"UpperTriMatrix: row {i} has length {len(row)}, expected {dim}"
                )
            coerced.append(
                tuple(_coerce_entry(v, numeric_mode, f"entry({i},{j})") for j, v in enumerate(row))
            )
        for i in range(dim):
            for j in range(i):
                if coerced[i][j] != 0:
                    raise ValueError(
                        f"UpperTriMatrix: nonzero entry ({i},{j}) below the diagonal"
                    )
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "rows", tuple(coerced))
        object.__setattr__(self, "numeric_mode", numeric_mode)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("UpperTriMatrix is immutable")

    # -- basic access -----------------------------------------------------

    def entry(self, i: int, j: int) -> Number:
        return self.rows[i][j]

    def __getitem__(self, ij) -> Number:
        i, j = ij
        return self.rows[i][j]

    def diagonal(self) -> tuple:
        return tuple(self.rows[i][i] for i in range(self.dim))

    def superdiagonal(self) -> tuple:
        return tuple(self.rows[i][i + 1] for i in range(self.dim - 1))

    def column_sum(self, j: int) -> Number:
        col = [self.rows[i][j] for i in range(j + 1)]
        if self.numeric_mode is NumericMode.RATIONAL:
            return sum(col, Fraction(0))
        import math

        return math.fsum(col)

    def __eq__(self, other) -> bool:
        if not isinstance(other, UpperTriMatrix):
            return NotImplemented
        return (
            self.numeric_mode is other.numeric_mode
            and self.dim == other.dim
            and self.rows == other.rows
        )

    def __hash__(self):
        return hash((self.numeric_mode, self.rows))

    def __repr__(self) -> str:
        return f"UpperTriMatrix(dim={self.dim}, mode={self.numeric_mode.value})"

    # -- constructors -----------------------------------------------------

    @classmethod
    def identity(cls, dim: int, numeric_mode: NumericMode) -> "UpperTriMatrix":
        one = Fraction(1) if numeric_mode is NumericMode.RATIONAL else 1.0
        zero = Fraction(0) if numeric_mode is NumericMode.RATIONAL else 0.0
        return cls(
            [[one if i == j else zero for j in range(dim)] for i in range(dim)],
            numeric_mode,
        )

    # -- arithmetic -------------------------------------------------------

    def _require_same_mode(self, other: "UpperTriMatrix") -> None:
        if self.numeric_mode is not other.numeric_mode:
            raise MixedModeError(
                f"cannot combine {self.numeric_mode.value} and {other.numeric_mode.value} matrices"
            )

    def matvec(self, p: Sequence[Number]) -> tuple:
        """Return M p for a column vector p (length ``dim``)."""
        if len(p) != self.dim:
            raise ValueError(f"matvec: vector length {len(p)} != dim {self.dim}")
        p = coerce_vector(p, self.numeric_mode, "p")
        out = []
        for i in range(self.dim):
            row = self.rows[i]
            out.append(dot(row[i:], p[i:], self.numeric_mode))
        return tuple(out)

    def matmul(self, other: "UpperTriMatrix") -> "UpperTriMatrix":
        """Matrix product; the result of two upper triangulars stays upper."""
        self._require_same_mode(other)
        if self.dim != other.dim:
            raise ValueError(f"matmul: dim mismatch {self.dim} vs {other.dim}")
        n = self.dim
        zero = Fraction(0) if self.numeric_mode is NumericMode.RATIONAL else 0.0
        rows = [[zero] * n for _ in range(n)]
        for i in range(n):
            a = self.rows[i]
            for j in range(i, n):
                acc = [a[k] * other.rows[k][j] for k in range(i, j + 1)]
                if self.numeric_mode is NumericMode.RATIONAL:
                    rows[i][j] = sum(acc, Fraction(0))
                else:
                    import math

                    rows[i][j] = math.fsum(acc)
        return UpperTriMatrix(rows, self.numeric_mode)

    def matpow(self, t: int) -> "UpperTriMatrix":
        """t-fold product by repeated multiplication (exact in rational mode)."""
        if t < 0:
            raise ValueError("matpow: t must be nonnegative")
        if t > MAX_POWER_STEPS:
            raise ValueError(f"matpow: t={t} exceeds the supported cap {MAX_POWER_STEPS}")
        out = UpperTriMatrix.identity(self.dim, self.numeric_mode)
        for _ in range(t):
            out = out.matmul(self)
        return out

    # -- conversions ------------------------------------------------------

    def to_float(self) -> "UpperTriMatrix":
        if self.numeric_mode is NumericMode.FLOAT64:
            return self
        return UpperTriMatrix(
            [[float(v) for v in row] for row in self.rows], NumericMode.FLOAT64
        )

    def as_numpy(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.rows], dtype=np.float64)

    def submatrix(self, lo: int, hi: int) -> "UpperTriMatrix":
        """Principal block on indices lo..hi-1."""
        if not (0 <= lo < hi <= self.dim):
            raise ValueError(f"submatrix: bad range [{lo}, {hi}) for dim {self.dim}")
        return UpperTriMatrix(
            [[self.rows[i][j] for j in range(lo, hi)] for i in range(lo, hi)],
            self.numeric_mode,
        )


@dataclass(frozen=True)
class StatusModel:
    """Error vector, initial distribution and transition matrix of a chain.

    ``errors[i]`` is the approximation error shared by all search points of
    status i; ``initial[i]`` the probability of starting there.  The class
    performs only shape and mode checks at construction so that defective
    models can still be inspected; content rules live in
    :func:`validate_model`, and computing operations insist on validity.
    """

    errors: tuple
    initial: tuple
    transition: UpperTriMatrix

    def __post_init__(self):
        mode = self.transition.numeric_mode
        object.__setattr__(self, "errors", coerce_vector(self.errors, mode, "errors"))
        object.__setattr__(self, "initial", coerce_vector(self.initial, mode, "initial"))
        dim = self.transition.dim
        if len(self.errors) != dim or len(self.initial) != dim:
            raise ValueError(
                f"StatusModel: errors/initial length ({len(self.errors)}/{len(self.initial)})"
                f" must equal transition dim {dim}"
            )

    @property
    def num_statuses(self) -> int:
        return self.transition.dim

    @property
    def numeric_mode(self) -> NumericMode:
        return self.transition.numeric_mode

    def to_float(self) -> "StatusModel":
        if self.numeric_mode is NumericMode.FLOAT64:
            return self
        return StatusModel(
            tuple(float(v) for v in self.errors),
            tuple(float(v) for v in self.initial),
            self.transition.to_float(),
        )

    def require_valid(self) -> None:
        violations = validate_model(self)
        if violations:
            raise InvalidModelError("; ".join(violations))


def validate_model(model: StatusModel) -> tuple:
    """Check every model invariant and report violations as strings.

    This is a reporting operation: it never raises on bad content, so a
    defective model can be diagnosed.  Each violation string names the
    invariant and the offending index.  An empty tuple means valid.
    """
    out = []
    mode = model.numeric_mode
    tol = 0 if mode is NumericMode.RATIONAL else STOCHASTIC_TOL
    L1 = model.num_statuses

    if L1 < 2:
        out.append(f"num_statuses: need at least 2 statuses, got {L1}")

    if model.errors and model.errors[0] != 0:
        out.append(f"errors[0]: optimal status must have error 0, got {model.errors[0]}")
    for i in range(1, L1):
        if model.errors[i] < model.errors[i - 1]:
            out.append(
                f"errors[{i}]: must be monotone nondecreasing, "
                f"{model.errors[i]} < {model.errors[i - 1]}"
            )

    total = Fraction(0) if mode is NumericMode.RATIONAL else 0.0
    for i, p in enumerate(model.initial):
        if p < -tol:
            out.append(f"initial[{i}]: negative probability {p}")
        total += p
    if abs(total - 1) > tol:
        out.append(f"initial: probabilities sum to {total}, expected 1")

    tr = model.transition
    for j in range(L1):
        for i in range(j + 1):
            v = tr.entry(i, j)
            if v < -tol or v > 1 + tol:
                out.append(f"transition({i},{j}): entry {v} outside [0, 1]")
        s = tr.column_sum(j)
        if abs(s - 1) > tol:
            out.append(f"transition column {j}: sums to {s}, expected 1")
    if tr.entry(0, 0) != 1:
        out.append(f"transition(0,0): optimal status must be absorbing, got {tr.entry(0, 0)}")

    return tuple(out)


def classify_search(m) -> SearchClass:
    """Classify a transition matrix; returns the most specific class.

    Accepts an :class:`UpperTriMatrix` or a raw square row-major nesting;
    raw input with nonzero entries below the diagonal is rejected.
    """
    if not isinstance(m, UpperTriMatrix):
        # Mode detection for raw input: rational iff no floats present.
        flat = [v for row in m for v in row]
        mode = (
            NumericMode.FLOAT64
            if any(isinstance(v, float) for v in flat)
            else NumericMode.RATIONAL
        )
        m = UpperTriMatrix(m, mode)
    above_super = any(
        m.entry(i, j) != 0 for i in range(m.dim) for j in range(i + 2, m.dim)
    )
    if above_super:
        return SearchClass.ELITIST
    if any(v != 0 for v in m.superdiagonal()):
        return SearchClass.BIDIAGONAL
    return SearchClass.DIAGONAL


def expected_error_power(model: StatusModel, t: int) -> Number:
    """Expected approximation error after t steps, by t transition applications.

    This is the ground-truth evaluation path: it never forms a matrix
    power explicitly, evolving the distribution vector instead.  Cost is
    O(t * L^2); t is capped so the cost stays predictable.
    """
    if not isinstance(t, int) or isinstance(t, bool):
        raise TypeError(f"t must be an int, got {type(t).__name__}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t > MAX_POWER_STEPS:
        raise ValueError(f"t={t} exceeds the supported cap {MAX_POWER_STEPS}")
    model.require_valid()
    if model.numeric_mode is NumericMode.RATIONAL:
        p = model.initial
        for _ in range(t):
            p = model.transition.matvec(p)
        return dot(model.errors, p, NumericMode.RATIONAL)
    P = model.transition.as_numpy()
    p = np.array(model.initial, dtype=np.float64)
    for _ in range(t):
        p = P @ p
    e = np.array(model.errors, dtype=np.float64)
    return float(e @ p)


def reduce_to_nonoptimal(model: StatusModel):
    """Strip the optimal status, returning (errors, submatrix, initial).

    Valid because error contributions of status 0 vanish: the expected
    error computed on the reduced triple equals the full-model value for
    every t.  Models whose status 0 carries nonzero error are rejected.
    """
    if model.errors[0] != 0:
        raise ValueError(
            f"reduce_to_nonoptimal: status 0 must have error 0, got {model.errors[0]}"
        )
    L1 = model.num_statuses
    if L1 < 2:
        raise ValueError("reduce_to_nonoptimal: nothing left after removing status 0")
    return (
        model.errors[1:],
        model.transition.submatrix(1, L1),
        model.initial[1:],
    )


# -- JSON serialization ---------------------------------------------------


def _entry_to_json(v: Number, mode: NumericMode):
    if mode is NumericMode.RATIONAL:
        return str(Fraction(v))
    return float(v)


def _entry_from_json(v, mode: NumericMode) -> Number:
    if mode is NumericMode.RATIONAL:
        if isinstance(v, float):
            raise MixedModeError(f"rational-mode JSON holds float value {v!r}")
        return Fraction(v) if isinstance(v, str) else Fraction(int(v))
    if isinstance(v, str):
        raise MixedModeError(f"float64-mode JSON holds string value {v!r}")
    return float(v)


def model_to_json_dict(model: StatusModel) -> dict:
    """Serializable dict: errors, initial, row-major transition, mode tag."""
    mode = model.numeric_mode
    return {
        "errors": [_entry_to_json(v, mode) for v in model.errors],
        "initial": [_entry_to_json(v, mode) for v in model.initial],
        "transition": [
            [_entry_to_json(v, mode) for v in row] for row in model.transition.rows
        ],
        "numeric_mode": mode.value,
    }


def model_from_json_dict(data: dict) -> StatusModel:
    mode = NumericMode(data["numeric_mode"])
    transition = UpperTriMatrix(
        [[_entry_from_json(v, mode) for v in row] for row in data["transition"]],
        mode,
    )
    return StatusModel(
        tuple(_entry_from_json(v, mode) for v in data["errors"]),
        tuple(_entry_from_json(v, mode) for v in data["initial"]),
        transition,
    )


def model_to_json(model: StatusModel, indent: int | None = None) -> str:
    return json.dumps(model_to_json_dict(model), indent=indent)


def model_from_json(text: str) -> StatusModel:
    return model_from_json_dict(json.loads(text))
