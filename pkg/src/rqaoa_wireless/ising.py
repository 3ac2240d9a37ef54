"""QUBO and Ising models, their interconversion, and variable elimination.

Spins use the convention ``x_i = (1 - z_i) / 2``, so ``z = +1`` is bit 0.
Variables keep their global index through every reduction; an
:class:`EliminationRecord` lists the relations needed to lift a solution of a
reduced model back to the original index set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

PRUNE_EPS = 1e-12


class AssignmentIncompleteError(ValueError):
    """A spin assignment does not cover every active index."""


class InvalidIndexError(ValueError):
    """An elimination refers to an index that is not active."""


class InvalidMergeError(InvalidIndexError):
    pass


class InconsistentRecordError(ValueError):
    """Back-substitution reached a merge whose kept spin has no value."""


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def _prune(d: dict) -> dict:
    return {k: v for k, v in d.items() if abs(v) > PRUNE_EPS}


@dataclass
class QuboInstance:
    """``f(x) = sum_{i<j} Q_ij x_i x_j + sum_i q_i x_i + c`` over bits.

    Diagonal entries of ``Q`` live in ``linear`` since ``x_i**2 == x_i``.
    """

    num_vars: int
    quadratic: dict[tuple[int, int], float] = field(default_factory=dict)
    linear: np.ndarray = None
    offset: float = 0.0

    def __post_init__(self):
        if self.linear is None:
            self.linear = np.zeros(self.num_vars)
        self.linear = np.asarray(self.linear, dtype=float)
        if self.linear.shape != (self.num_vars,):
            raise ValueError("linear must have length num_vars")
        quad = {}
        for (i, j), v in self.quadratic.items():
            if i == j:
                raise ValueError(f"diagonal quadratic key ({i}, {j}); use linear")
            if not (0 <= i < self.num_vars and 0 <= j < self.num_vars):
                raise ValueError(f"quadratic key ({i}, {j}) out of range")
            key = _pair(i, j)
            quad[key] = quad.get(key, 0.0) + float(v)
        self.quadratic = _prune(quad)
        self.offset = float(self.offset)

    def energy(self, x) -> float:
        x = np.asarray(x)
        if x.shape != (self.num_vars,):
            raise ValueError(f"expected {self.num_vars} bits, got shape {x.shape}")
        e = self.offset + float(self.linear @ x)
        for (i, j), v in self.quadratic.items():
            e += v * x[i] * x[j]
        return e

    def energies(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized energy of a stack of bitstrings (rows)."""
        xs = np.asarray(xs, dtype=float)
        e = self.offset + xs @ self.linear
        for (i, j), v in self.quadratic.items():
            e = e + v * xs[:, i] * xs[:, j]
        return e


@dataclass
class IsingInstance:
    """``E(z) = offset + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j``.

    ``active`` is the sorted tuple of spin indices still in play; ``fields``
    and ``couplings`` only reference active spins and never store zeros.
    """

    active: tuple[int, ...] = ()
    fields: dict[int, float] = field(default_factory=dict)
    couplings: dict[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        self.active = tuple(sorted({int(i) for i in self.active}))
        act = set(self.active)
        h = {}
        for i, v in self.fields.items():
            i = int(i)
            if i not in act:
                raise InvalidIndexError(f"field on inactive index {i}")
            h[i] = h.get(i, 0.0) + float(v)
        J = {}
        for (i, j), v in self.couplings.items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-coupling on index {i}")
            if i not in act or j not in act:
                raise InvalidIndexError(f"coupling ({i}, {j}) touches inactive index")
            key = _pair(i, j)
            J[key] = J.get(key, 0.0) + float(v)
        self.fields = _prune(h)
        self.couplings = _prune(J)
        self.offset = float(self.offset)

    @classmethod
    def from_terms(cls, fields=None, couplings=None, offset=0.0, active=None):
        """Build an instance, inferring ``active`` from the terms if omitted."""
        fields = dict(fields or {})
        couplings = dict(couplings or {})
        if active is None:
            active = set(fields)
            for i, j in couplings:
                active.update((i, j))
        return cls(tuple(active), fields, couplings, offset)

    @property
    def num_active(self) -> int:
        return len(self.active)

    def coupling(self, i: int, j: int) -> float:
        return self.couplings.get(_pair(i, j), 0.0)

    def neighbors(self, k: int) -> dict[int, float]:
        out = {}
        for (i, j), v in self.couplings.items():
            if i == k:
                out[j] = v
            elif j == k:
                out[i] = v
        return out

    def energy(self, z: Mapping[int, int]) -> float:
        missing = [i for i in self.active if i not in z]
        if missing:
            raise AssignmentIncompleteError(f"no spin value for indices {missing}")
        e = self.offset
        for i, v in self.fields.items():
            e += v * z[i]
        for (i, j), v in self.couplings.items():
            e += v * z[i] * z[j]
        return e

    def max_abs_coefficient(self) -> float:
        vals = [abs(v) for v in self.fields.values()]
        vals += [abs(v) for v in self.couplings.values()]
        return max(vals, default=0.0)

    def shifted(self, delta: float) -> "IsingInstance":
        return IsingInstance(self.active, dict(self.fields), dict(self.couplings), self.offset + delta)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "active": list(self.active),
            "fields": [[i, self.fields[i]] for i in sorted(self.fields)],
            "couplings": [[i, j, self.couplings[(i, j)]] for i, j in sorted(self.couplings)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IsingInstance":
        fields = {int(i): float(v) for i, v in d.get("fields", [])}
        couplings = {}
        for i, j, v in d.get("couplings", []):
            if int(i) < 0 or int(j) < 0:
                raise ValueError("indices must be non-negative")
            couplings[_pair(int(i), int(j))] = float(v)
        active = d.get("active")
        return cls.from_terms(fields, couplings, d.get("offset", 0.0), active)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "IsingInstance":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class Fix:
    index: int
    sign: int
    heuristic: bool = False


@dataclass(frozen=True)
class Merge:
    """Relation ``z[removed] = sign * z[kept]``."""

    kept: int
    removed: int
    sign: int


Entry = Union[Fix, Merge]


class EliminationRecord(list):
    """Ordered list of :class:`Fix` and :class:`Merge` entries."""

    def eliminated(self) -> list[int]:
        return [e.index if isinstance(e, Fix) else e.removed for e in self]

    def to_dicts(self) -> list[dict]:
        out = []
        for e in self:
            if isinstance(e, Fix):
                out.append({"op": "fix", "index": e.index, "sign": e.sign, "heuristic": e.heuristic})
            else:
                out.append({"op": "merge", "kept": e.kept, "removed": e.removed, "sign": e.sign})
        return out


def _check_sign(sigma) -> int:
    if sigma not in (-1, 1):
        raise ValueError(f"sign must be -1 or +1, got {sigma!r}")
    return int(sigma)


def qubo_to_ising(q: QuboInstance) -> IsingInstance:
    h = {i: -0.5 * float(q.linear[i]) for i in range(q.num_vars)}
    J = {}
    offset = q.offset + 0.5 * float(np.sum(q.linear))
    for (i, j), v in q.quadratic.items():
        J[(i, j)] = 0.25 * v
        h[i] -= 0.25 * v
        h[j] -= 0.25 * v
        offset += 0.25 * v
    return IsingInstance(tuple(range(q.num_vars)), h, J, offset)


def ising_to_qubo(ising: IsingInstance) -> QuboInstance:
    """Inverse of :func:`qubo_to_ising`.

    The QUBO has ``max(active) + 1`` variables; inactive indices below that
    bound become free bits with zero coefficients.
    """
    n = max(ising.active) + 1 if ising.active else 0
    linear = np.zeros(n)
    quad = {}
    offset = ising.offset
    for i, v in ising.fields.items():
        linear[i] -= 2.0 * v
        offset += v
    for (i, j), v in ising.couplings.items():
        quad[(i, j)] = 4.0 * v
        linear[i] -= 2.0 * v
        linear[j] -= 2.0 * v
        offset += v
    return QuboInstance(n, quad, linear, offset)


def energy(ising: IsingInstance, z: Mapping[int, int]) -> float:
    return ising.energy(z)


def fix_spin(ising: IsingInstance, k: int, sigma: int, heuristic: bool = False) -> tuple[IsingInstance, Fix]:
    """Substitute ``z_k = sigma`` and drop ``k`` from the active set."""
    sigma = _check_sign(sigma)
    if k not in set(ising.active):
        raise InvalidIndexError(f"index {k} is not active")
    offset = ising.offset + ising.fields.get(k, 0.0) * sigma
    h = {i: v for i, v in ising.fields.items() if i != k}
    J = {}
    for (i, j), v in ising.couplings.items():
        if i == k or j == k:
            other = j if i == k else i
            h[other] = h.get(other, 0.0) + v * sigma
        else:
            J[(i, j)] = v
    active = tuple(i for i in ising.active if i != k)
    return IsingInstance(active, h, J, offset), Fix(int(k), sigma, heuristic)


def merge_pair(ising: IsingInstance, keep: int, remove: int, sigma: int) -> tuple[IsingInstance, Merge]:
    """Substitute ``z_remove = sigma * z_keep`` and drop ``remove``."""
    sigma = _check_sign(sigma)
    act = set(ising.active)
    if keep == remove:
        raise InvalidMergeError(f"cannot merge index {keep} with itself")
    if keep not in act or remove not in act:
        raise InvalidMergeError(f"merge ({keep}, {remove}) touches inactive index")
    offset = ising.offset + ising.coupling(keep, remove) * sigma
    h = {i: v for i, v in ising.fields.items() if i != remove}
    if remove in ising.fields:
        h[keep] = h.get(keep, 0.0) + sigma * ising.fields[remove]
    J = {}
    for (i, j), v in ising.couplings.items():
        if {i, j} == {keep, remove}:
            continue
        if i == remove or j == remove:
            other = j if i == remove else i
            key = _pair(keep, other)
            J[key] = J.get(key, 0.0) + sigma * v
        else:
            J[(i, j)] = J.get((i, j), 0.0) + v
    active = tuple(i for i in ising.active if i != remove)
    return IsingInstance(active, h, J, offset), Merge(int(keep), int(remove), sigma)


def back_substitute(record: Iterable[Entry], core: Mapping[int, int]) -> dict[int, int]:
    """Lift a core assignment through ``record`` (processed last to first).

    A merge whose kept spin is not yet known is retried after the others,
    so hand-written chains such as ``[Merge(1, 2), Merge(2, 3)]`` resolve too.
    Records produced by the elimination routines never need the retry.
    """
    z = {int(i): int(v) for i, v in core.items()}
    pending = list(reversed(list(record)))
    while pending:
        stuck = []
        for entry in pending:
            if isinstance(entry, Fix):
                z[entry.index] = entry.sign
            elif entry.kept in z:
                z[entry.removed] = entry.sign * z[entry.kept]
            else:
                stuck.append(entry)
        if len(stuck) == len(pending):
            e = stuck[0]
            raise InconsistentRecordError(f"merge of {e.removed} into {e.kept}, whose value is never known")
        pending = stuck
    return z


def spins_to_bits(z: Mapping[int, int], n: int) -> np.ndarray:
    return np.array([(1 - z[i]) // 2 for i in range(n)], dtype=np.int8)


def bits_to_spins(x) -> dict[int, int]:
    return {i: 1 - 2 * int(b) for i, b in enumerate(x)}
