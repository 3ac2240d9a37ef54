"""Classical reference solvers: greedy, exhaustive enumeration, annealing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_instance, check_ising
from .ising import QuboInstance, qubo_to_ising
from .wireless import (
    ChannelAssignmentInstance,
    InfeasibleInstanceError,
    incremental_cost,
    matrix_to_channels,
    objective_value,
)

ORDERS = ("by_interference_score_desc", "by_index")
ENUMERATION_LIMIT = 10**7


class EnumerationTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class GreedyConfig:
    order: str = "by_interference_score_desc"

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")


def user_order(inst: ChannelAssignmentInstance, order: str, users: Sequence[int] = None) -> list[int]:
    users = list(range(inst.num_users)) if users is None else list(users)
    if order == "by_index":
        return sorted(users)
    deg = inst.weighted_degree()
    return sorted(users, key=lambda u: (-deg[u], u))


def _place(inst, X, users, adj):
    caps = inst.capacities
    load = X.sum(axis=0)
    for u in users:
        cost = incremental_cost(u, X, adj)
        allowed = [c for c in range(inst.num_channels) if caps is None or load[c] < caps[c]]
        if not allowed:
            raise InfeasibleInstanceError(f"no channel with spare capacity for user {u}")
        # load only breaks ties when capacities make it matter
        c = min(allowed, key=lambda c: (cost[c], load[c] if caps is not None else 0, c))
        X[u, c] = 1
        load[c] += 1
    return X


def greedy_assign(inst: ChannelAssignmentInstance, cfg: GreedyConfig = GreedyConfig()) -> np.ndarray:
    """Place users one at a time on the channel adding the least interference."""
    X = np.zeros((inst.num_users, inst.num_channels), dtype=np.int64)
    return _place(inst, X, user_order(inst, cfg.order), inst.adjacency())


def greedy_extend(inst: ChannelAssignmentInstance, partial, cfg: GreedyConfig = GreedyConfig(),
                  core_users: Sequence[int] = None) -> np.ndarray:
    """Keep the rows of ``core_users`` (default: one-hot rows) and greedily place the rest."""
    X = np.array(partial, dtype=np.int64)
    if X.shape != (inst.num_users, inst.num_channels):
        raise ValueError("partial assignment shape does not match instance")
    if core_users is None:
        core_users = np.flatnonzero(X.sum(axis=1) == 1).tolist()
    core = set(int(u) for u in core_users)
    if any(X[u].sum() != 1 for u in core):
        raise ValueError("core rows must be one-hot")
    rest = [u for u in range(inst.num_users) if u not in core]
    X[rest] = 0
    if inst.capacities is not None and np.any(X.sum(axis=0) > inst.capacities):
        raise InfeasibleInstanceError("core assignment already exceeds a channel capacity")
    return _place(inst, X, user_order(inst, cfg.order, rest), inst.adjacency())


# -- exhaustive enumeration -------------------------------------------------


def _enumerate(inst: ChannelAssignmentInstance, limit: int, chunk: int = 1 << 18):
    """Yield ``(start, channel vectors, costs, feasible)`` in lexicographic order."""
    U, C = inst.num_users, inst.num_channels
    total = C**U
    if total > limit:
        raise EnumerationTooLargeError(f"{C}^{U} = {total} assignments exceed limit {limit}")
    W = inst.channel_weights()
    place = C ** np.arange(U - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        A = (idx[:, None] // place[None, :]) % C
        cost = np.zeros(len(idx))
        for e, (u, v) in enumerate(inst.pairs.tolist()):
            same = A[:, u] == A[:, v]
            cost += np.where(same, W[e][A[:, u]], 0.0)
        feasible = np.ones(len(idx), dtype=bool)
        if inst.capacities is not None:
            for c in range(C):
                feasible &= (A == c).sum(axis=1) <= inst.capacities[c]
        yield start, A, cost, feasible


def brute_force(inst: ChannelAssignmentInstance, limit: int = ENUMERATION_LIMIT) -> tuple[np.ndarray, float]:
    """Exact minimizer over one-hot assignments; ties to the lexicographically first."""
    best, best_cost = None, np.inf
    for _, A, cost, ok in _enumerate(inst, limit):
        cost = np.where(ok, cost, np.inf)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best, best_cost = A[k].copy(), float(cost[k])
    X = np.zeros((inst.num_users, inst.num_channels), dtype=np.int64)
    X[np.arange(inst.num_users), best] = 1
    return X, best_cost


def objective_range(inst: ChannelAssignmentInstance, limit: int = ENUMERATION_LIMIT) -> tuple[float, float]:
    """Best and worst objective over feasible assignments."""
    lo, hi = np.inf, -np.inf
    for _, _, cost, ok in _enumerate(inst, limit):
        if ok.any():
            lo = min(lo, float(cost[ok].min()))
            hi = max(hi, float(cost[ok].max()))
    return lo, hi


# -- simulated annealing ----------------------------------------------------


@numba.njit(cache=True)
def _anneal(h, indptr, indices, data, z, temps, seed):
    np.random.seed(seed)
    n = h.shape[0]
    field = h.copy()
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            field[i] += data[k] * z[indices[k]]
    e = 0.0
    for i in range(n):
        e += h[i] * z[i] + 0.5 * (field[i] - h[i]) * z[i]
    best_e = e
    best = z.copy()
    for s in range(temps.shape[0]):
        t = temps[s]
        for i in range(n):
            de = -2.0 * z[i] * field[i]
            if de <= 0.0 or (t > 0.0 and np.random.random() < np.exp(-de / t)):
                z[i] = -z[i]
                e += de
                for k in range(indptr[i], indptr[i + 1]):
                    field[indices[k]] += 2.0 * data[k] * z[i]
                if e < best_e - 1e-12:
                    best_e = e
                    best[:] = z
    return best, best_e


def simulated_annealing(model, n_sweeps: Optional[int] = None, t_initial: Optional[float] = None,
                        t_final: Optional[float] = None, seed: int = 0) -> tuple[dict[int, int], float]:
    """Single-flip Metropolis annealing with geometric cooling.

    Defaults: ``100 * n`` sweeps from ``max|coefficient|`` down to a
    thousandth of it. Returns the best spin configuration seen and its energy.
    """
    ising = qubo_to_ising(model) if isinstance(model, QuboInstance) else check_ising(model)
    idx = list(ising.active)
    n = len(idx)
    if n == 0:
        return {}, ising.offset
    pos = {g: k for k, g in enumerate(idx)}
    h = np.array([ising.fields.get(g, 0.0) for g in idx])
    rows, cols, vals = [], [], []
    for (i, j), v in ising.couplings.items():
        rows += [pos[i], pos[j]]
        cols += [pos[j], pos[i]]
        vals += [v, v]
    order = np.lexsort((cols, rows))
    rows, cols, vals = np.array(rows, dtype=np.int64)[order], np.array(cols, dtype=np.int64)[order], np.array(vals)[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    t0 = t_initial if t_initial is not None else (ising.max_abs_coefficient() or 1.0)
    t1 = t_final if t_final is not None else t0 * 1e-3
    sweeps = n_sweeps if n_sweeps is not None else 100 * n
    temps = t0 * (t1 / t0) ** (np.arange(sweeps) / max(sweeps - 1, 1))
    rng = np.random.default_rng(seed)
    z0 = rng.choice(np.array([-1.0, 1.0]), size=n)
    best, _ = _anneal(h, indptr, cols, vals, z0, temps, int(rng.integers(2**31)))
    z = {g: int(best[k]) for k, g in enumerate(idx)}
    return z, ising.energy(z)


# -- estimators -------------------------------------------------------------


class _AssignerMixin:
    def fit_predict(self, X, y=None) -> np.ndarray:
        """Channel index per user."""
        return self.fit(X).channels_

    def _store(self, inst, A):
        self.assignment_ = A
        self.channels_ = matrix_to_channels(A)
        self.objective_ = objective_value(A, inst)
        return self


class GreedyAssigner(_AssignerMixin, BaseEstimator):
    def __init__(self, order="by_interference_score_desc"):
        self.order = order

    def fit(self, X, y=None):
        inst = check_instance(X)
        return self._store(inst, greedy_assign(inst, GreedyConfig(self.order)))


class ExhaustiveAssigner(_AssignerMixin, BaseEstimator):
    def __init__(self, limit=ENUMERATION_LIMIT):
        self.limit = limit

    def fit(self, X, y=None):
        inst = check_instance(X)
        return self._store(inst, brute_force(inst, self.limit)[0])


class AnnealingSolver(BaseEstimator):
    """Simulated annealing on an Ising or QUBO model; result in ``assignment_``."""

    def __init__(self, n_sweeps=None, t_initial=None, t_final=None, random_state=0):
        self.n_sweeps = n_sweeps
        self.t_initial = t_initial
        self.t_final = t_final
        self.random_state = random_state

    def fit(self, X, y=None):
        self.assignment_, self.energy_ = simulated_annealing(
            X, self.n_sweeps, self.t_initial, self.t_final, self.random_state)
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).assignment_
