"""Classical reductions applied before any quantum call.

Isolated-spin and persistency fixes preserve the optimum; wireless pruning
removes users left with a single admissible channel. Heuristic freezing from
annealing magnetizations is optional and *not* exactness-preserving; its
entries carry ``heuristic=True``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_ising
from .baselines import simulated_annealing
from .ising import EliminationRecord, Fix, IsingInstance, back_substitute, fix_spin, merge_pair
from .wireless import ChannelAssignmentInstance, InfeasibleInstanceError, VariableLayout


@dataclass(frozen=True)
class FreezeConfig:
    runs: int = 8
    threshold: float = 0.9
    sweeps: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ValueError("freeze threshold must lie in (0, 1]")
        if self.runs < 1:
            raise ValueError("need at least one annealing run")


@dataclass
class PresolveConfig:
    enable_isolated: bool = True
    enable_persistency: bool = True
    enable_wireless_prune: bool = False
    freeze: Optional[FreezeConfig] = None


@dataclass
class WirelessContext:
    """Problem structure needed for wireless pruning."""

    instance: ChannelAssignmentInstance
    layout: VariableLayout
    forbidden: frozenset = frozenset()
    assigned: Mapping[int, int] = field(default_factory=dict)


def _isolated(ising: IsingInstance) -> list[int]:
    coupled = set()
    for i, j in ising.couplings:
        coupled.update((i, j))
    return [i for i in ising.active if i not in coupled]


def reduce_isolated(ising: IsingInstance) -> tuple[IsingInstance, list[Fix]]:
    """Fix uncoupled spins to ``sign(-h)``; ``h == 0`` spins go to ``+1``."""
    entries = []
    while True:
        todo = _isolated(ising)
        if not todo:
            return ising, entries
        for i in todo:
            h = ising.fields.get(i, 0.0)
            ising, e = fix_spin(ising, i, -1 if h > 0 else 1)
            entries.append(e)


def reduce_persistency(ising: IsingInstance) -> tuple[IsingInstance, list[Fix]]:
    """Fix spins with ``|h_i| >= sum_j |J_ij|`` (and ``h_i != 0``) to ``sign(-h_i)``."""
    entries = []
    while True:
        bound = {i: 0.0 for i in ising.active}
        for (i, j), v in ising.couplings.items():
            bound[i] += abs(v)
            bound[j] += abs(v)
        hit = next((i for i in ising.active
                    if ising.fields.get(i, 0.0) != 0 and abs(ising.fields[i]) >= bound[i]), None)
        if hit is None:
            return ising, entries
        ising, e = fix_spin(ising, hit, -1 if ising.fields[hit] > 0 else 1)
        entries.append(e)


def wireless_prune(inst: ChannelAssignmentInstance, forbidden: Iterable[tuple[int, int]] = (),
                   assigned: Mapping[int, int] = None) -> dict[tuple[int, int], int]:
    """Assignment bits forced by forbidden pairs and channel saturation.

    ``assigned`` maps already-placed users to their channel; those users and
    every user whose admissible channel set shrinks to one are returned with
    ``x[u, c*] = 1`` and ``x[u, c] = 0`` elsewhere.
    """
    U, C = inst.num_users, inst.num_channels
    forbidden = set(forbidden)
    placed = dict(assigned or {})
    while True:
        load = np.bincount(list(placed.values()), minlength=C) if placed else np.zeros(C, dtype=int)
        changed = False
        for u in range(U):
            if u in placed:
                continue
            opts = [c for c in range(C) if (u, c) not in forbidden
                    and (inst.capacities is None or load[c] < inst.capacities[c])]
            if not opts:
                raise InfeasibleInstanceError(f"user {u} has no admissible channel")
            if len(opts) == 1:
                placed[u] = opts[0]
                load[opts[0]] += 1
                changed = True
        if not changed:
            break
    return {(u, c): int(c == placed[u]) for u in sorted(placed) for c in range(C)}


def fix_bits(ising: IsingInstance, layout: VariableLayout, bits: Mapping[tuple[int, int], int]):
    entries = []
    for (u, c), x in sorted(bits.items()):
        i = layout.index(u, c)
        if i in set(ising.active):
            ising, e = fix_spin(ising, i, 1 - 2 * x)
            entries.append(e)
    return ising, entries


def heuristic_freeze(ising: IsingInstance, cfg: FreezeConfig) -> tuple[IsingInstance, list[Fix], dict[int, float]]:
    """Fix spins whose annealing magnetization reaches ``cfg.threshold``."""
    samples = []
    for k in range(cfg.runs):
        seed = int(np.random.SeedSequence([cfg.seed, k]).generate_state(1)[0])
        z, _ = simulated_annealing(ising, n_sweeps=cfg.sweeps, seed=seed)
        samples.append(z)
    mags = {i: sum(z[i] for z in samples) / cfg.runs for i in ising.active}
    entries = []
    for i in ising.active:
        m = mags[i]
        if abs(m) >= cfg.threshold:
            ising, e = fix_spin(ising, i, 1 if m > 0 else -1, heuristic=True)
            entries.append(e)
    return ising, entries, mags


def presolve_pipeline(ising: IsingInstance, cfg: PresolveConfig,
                      wireless: Optional[WirelessContext] = None) -> tuple[IsingInstance, EliminationRecord, dict]:
    """Deterministic rules to a joint fixpoint, then optional freezing.

    Returns the reduced model, the combined record and a summary dict.
    """
    record = EliminationRecord()
    counts = {"isolated": 0, "persistency": 0, "wireless_prune": 0, "frozen": 0}
    if cfg.enable_wireless_prune and wireless is not None:
        bits = wireless_prune(wireless.instance, wireless.forbidden, wireless.assigned)
        ising, entries = fix_bits(ising, wireless.layout, bits)
        record.extend(entries)
        counts["wireless_prune"] += len(entries)
    while True:
        before = len(record)
        if cfg.enable_persistency:
            ising, entries = reduce_persistency(ising)
            record.extend(entries)
            counts["persistency"] += len(entries)
        if cfg.enable_isolated:
            ising, entries = reduce_isolated(ising)
            record.extend(entries)
            counts["isolated"] += len(entries)
        if len(record) == before:
            break
    if cfg.freeze is not None:
        ising, entries, _ = heuristic_freeze(ising, cfg.freeze)
        record.extend(entries)
        counts["frozen"] = len(entries)
    summary = dict(counts, frozen_spins=[e.index for e in record if getattr(e, "heuristic", False)],
                   residual_size=ising.num_active)
    return ising, record, summary


def summary_json(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True)


class Presolver(TransformerMixin, BaseEstimator):
    """Learn an elimination record on ``fit``; replay it with ``transform``.

    ``inverse_transform`` lifts a spin assignment of the reduced model back
    to every original index.
    """

    def __init__(self, isolated=True, persistency=True, freeze=None):
        self.isolated = isolated
        self.persistency = persistency
        self.freeze = freeze

    def fit(self, X, y=None):
        ising = check_ising(X)
        cfg = PresolveConfig(self.isolated, self.persistency, False, self.freeze)
        self.reduced_, self.record_, self.summary_ = presolve_pipeline(ising, cfg)
        return self

    def transform(self, X):
        check_is_fitted(self, "record_")
        ising = check_ising(X)
        for e in self.record_:
            if isinstance(e, Fix):
                ising, _ = fix_spin(ising, e.index, e.sign, e.heuristic)
            else:
                ising, _ = merge_pair(ising, e.kept, e.removed, e.sign)
        return ising

    def inverse_transform(self, X):
        check_is_fitted(self, "record_")
        return back_substitute(self.record_, X)
