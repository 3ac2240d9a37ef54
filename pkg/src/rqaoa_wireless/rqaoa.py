"""Recursive QAOA: optimize, score correlators, eliminate, recurse, lift."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator

from . import statevector as sv
from ._validation import check_ising
from .ising import EliminationRecord, Fix, IsingInstance, Merge, back_substitute, fix_spin, merge_pair
from .qaoa import CircuitLayout, OptimizerConfig, QaoaCircuit, optimize

logger = logging.getLogger(__name__)

POLICIES = ("hamiltonian_terms", "all_pairs")
EXACT_LIMIT = 22
_TIE_DECIMALS = 12


class InstanceTooLargeError(ValueError):
    pass


@dataclass
class RqaoaConfig:
    n_cutoff: int = 6
    threshold: float = 0.0
    qaoa: OptimizerConfig = field(default_factory=OptimizerConfig)
    shots: Optional[int] = None
    candidate_policy: str = "hamiltonian_terms"
    groups: Optional[list[list[int]]] = None
    """One-hot groups of spin indices, used by XY mixers and one-hot starts."""

    def __post_init__(self):
        if self.n_cutoff < 1:
            raise ValueError("n_cutoff must be at least 1")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if self.candidate_policy not in POLICIES:
            raise ValueError(f"candidate_policy must be one of {POLICIES}")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")


@dataclass(frozen=True)
class Candidate:
    term: tuple[int, ...]
    score: float
    sign: int
    expectation: float

    @property
    def is_pair(self) -> bool:
        return len(self.term) == 2


def _sign(v: float) -> int:
    return -1 if v < 0 else 1


def _estimate(psi, n, pairs, shots, rng):
    if shots is None:
        return sv.all_expectations(sv.probabilities(psi), n, pairs)
    counts = np.bincount(sv.sample(psi, shots, rng), minlength=psi.shape[0]).astype(float)
    return sv.all_expectations(counts / shots, n, pairs)


def score_terms(psi: np.ndarray, ising: IsingInstance, policy: str = "hamiltonian_terms",
                qubits: Sequence[int] = None, shots: Optional[int] = None,
                rng: Optional[np.random.Generator] = None) -> list[Candidate]:
    """Candidates ranked by |expectation|, pairs first on exact ties.

    Scores are compared after rounding to 12 decimals so that analytically
    equal correlators tie deterministically.
    """
    qubits = list(ising.active if qubits is None else qubits)
    pos = {g: k for k, g in enumerate(qubits)}
    if policy == "hamiltonian_terms":
        singles = sorted(ising.fields)
        pairs = sorted(ising.couplings)
    elif policy == "all_pairs":
        singles = list(qubits)
        pairs = [(a, b) for i, a in enumerate(qubits) for b in qubits[i + 1:]]
    else:
        raise ValueError(f"unknown candidate policy {policy!r}")
    single, corr = _estimate(psi, len(qubits), [(pos[a], pos[b]) for a, b in pairs], shots,
                             rng if rng is not None else np.random.default_rng(0))
    out = [Candidate((a, b), abs(corr[(pos[a], pos[b])]), _sign(corr[(pos[a], pos[b])]), corr[(pos[a], pos[b])])
           for a, b in pairs]
    out += [Candidate((i,), abs(float(single[pos[i]])), _sign(single[pos[i]]), float(single[pos[i]]))
            for i in singles]
    out.sort(key=lambda c: (-round(c.score, _TIE_DECIMALS), 0 if c.is_pair else 1, c.term))
    return out


@dataclass
class RoundResult:
    ising: IsingInstance
    entry: Union[Fix, Merge]
    info: dict


def _fixed_spins(record) -> dict[int, int]:
    return {e.index: e.sign for e in record if isinstance(e, Fix)}


def rqaoa_round(ising: IsingInstance, config: RqaoaConfig, round_index: int = 0,
                prior: Sequence = ()) -> Optional[RoundResult]:
    """One elimination; ``None`` when no candidate reaches the threshold.

    ``prior`` holds entries already applied (used for one-hot block targets).
    """
    layout = CircuitLayout.for_instance(ising, config.groups, _fixed_spins(prior))
    qcfg = replace(config.qaoa, seed=int(np.random.SeedSequence([config.qaoa.seed, round_index]).generate_state(1)[0]))
    circuit = QaoaCircuit(ising, layout, qcfg)
    res = optimize(ising, layout, qcfg, circuit)
    psi = circuit.state(res.params)
    rng = np.random.default_rng([config.qaoa.seed, round_index, 1])
    cands = score_terms(psi, ising, config.candidate_policy, layout.qubits, config.shots, rng)
    if not cands:
        return None
    top = cands[0]
    if top.score < config.threshold:
        return None
    if round(top.score, _TIE_DECIMALS) == 0:
        pairs = [c for c in cands if c.is_pair]
        pick = min(pairs or cands, key=lambda c: c.term)
        top = Candidate(pick.term, pick.score, 1, pick.expectation)
        logger.warning("all correlators vanish; eliminating %s with sign +1", top.term)
    if top.is_pair:
        keep, remove = top.term
        reduced, entry = merge_pair(ising, keep, remove, top.sign)
    else:
        reduced, entry = fix_spin(ising, top.term[0], top.sign)
    info = {
        "round": round_index,
        "n_active": ising.num_active,
        "term": list(top.term),
        "score": top.score,
        "sign": top.sign,
        "F_p": res.value,
        "evaluations": res.evaluations,
        "params": list(res.params.to_vector()),
    }
    if layout.blocks and config.qaoa.init_state != "plus":
        info["feasible_mass"] = layout.feasible_mass(psi)
    return RoundResult(reduced, entry, info)


def exact_core_solve(ising: IsingInstance, max_size: int = EXACT_LIMIT) -> dict[int, int]:
    """Exhaustive minimizer; ties go to the lowest basis index (``z = +1`` first).

    Spins that appear in no term are set to ``+1`` without enumeration.
    """
    touched = set(ising.fields)
    for i, j in ising.couplings:
        touched.update((i, j))
    free = [i for i in ising.active if i not in touched]
    live = [i for i in ising.active if i in touched]
    if len(live) > max_size:
        raise InstanceTooLargeError(f"{len(live)} coupled spins exceed exact-solve limit {max_size}")
    z = {i: 1 for i in free}
    if live:
        E = sv.diagonal_cost(ising, live)
        b = int(np.argmin(E))
        z.update({g: 1 - 2 * ((b >> k) & 1) for k, g in enumerate(live)})
    return z


@dataclass
class RqaoaResult:
    assignment: dict[int, int]
    energy: float
    record: EliminationRecord
    trace: list[dict]
    core: IsingInstance
    core_assignment: dict[int, int]

    def trace_jsonl(self) -> str:
        keys = ("round", "n_active", "term", "score", "sign", "F_p")
        return "".join(json.dumps({k: r[k] for k in keys}) + "\n" for r in self.trace)


def run_rqaoa(ising: IsingInstance, config: RqaoaConfig, prior: Sequence = ()) -> RqaoaResult:
    original = ising
    record = EliminationRecord()
    trace = []
    r = 0
    while ising.num_active > config.n_cutoff:
        out = rqaoa_round(ising, config, r, list(prior) + list(record))
        if out is None:
            logger.info("no term above threshold %.3g at %d spins; stopping", config.threshold, ising.num_active)
            break
        ising = out.ising
        record.append(out.entry)
        trace.append(out.info)
        r += 1
    core_z = exact_core_solve(ising, max(config.n_cutoff, EXACT_LIMIT))
    z = back_substitute(record, core_z)
    return RqaoaResult(z, original.energy(z), record, trace, ising, core_z)


class RQAOASolver(BaseEstimator):
    """Estimator wrapper around :func:`run_rqaoa` for Ising instances.

    After ``fit(ising)`` the solution is in ``assignment_`` (spin per index),
    with ``energy_``, ``record_`` and ``trace_``.
    """

    def __init__(self, n_cutoff=6, threshold=0.0, depth=1, mixer="x", init_state="plus",
                 restarts=3, max_evaluations=200, shots=None,
                 candidate_policy="hamiltonian_terms", groups=None, random_state=0):
        self.n_cutoff = n_cutoff
        self.threshold = threshold
        self.depth = depth
        self.mixer = mixer
        self.init_state = init_state
        self.restarts = restarts
        self.max_evaluations = max_evaluations
        self.shots = shots
        self.candidate_policy = candidate_policy
        self.groups = groups
        self.random_state = random_state

    def _config(self) -> RqaoaConfig:
        qaoa = OptimizerConfig(depth=self.depth, mixer=self.mixer, init_state=self.init_state,
                               restarts=self.restarts, max_evaluations=self.max_evaluations,
                               seed=self.random_state)
        return RqaoaConfig(self.n_cutoff, self.threshold, qaoa, self.shots, self.candidate_policy, self.groups)

    def fit(self, X, y=None):
        ising = check_ising(X)
        res = run_rqaoa(ising, self._config())
        self.assignment_ = res.assignment
        self.energy_ = res.energy
        self.record_ = res.record
        self.trace_ = res.trace
        return self

    def fit_predict(self, X, y=None) -> dict[int, int]:
        return self.fit(X).assignment_
