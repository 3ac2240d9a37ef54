"""Hybrid flow: core selection, presolve, quantum core solve, greedy extension."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_instance
from .baselines import GreedyConfig, brute_force, greedy_assign, greedy_extend
from .ising import back_substitute, qubo_to_ising
from .presolve import PresolveConfig, WirelessContext, presolve_pipeline
from .qaoa import CircuitLayout, OptimizerConfig, QaoaCircuit, optimize, sample_best
from .rqaoa import RqaoaConfig, run_rqaoa
from .statevector import MAX_QUBITS, MixerKind
from .wireless import (
    ChannelAssignmentInstance,
    PenaltyConfig,
    auto_penalty,
    build_qubo,
    check_feasibility,
    decode,
    matrix_to_channels,
    objective_value,
    repair,
)

CORE_SOLVERS = ("rqaoa", "qaoa_sample_best", "exact", "greedy")


class PipelineFailure(RuntimeError):
    """The final assignment is infeasible even after repair."""


@dataclass
class PipelineConfig:
    core_size: int = 10
    solver: str = "rqaoa"
    rqaoa: RqaoaConfig = field(default_factory=RqaoaConfig)
    presolve: PresolveConfig = field(default_factory=PresolveConfig)
    penalty: Optional[PenaltyConfig] = None
    greedy: GreedyConfig = field(default_factory=GreedyConfig)
    sample_shots: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.solver not in CORE_SOLVERS:
            raise ValueError(f"solver must be one of {CORE_SOLVERS}")
        if self.core_size < 1:
            raise ValueError("core_size must be at least 1")


@dataclass
class PipelineResult:
    assignment: np.ndarray
    objective: float
    feasible: bool
    repaired: bool
    solver: str
    seed: int
    core_users: list[int]
    n_qubits_core: int
    timings_ms: dict[str, float]
    trace: list[dict] = field(default_factory=list)
    presolve_summary: dict = field(default_factory=dict)


def select_core(inst: ChannelAssignmentInstance, core_size: int) -> list[int]:
    """Users with the largest weighted degree, ties to the lower index."""
    if core_size > inst.num_users:
        raise ValueError("core larger than the user set")
    deg = inst.weighted_degree()
    order = sorted(range(inst.num_users), key=lambda u: (-deg[u], u))
    return order[:core_size]


def restrict_instance(inst: ChannelAssignmentInstance, users: Sequence[int]) -> tuple[ChannelAssignmentInstance, list[int]]:
    """Induced sub-instance; user ``k`` of the result is ``users[k]`` of ``inst``."""
    users = [int(u) for u in users]
    if len(set(users)) != len(users) or any(not 0 <= u < inst.num_users for u in users):
        raise ValueError("invalid user subset")
    local = np.full(inst.num_users, -1, dtype=np.int64)
    local[users] = np.arange(len(users))
    a, b = local[inst.pairs[:, 0]], local[inst.pairs[:, 1]]
    keep = (a >= 0) & (b >= 0)
    pairs = np.stack([a[keep], b[keep]], axis=1)
    caps = inst.capacities
    if caps is not None:
        caps = np.minimum(caps, len(users))
    sub = ChannelAssignmentInstance(
        len(users), inst.num_channels, pairs, inst.weights[keep], caps, inst.seed,
        f"restricted to {len(users)} of {inst.num_users} users",
    )
    return sub, users


def solve_core(sub, cfg: PipelineConfig):
    """Core assignment matrix plus diagnostics for the chosen solver."""
    info = {"trace": [], "presolve": {}, "n_qubits": 0, "t_presolve": 0.0}
    if cfg.solver == "exact":
        return brute_force(sub)[0], info
    if cfg.solver == "greedy":
        return greedy_assign(sub, cfg.greedy), info
    pen = cfg.penalty or auto_penalty(sub)
    qubo, layout = build_qubo(sub, pen)
    ising = qubo_to_ising(qubo)
    info["n_qubits"] = layout.n
    t = time.perf_counter()
    reduced, r0, info["presolve"] = presolve_pipeline(ising, cfg.presolve, WirelessContext(sub, layout))
    info["t_presolve"] = 1e3 * (time.perf_counter() - t)
    rcfg = replace(cfg.rqaoa, qaoa=replace(cfg.rqaoa.qaoa, seed=cfg.seed))
    if rcfg.qaoa.mixer.is_xy or rcfg.qaoa.init_state != "plus":
        rcfg = replace(rcfg, groups=layout.blocks())
    if cfg.solver == "rqaoa":
        res = run_rqaoa(reduced, rcfg, prior=r0)
        z = res.assignment
        info["trace"] = res.trace
    elif reduced.num_active == 0:
        z = {}
    else:
        clayout = CircuitLayout.for_instance(reduced, rcfg.groups, {e.index: e.sign for e in r0 if hasattr(e, "index")})
        circuit = QaoaCircuit(reduced, clayout, rcfg.qaoa)
        opt = optimize(reduced, clayout, rcfg.qaoa, circuit)
        z = sample_best(circuit, opt.params, cfg.sample_shots, np.random.default_rng(cfg.seed))
        info["trace"] = [{"F_p": opt.value, "evaluations": opt.evaluations}]
    z = back_substitute(r0, z)
    bits = [(1 - z.get(i, 1)) // 2 for i in range(layout.n)]
    return decode(bits, layout), info


def run_pipeline(inst: ChannelAssignmentInstance, cfg: PipelineConfig) -> tuple[np.ndarray, PipelineResult]:
    t_start = time.perf_counter()
    core_users = select_core(inst, min(cfg.core_size, inst.num_users))
    sub, users = restrict_instance(inst, sorted(core_users))
    if cfg.solver in ("rqaoa", "qaoa_sample_best") and sub.num_users * sub.num_channels > MAX_QUBITS:
        raise ValueError(f"core of {sub.num_users}x{sub.num_channels} exceeds the {MAX_QUBITS}-qubit simulator cap")
    t0 = time.perf_counter()
    X_core, info = solve_core(sub, cfg)
    t1 = time.perf_counter()
    repaired = not check_feasibility(X_core, sub).feasible
    if repaired:
        X_core = repair(X_core, sub)
    X = np.zeros((inst.num_users, inst.num_channels), dtype=np.int64)
    X[users] = X_core
    X = greedy_extend(inst, X, cfg.greedy, core_users=users)
    t2 = time.perf_counter()
    feasible = check_feasibility(X, inst).feasible
    if not feasible:
        raise PipelineFailure("final assignment infeasible after repair and extension")
    timings = {
        "presolve": info["t_presolve"],
        "core": 1e3 * (t1 - t0) - info["t_presolve"],
        "extend": 1e3 * (t2 - t1),
        "total": 1e3 * (t2 - t_start),
    }
    return X, PipelineResult(X, objective_value(X, inst), feasible, repaired, cfg.solver, cfg.seed,
                             users, info["n_qubits"], timings, info["trace"], info["presolve"])


# -- metrics ----------------------------------------------------------------


@dataclass
class Deviation:
    value: float
    relative: bool


def delta_norm(c_method: float, c_ref: float) -> Deviation:
    """``|c_method - c_ref| / c_ref``; absolute deviation (flagged) when ``c_ref == 0``."""
    if c_ref == 0:
        return Deviation(abs(c_method - c_ref), False)
    return Deviation(abs(c_method - c_ref) / c_ref, True)


def scaled_ratio(e: float, e_best: float, e_worst: float) -> float:
    if e_worst == e_best:
        return 1.0
    return (e_worst - e) / (e_worst - e_best)


def feasibility_rate(flags: Sequence[bool]) -> float:
    flags = list(flags)
    return sum(bool(f) for f in flags) / len(flags) if flags else math.nan


def summarize(values: Sequence[float]) -> dict:
    """Mean and population standard deviation."""
    vals = [float(v) for v in values]
    if not vals:
        return {"mean": math.nan, "std": math.nan, "count": 0}
    return {"mean": statistics.fmean(vals), "std": statistics.pstdev(vals), "count": len(vals)}


def metrics(results: Sequence[PipelineResult], reference: Sequence[float],
            extremes: Optional[Sequence[tuple[float, float]]] = None) -> dict:
    """Aggregate feasibility, deviation from ``reference`` and, if given, scaled ratios."""
    devs = [delta_norm(r.objective, ref) for r, ref in zip(results, reference)]
    out = {
        "feasibility_rate": feasibility_rate(r.feasible for r in results),
        "delta_norm": summarize([d.value for d in devs if d.relative]),
        "absolute_deviation_count": sum(not d.relative for d in devs),
    }
    if extremes is not None:
        out["scaled_ratio"] = summarize([scaled_ratio(r.objective, lo, hi) for r, (lo, hi) in zip(results, extremes)])
    return out


class HybridPipeline(BaseEstimator):
    """Estimator front-end for :func:`run_pipeline` on channel-assignment instances.

    ``fit_predict(instance)`` returns the channel index of each user.
    """

    def __init__(self, core_size=10, solver="rqaoa", n_cutoff=6, threshold=0.0, depth=1,
                 mixer="x", init_state="plus", restarts=3, max_evaluations=200,
                 penalty_A=None, presolve=True, random_state=0):
        self.core_size = core_size
        self.solver = solver
        self.n_cutoff = n_cutoff
        self.threshold = threshold
        self.depth = depth
        self.mixer = mixer
        self.init_state = init_state
        self.restarts = restarts
        self.max_evaluations = max_evaluations
        self.penalty_A = penalty_A
        self.presolve = presolve
        self.random_state = random_state

    def _config(self) -> PipelineConfig:
        qaoa = OptimizerConfig(depth=self.depth, mixer=MixerKind(self.mixer), init_state=self.init_state,
                               restarts=self.restarts, max_evaluations=self.max_evaluations)
        pre = PresolveConfig(self.presolve, self.presolve)
        pen = PenaltyConfig(self.penalty_A) if self.penalty_A is not None else None
        return PipelineConfig(self.core_size, self.solver, RqaoaConfig(self.n_cutoff, self.threshold, qaoa),
                              pre, pen, seed=self.random_state)

    def fit(self, X, y=None):
        inst = check_instance(X)
        self.assignment_, self.result_ = run_pipeline(inst, self._config())
        self.channels_ = matrix_to_channels(self.assignment_)
        self.objective_ = self.result_.objective
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).channels_
