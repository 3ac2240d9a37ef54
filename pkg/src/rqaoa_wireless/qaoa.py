"""Depth-p QAOA on a dense state vector with a derivative-free outer loop."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import statevector as sv
from .ising import IsingInstance
from .statevector import MixerKind, MixerSpec, TooManyQubitsError

INIT_STATES = ("plus", "onehot_basis", "onehot_uniform")


@dataclass
class QaoaParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        self.gammas = tuple(float(g) for g in self.gammas)
        self.betas = tuple(float(b) for b in self.betas)
        if len(self.gammas) != len(self.betas) or not self.gammas:
            raise ValueError("need p >= 1 gammas and as many betas")

    @property
    def depth(self) -> int:
        return len(self.gammas)

    @classmethod
    def from_vector(cls, x) -> "QaoaParams":
        x = np.asarray(x, dtype=float)
        p = len(x) // 2
        return cls(x[:p], x[p:])

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas)


@dataclass
class OptimizerConfig:
    depth: int = 1
    mixer: MixerKind = MixerKind.TRANSVERSE_X
    init_state: str = "plus"
    restarts: int = 3
    max_evaluations: int = 200
    gamma_range: tuple[float, float] = (0.0, np.pi / 2)
    beta_range: tuple[float, float] = (0.0, np.pi / 2)
    normalize_gamma: bool = True
    """Divide ``gamma_range`` by the instance's largest |coefficient| before sampling."""
    seed: int = 0
    xatol: float = 1e-4
    fatol: float = 1e-6
    simplex_scale: float = 0.25
    """Initial simplex edge as a fraction of each angle's sampling range."""

    def __post_init__(self):
        self.mixer = MixerKind(self.mixer)
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.restarts < 1 or self.max_evaluations < 1:
            raise ValueError("restarts and max_evaluations must be at least 1")
        if self.init_state not in INIT_STATES:
            raise ValueError(f"init_state must be one of {INIT_STATES}")


@dataclass
class CircuitLayout:
    """Qubit ``k`` carries spin ``qubits[k]``; ``blocks`` hold qubit positions.

    ``block_weights[b]`` is the Hamming weight (number of ``x = 1`` bits) the
    constraint-preserving initial state places in block ``b``.
    """

    qubits: tuple[int, ...]
    blocks: list[list[int]] = field(default_factory=list)
    block_weights: list[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.qubits)

    @classmethod
    def for_instance(cls, ising: IsingInstance, groups: Sequence[Sequence[int]] = None,
                     fixed: Mapping[int, int] = None) -> "CircuitLayout":
        """Layout over the active spins of ``ising``.

        ``groups`` are one-hot groups of global spin indices. A group's
        target weight is one minus the members already fixed to ``x = 1``
        (``z = -1``) in ``fixed``, clipped to the number of active members.
        """
        qubits = tuple(ising.active)
        pos = {g: k for k, g in enumerate(qubits)}
        fixed = fixed or {}
        blocks, weights = [], []
        for grp in groups or []:
            members = [pos[g] for g in grp if g in pos]
            if not members:
                continue
            ones = sum(1 for g in grp if fixed.get(g) == -1)
            blocks.append(sorted(members))
            weights.append(int(min(max(1 - ones, 0), len(members))))
        return cls(qubits, blocks, weights)

    def mixer_spec(self, kind: MixerKind) -> MixerSpec:
        kind = MixerKind(kind)
        if not kind.is_xy:
            return MixerSpec(kind)
        blocks = [b for b in self.blocks if len(b) >= 2]
        if not blocks:
            # nothing left to exchange; fall back to the identity mixer
            return None
        return MixerSpec(kind, blocks)

    def initial_state(self, mode: str) -> np.ndarray:
        if mode == "plus":
            return sv.init_plus(self.n)
        if not self.blocks:
            raise ValueError("constraint-preserving initial states need blocks")
        return sv.dicke_superposition(self.n, self.blocks, self.block_weights, uniform=mode == "onehot_uniform")

    def feasible_mass(self, psi: np.ndarray) -> float:
        return sv.block_weight_mass(psi, self.blocks, self.block_weights)


class QaoaCircuit:
    """Cached cost diagonal, mixer and initial state for one instance."""

    def __init__(self, ising: IsingInstance, layout: CircuitLayout, config: OptimizerConfig):
        if layout.n > sv.MAX_QUBITS:
            raise TooManyQubitsError(f"{layout.n} qubits exceed the simulator cap of {sv.MAX_QUBITS}")
        if layout.n == 0:
            raise ValueError("cannot build a circuit on zero qubits")
        self.ising = ising
        self.layout = layout
        self.config = config
        self.cost = sv.diagonal_cost(ising, layout.qubits)
        self.mixer = layout.mixer_spec(config.mixer)
        self.psi0 = layout.initial_state(config.init_state)

    def state(self, params: QaoaParams) -> np.ndarray:
        psi = self.psi0.copy()
        for g, b in zip(params.gammas, params.betas):
            sv.apply_cost_phase(psi, self.cost, g)
            if self.mixer is not None:
                sv.apply_mixer(psi, self.mixer, b)
        return psi

    def energy(self, params: QaoaParams) -> float:
        return sv.expectation_energy(self.state(params), self.cost)


def prepare_state(ising, layout, params: QaoaParams, config: OptimizerConfig) -> np.ndarray:
    return QaoaCircuit(ising, layout, config).state(params)


def objective(ising, layout, params: QaoaParams, config: OptimizerConfig) -> float:
    return QaoaCircuit(ising, layout, config).energy(params)


@dataclass
class OptimizeResult:
    params: QaoaParams
    value: float
    evaluations: int
    trace: list[tuple[int, int, tuple[float, ...], float]]
    """``(evaluation, restart, parameter vector, value)`` per objective call."""

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            p = self.params.depth
            w.writerow(["evaluation", "restart"] + [f"gamma_{k}" for k in range(p)]
                       + [f"beta_{k}" for k in range(p)] + ["value"])
            for ev, r, x, v in self.trace:
                w.writerow([ev, r, *(repr(t) for t in x), repr(v)])


class _BudgetExhausted(Exception):
    pass


def optimize(ising: IsingInstance, layout: CircuitLayout, config: OptimizerConfig,
             circuit: Optional[QaoaCircuit] = None) -> OptimizeResult:
    """Nelder-Mead from ``config.restarts`` seeded random starts; best-of result.

    Each restart gets at most ``config.max_evaluations`` objective calls. Ties
    between restarts go to the earlier restart.
    """
    circuit = circuit or QaoaCircuit(ising, layout, config)
    rng = np.random.default_rng(config.seed)
    p = config.depth
    g_lo, g_hi = config.gamma_range
    scale = ising.max_abs_coefficient() if config.normalize_gamma else 0.0
    if scale > 0:
        g_lo, g_hi = g_lo / scale, g_hi / scale
    trace = []
    best_x, best_v = None, np.inf
    for r in range(config.restarts):
        x0 = np.concatenate([
            rng.uniform(g_lo, g_hi, size=p),
            rng.uniform(*config.beta_range, size=p),
        ])
        count = 0

        def fun(x):
            nonlocal count, best_x, best_v
            if count >= config.max_evaluations:
                raise _BudgetExhausted
            count += 1
            v = circuit.energy(QaoaParams.from_vector(x))
            trace.append((len(trace), r, tuple(float(t) for t in x), v))
            if v < best_v:
                best_x, best_v = np.array(x, dtype=float), v
            return v

        steps = config.simplex_scale * np.concatenate([
            np.full(p, g_hi - g_lo),
            np.full(p, config.beta_range[1] - config.beta_range[0]),
        ])
        simplex = np.vstack([x0, x0 + np.diag(steps)])
        try:
            minimize(fun, x0, method="Nelder-Mead", options={
                "initial_simplex": simplex,
                "maxfev": config.max_evaluations,
                "xatol": config.xatol,
                "fatol": config.fatol,
            })
        except _BudgetExhausted:
            pass
    return OptimizeResult(QaoaParams.from_vector(best_x), float(best_v), len(trace), trace)


def sample_best(circuit: QaoaCircuit, params: QaoaParams, shots: int, rng: np.random.Generator) -> dict[int, int]:
    """Lowest-energy spin configuration among ``shots`` measurements."""
    draws = np.unique(sv.sample(circuit.state(params), shots, rng))
    b = int(draws[np.argmin(circuit.cost[draws])])
    return {g: 1 - 2 * ((b >> k) & 1) for k, g in enumerate(circuit.layout.qubits)}
