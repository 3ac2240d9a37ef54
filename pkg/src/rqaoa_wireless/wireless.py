"""Interference-aware channel assignment: instances, penalty QUBO, decoding.

Assignment bit ``x[u, c]`` lives on qubit ``u * C + c`` (0-based); capacity
slack bits follow after all ``U * C`` assignment bits, channel-major.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ising import QuboInstance


class InfeasibleInstanceError(ValueError):
    """Total channel capacity is below the number of users, or a user has no channel left."""


class PenaltyConfigError(ValueError):
    pass


class DecodeError(ValueError):
    pass


@dataclass
class ChannelAssignmentInstance:
    """``U`` users, ``C`` channels and non-negative pairwise interference.

    ``weights`` has shape ``(m,)`` for channel-independent interference or
    ``(m, C)`` for per-channel interference, aligned with the rows of
    ``pairs`` (``u < v``).
    """

    num_users: int
    num_channels: int
    pairs: np.ndarray = None
    weights: np.ndarray = None
    capacities: Optional[np.ndarray] = None
    seed: Optional[int] = None
    metadata: str = ""

    def __post_init__(self):
        if self.num_users < 1 or self.num_channels < 1:
            raise ValueError("need at least one user and one channel")
        pairs = np.zeros((0, 2), dtype=np.int64) if self.pairs is None else np.asarray(self.pairs, dtype=np.int64)
        pairs = pairs.reshape(-1, 2)
        if self.weights is None:
            weights = np.zeros(len(pairs))
        else:
            weights = np.asarray(self.weights, dtype=float)
        if weights.shape[0] != len(pairs) or weights.ndim not in (1, 2):
            raise ValueError("weights must align with pairs")
        if weights.ndim == 2 and weights.shape[1] != self.num_channels:
            raise ValueError("per-channel weights need one column per channel")
        if np.any(weights < 0):
            raise ValueError("interference weights must be non-negative")
        if len(pairs):
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise ValueError("self-pairs are not allowed")
            if pairs.min() < 0 or pairs.max() >= self.num_users:
                raise ValueError("pair index out of range")
            pairs = np.sort(pairs, axis=1)
            # merge duplicates so every unordered pair appears once
            key = pairs[:, 0] * self.num_users + pairs[:, 1]
            uniq, inv = np.unique(key, return_inverse=True)
            if len(uniq) != len(key):
                merged = np.zeros((len(uniq),) + weights.shape[1:])
                np.add.at(merged, inv, weights)
                weights = merged
                pairs = np.stack([uniq // self.num_users, uniq % self.num_users], axis=1)
            else:
                order = np.argsort(key, kind="stable")
                pairs, weights = pairs[order], weights[order]
        self.pairs, self.weights = pairs, weights
        if self.capacities is not None:
            caps = np.asarray(self.capacities, dtype=np.int64)
            if caps.shape != (self.num_channels,) or np.any(caps < 0):
                raise ValueError("capacities must be one non-negative count per channel")
            if caps.sum() < self.num_users:
                raise InfeasibleInstanceError(
                    f"total capacity {caps.sum()} below {self.num_users} users"
                )
            self.capacities = caps

    @property
    def per_channel(self) -> bool:
        return self.weights.ndim == 2

    def channel_weights(self) -> np.ndarray:
        """Weights as an ``(m, C)`` array regardless of storage form."""
        if self.per_channel:
            return self.weights
        return np.repeat(self.weights[:, None], self.num_channels, axis=1)

    def weighted_degree(self) -> np.ndarray:
        """Per-user ``sum_v w_uv`` (max over channels for per-channel weights)."""
        W = self.channel_weights()
        deg = np.zeros((self.num_users, self.num_channels))
        np.add.at(deg, self.pairs[:, 0], W)
        np.add.at(deg, self.pairs[:, 1], W)
        return deg.max(axis=1) if len(deg) else deg

    def adjacency(self) -> list[list[tuple[int, np.ndarray]]]:
        """Neighbor lists ``adj[u] = [(v, w_uv_per_channel), ...]``."""
        W = self.channel_weights()
        adj = [[] for _ in range(self.num_users)]
        for (u, v), w in zip(self.pairs.tolist(), W):
            if np.any(w > 0):
                adj[u].append((v, w))
                adj[v].append((u, w))
        return adj

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        d = {"num_users": int(self.num_users), "num_channels": int(self.num_channels)}
        if self.capacities is not None:
            d["capacities"] = [int(k) for k in self.capacities]
        if self.per_channel:
            d["per_channel_weights"] = [
                [int(u), int(v), c, float(self.weights[e, c])]
                for e, (u, v) in enumerate(self.pairs)
                for c in range(self.num_channels)
                if self.weights[e, c] != 0
            ]
        else:
            d["weights"] = [[int(u), int(v), float(w)] for (u, v), w in zip(self.pairs, self.weights)]
        d["seed"] = self.seed
        d["metadata"] = self.metadata
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelAssignmentInstance":
        U, C = int(d["num_users"]), int(d["num_channels"])
        if "per_channel_weights" in d:
            acc = {}
            for u, v, c, w in d["per_channel_weights"]:
                key = (min(int(u), int(v)), max(int(u), int(v)))
                acc.setdefault(key, np.zeros(C))[int(c)] += float(w)
            pairs = np.array(list(acc), dtype=np.int64).reshape(-1, 2)
            weights = np.array(list(acc.values())).reshape(-1, C)
        else:
            rows = d.get("weights", [])
            pairs = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
            weights = np.array([float(r[2]) for r in rows])
        return cls(U, C, pairs, weights, d.get("capacities"), d.get("seed"), d.get("metadata", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, s: str) -> "ChannelAssignmentInstance":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class PenaltyConfig:
    one_hot_A: float
    capacity_B: float = 0.0

    def __post_init__(self):
        if not self.one_hot_A > 0:
            raise PenaltyConfigError("one-hot penalty A must be positive")
        if self.capacity_B < 0:
            raise PenaltyConfigError("capacity penalty B must be non-negative")


@dataclass
class VariableLayout:
    """Qubit indices of assignment bits and capacity slack bits."""

    num_users: int
    num_channels: int
    slack_widths: tuple[int, ...] = ()
    slack_index: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def num_assignment(self) -> int:
        return self.num_users * self.num_channels

    @property
    def n(self) -> int:
        return self.num_assignment + sum(self.slack_widths)

    def index(self, u: int, c: int) -> int:
        return u * self.num_channels + c

    def blocks(self) -> list[list[int]]:
        """Per-user qubit blocks (one-hot groups)."""
        C = self.num_channels
        return [list(range(u * C, (u + 1) * C)) for u in range(self.num_users)]


def _slack_width(K: int) -> int:
    return math.ceil(math.log2(K + 1))


def build_qubo(inst: ChannelAssignmentInstance, pen: PenaltyConfig) -> tuple[QuboInstance, VariableLayout]:
    """Penalty QUBO: interference + A * one-hot + B * capacity (with slack bits)."""
    if pen.capacity_B > 0 and inst.capacities is None:
        raise PenaltyConfigError("capacity penalty B > 0 needs per-channel capacities")
    U, C = inst.num_users, inst.num_channels
    layout = VariableLayout(U, C)
    if pen.capacity_B > 0:
        widths = tuple(_slack_width(int(k)) for k in inst.capacities)
        nxt = U * C
        for c, L in enumerate(widths):
            for ell in range(L):
                layout.slack_index[(c, ell)] = nxt
                nxt += 1
        layout.slack_widths = widths
    n = layout.n
    A = pen.one_hot_A
    linear = np.zeros(n)
    quad: dict[tuple[int, int], float] = {}

    def add(i, j, v):
        if v == 0:
            return
        key = (i, j) if i < j else (j, i)
        quad[key] = quad.get(key, 0.0) + v

    offset = A * U
    for u in range(U):
        for c in range(C):
            linear[layout.index(u, c)] -= A
            for d in range(c + 1, C):
                add(layout.index(u, c), layout.index(u, d), 2 * A)
    W = inst.channel_weights()
    for (u, v), w in zip(inst.pairs.tolist(), W):
        for c in range(C):
            add(layout.index(u, c), layout.index(v, c), float(w[c]))
    if pen.capacity_B > 0:
        B = pen.capacity_B
        for c in range(C):
            K = int(inst.capacities[c])
            terms = [(layout.index(u, c), 1.0) for u in range(U)]
            terms += [(layout.slack_index[(c, ell)], float(2**ell)) for ell in range(layout.slack_widths[c])]
            # B (sum a_v v - K)^2 with v^2 = v
            for a_idx, (i, a) in enumerate(terms):
                linear[i] += B * (a * a - 2 * K * a)
                for j, b in terms[a_idx + 1:]:
                    add(i, j, 2 * B * a * b)
            offset += B * K * K
    return QuboInstance(n, quad, linear, offset), layout


def decode(x, layout: VariableLayout) -> np.ndarray:
    """Assignment matrix from a bit vector or a ``"0101"`` string (index 0 first)."""
    if isinstance(x, str):
        x = [int(b) for b in x]
    x = np.asarray(x, dtype=np.int64).ravel()
    if x.shape[0] != layout.n:
        raise DecodeError(f"bitstring of length {x.shape[0]}, layout expects {layout.n}")
    return x[: layout.num_assignment].reshape(layout.num_users, layout.num_channels).copy()


def encode(X, layout: VariableLayout) -> np.ndarray:
    """Assignment bits of ``X`` followed by zero slack bits."""
    x = np.zeros(layout.n, dtype=np.int64)
    x[: layout.num_assignment] = np.asarray(X, dtype=np.int64).ravel()
    return x


def channels_to_matrix(channels, num_channels: int) -> np.ndarray:
    channels = np.asarray(channels, dtype=np.int64)
    X = np.zeros((len(channels), num_channels), dtype=np.int64)
    X[np.arange(len(channels)), channels] = 1
    return X


def matrix_to_channels(X) -> np.ndarray:
    """Channel per user; ``-1`` where the row is not one-hot."""
    X = np.asarray(X)
    ch = X.argmax(axis=1)
    ch[X.sum(axis=1) != 1] = -1
    return ch


@dataclass
class FeasibilityReport:
    over_assigned: list[int]
    unassigned: list[int]
    capacity_excess: dict[int, int]

    @property
    def feasible(self) -> bool:
        return not (self.over_assigned or self.unassigned or self.capacity_excess)


def check_feasibility(X, inst: ChannelAssignmentInstance) -> FeasibilityReport:
    X = np.asarray(X)
    if X.shape != (inst.num_users, inst.num_channels):
        raise ValueError(f"assignment shape {X.shape} does not match instance")
    rows = X.sum(axis=1)
    excess = {}
    if inst.capacities is not None:
        load = X.sum(axis=0)
        excess = {int(c): int(load[c] - inst.capacities[c]) for c in range(inst.num_channels) if load[c] > inst.capacities[c]}
    return FeasibilityReport(
        over_assigned=[int(u) for u in np.flatnonzero(rows > 1)],
        unassigned=[int(u) for u in np.flatnonzero(rows == 0)],
        capacity_excess=excess,
    )


def objective_value(X, inst: ChannelAssignmentInstance) -> float:
    X = np.asarray(X, dtype=float)
    if not len(inst.pairs):
        return 0.0
    W = inst.channel_weights()
    same = X[inst.pairs[:, 0]] * X[inst.pairs[:, 1]]
    return float(np.sum(W * same))


def incremental_cost(u: int, X, adj) -> np.ndarray:
    """Interference user ``u`` would add on each channel given rows of ``X``."""
    cost = np.zeros(X.shape[1])
    for v, w in adj[u]:
        cost += w * X[v]
    return cost


def repair(X, inst: ChannelAssignmentInstance) -> np.ndarray:
    """Make ``X`` feasible with minimal local changes.

    Users that violate one-hot, then users sitting on over-capacity
    channels, are placed on the capacity-feasible channel with least added
    interference; ties go to the least-loaded channel, then the lowest index.
    """
    X = np.array(X, dtype=np.int64)
    U, C = inst.num_users, inst.num_channels
    caps = inst.capacities
    if caps is not None and caps.sum() < U:
        raise InfeasibleInstanceError("total capacity below number of users")
    if check_feasibility(X, inst).feasible:
        return X
    adj = inst.adjacency()
    bad = [u for u in range(U) if X[u].sum() != 1]
    for u in bad:
        X[u] = 0
    if caps is not None:
        load = X.sum(axis=0)
        for c in range(C):
            while load[c] > caps[c]:
                # evict the user on c that costs most there
                members = np.flatnonzero(X[:, c])
                costs = [incremental_cost(v, X, adj)[c] for v in members]
                v = int(members[int(np.argmax(costs))])
                X[v, c] = 0
                load[c] -= 1
                bad.append(v)
    for u in sorted(bad):
        load = X.sum(axis=0)
        cost = incremental_cost(u, X, adj)
        allowed = [c for c in range(C) if caps is None or load[c] < caps[c]]
        if not allowed:
            raise InfeasibleInstanceError(f"no channel with spare capacity for user {u}")
        c = min(allowed, key=lambda c: (cost[c], load[c], c))
        X[u, c] = 1
    return X


def auto_penalty(inst: ChannelAssignmentInstance, capacity_B: float = 0.0) -> PenaltyConfig:
    deg = inst.weighted_degree()
    A = 1.0 + float(deg.max()) if len(deg) else 1.0
    return PenaltyConfig(A, capacity_B)


# -- generators ------------------------------------------------------------


def generate_random(num_users: int, num_channels: int, seed: int, max_weight: int = 5) -> ChannelAssignmentInstance:
    """Channel-independent integer weights drawn uniformly from ``0..max_weight``."""
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(num_users, k=1)
    w = rng.integers(0, max_weight + 1, size=len(iu)).astype(float)
    pairs = np.stack([iu, iv], axis=1)
    return ChannelAssignmentInstance(
        num_users, num_channels, pairs, w, None, seed,
        f"random U={num_users} C={num_channels} w in 0..{max_weight}",
    )


def generate_demo(seed: int) -> ChannelAssignmentInstance:
    inst = generate_random(4, 4, seed)
    inst.metadata = "demo U=4 C=4 integer weights 0..5"
    return inst


@dataclass(frozen=True)
class HotspotParams:
    ref_distance: float = 1.0
    min_distance: float = 1.0
    pathloss_exponent: float = 3.5
    shadowing_db: float = 6.0
    area_side: float = 100.0
    num_hotspots: Optional[int] = None
    position_spread: float = 5.0
    weight_floor: float = 1e-3

    def validate(self):
        if self.pathloss_exponent <= 0:
            raise ValueError("pathloss exponent must be positive")
        if self.area_side <= 0:
            raise ValueError("area side must be positive")
        if self.ref_distance <= 0 or self.min_distance <= 0:
            raise ValueError("distances must be positive")
        if self.position_spread < 0 or self.shadowing_db < 0 or self.weight_floor < 0:
            raise ValueError("spread, shadowing and floor must be non-negative")
        if self.num_hotspots is not None and self.num_hotspots < 1:
            raise ValueError("need at least one hotspot")


def hotspot_positions(num_users: int, params: HotspotParams, rng: np.random.Generator) -> np.ndarray:
    k = params.num_hotspots or math.ceil(num_users / 8)
    centers = rng.uniform(0.0, params.area_side, size=(k, 2))
    owner = rng.integers(0, k, size=num_users)
    return centers[owner] + rng.normal(0.0, params.position_spread, size=(num_users, 2))


def hotspot_weights(pos: np.ndarray, params: HotspotParams, rng: np.random.Generator):
    """Pathloss-plus-shadowing weights for all pairs above the floor."""
    iu, iv = np.triu_indices(len(pos), k=1)
    d = np.linalg.norm(pos[iu] - pos[iv], axis=1)
    chi = rng.normal(0.0, params.shadowing_db, size=len(iu))
    w = (np.maximum(d, params.min_distance) / params.ref_distance) ** (-params.pathloss_exponent)
    w = w * 10.0 ** (chi / 10.0)
    keep = w >= params.weight_floor if params.weight_floor > 0 else w > 0
    return np.stack([iu[keep], iv[keep]], axis=1), w[keep]


def generate_hotspot(num_users: int, num_channels: int, params: HotspotParams = None, seed: int = 0) -> ChannelAssignmentInstance:
    params = params or HotspotParams()
    params.validate()
    if num_users < 1 or num_channels < 1:
        raise ValueError("need at least one user and one channel")
    rng = np.random.default_rng(seed)
    pos = hotspot_positions(num_users, params, rng)
    pairs, w = hotspot_weights(pos, params, rng)
    return ChannelAssignmentInstance(
        num_users, num_channels, pairs, w, None, seed,
        f"hotspot U={num_users} C={num_channels} {params}",
    )
