"""Dense state-vector simulation for QAOA circuits.

Basis index ``b`` stores qubit ``q`` in bit ``q`` (qubit 0 is the least
significant bit); rendered bitstrings put qubit 0 leftmost. Bit 0 is spin
``z = +1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from math import comb
from typing import Sequence

import numba
import numpy as np

from .ising import IsingInstance

MAX_QUBITS = 26


class TooManyQubitsError(ValueError):
    pass


class MixerKind(str, Enum):
    TRANSVERSE_X = "x"
    TRANSVERSE_Y = "y"
    RING_XY = "ring_xy"
    CLIQUE_XY = "clique_xy"
    MATCHING_XY = "matching_xy"
    STAR_XY = "star_xy"

    @property
    def is_xy(self) -> bool:
        return self not in (MixerKind.TRANSVERSE_X, MixerKind.TRANSVERSE_Y)


@dataclass
class MixerSpec:
    kind: MixerKind = MixerKind.TRANSVERSE_X
    blocks: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        self.kind = MixerKind(self.kind)
        self.blocks = [sorted(int(q) for q in b) for b in self.blocks]
        seen = set()
        for b in self.blocks:
            if self.kind.is_xy and len(b) < 2:
                raise ValueError("XY mixers need blocks of at least two qubits")
            if seen.intersection(b) or len(set(b)) != len(b):
                raise ValueError("mixer blocks must be disjoint")
            seen.update(b)
        if self.kind.is_xy and not self.blocks:
            raise ValueError("XY mixers need a block structure")

    def edges(self) -> list[tuple[int, int]]:
        """Two-qubit XY edges in application order (block-major)."""
        if not self.kind.is_xy:
            return []
        out = []
        for b in self.blocks:
            out.extend(_block_edges(self.kind, b))
        return out

    def validate_for(self, n: int):
        for b in self.blocks:
            if b and (b[0] < 0 or b[-1] >= n):
                raise ValueError(f"mixer block {b} outside {n} qubits")


def _block_edges(kind: MixerKind, b: list[int]) -> list[tuple[int, int]]:
    k = len(b)
    if kind is MixerKind.CLIQUE_XY:
        return [(b[i], b[j]) for i in range(k) for j in range(i + 1, k)]
    if kind is MixerKind.STAR_XY:
        return [(b[0], b[j]) for j in range(1, k)]
    ring = [(b[i], b[i + 1]) for i in range(k - 1)]
    if k > 2:
        ring.append((b[0], b[-1]))
    if kind is MixerKind.RING_XY:
        return sorted(ring)
    # matching: even ring edges, then odd ones; an odd ring's closing edge goes last
    first = [(b[i], b[i + 1]) for i in range(0, k - 1, 2)]
    second = [(b[i], b[i + 1]) for i in range(1, k - 1, 2)]
    closing = [(b[0], b[-1])] if k > 2 else []
    if k % 2 == 0:
        return sorted(first) + sorted(second + closing)
    return sorted(first) + sorted(second) + closing


def _check_n(n: int):
    if not 1 <= n <= MAX_QUBITS:
        raise TooManyQubitsError(f"{n} qubits outside supported range 1..{MAX_QUBITS}")


def num_qubits(psi: np.ndarray) -> int:
    n = int(psi.shape[0]).bit_length() - 1
    if psi.ndim != 1 or 1 << n != psi.shape[0]:
        raise ValueError("state length must be a power of two")
    return n


def basis_state(bits: Sequence[int]) -> np.ndarray:
    n = len(bits)
    _check_n(n)
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[sum(int(b) << q for q, b in enumerate(bits))] = 1.0
    return psi


def init_plus(n: int) -> np.ndarray:
    _check_n(n)
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)


def dicke_superposition(n: int, blocks: list[list[int]], weights: list[int], uniform: bool = True) -> np.ndarray:
    """Product over blocks of Hamming-weight-``k`` states.

    ``uniform`` gives equal amplitude over every weight-``k`` pattern of the
    block; otherwise the lowest ``k`` qubits of the block are set. Qubits not
    in any block stay in ``|0>``.
    """
    _check_n(n)
    idx = np.arange(1 << n, dtype=np.int64)
    amp = np.ones(1 << n)
    for b, k in zip(blocks, weights):
        if not 0 <= k <= len(b):
            raise ValueError(f"block weight {k} impossible for block of size {len(b)}")
        w = np.zeros(1 << n, dtype=np.int64)
        for q in b:
            w += (idx >> q) & 1
        if uniform:
            amp *= (w == k) / np.sqrt(comb(len(b), k))
        else:
            target = sum(1 << q for q in b[:k])
            mask = sum(1 << q for q in b)
            amp *= (idx & mask) == target
    covered = sum(1 << q for b in blocks for q in b)
    amp *= (idx & ~covered & ((1 << n) - 1)) == 0
    return amp.astype(np.complex128)


def init_onehot_feasible(layout_or_blocks, mode: str = "basis", n: int = None) -> np.ndarray:
    """One-hot product state over user blocks.

    ``mode="basis"`` puts every user on its first channel;
    ``"uniform_superposition_per_block"`` is the W state of each block.
    """
    blocks = layout_or_blocks.blocks() if hasattr(layout_or_blocks, "blocks") else layout_or_blocks
    if n is None:
        n = layout_or_blocks.n if hasattr(layout_or_blocks, "n") else 1 + max(q for b in blocks for q in b)
    if mode not in ("basis", "uniform_superposition_per_block"):
        raise ValueError(f"unknown initial-state mode {mode!r}")
    return dicke_superposition(n, blocks, [1] * len(blocks), uniform=mode != "basis")


# -- diagonal cost ---------------------------------------------------------


def spin_table(n: int) -> np.ndarray:
    """``(n, 2**n)`` int8 array of ``z_q(b) = 1 - 2 * bit_q(b)``."""
    _check_n(n)
    idx = np.arange(1 << n, dtype=np.int64)
    return np.stack([1 - 2 * ((idx >> q) & 1) for q in range(n)]).astype(np.int8)


def diagonal_cost(ising: IsingInstance, qubits: Sequence[int] = None) -> np.ndarray:
    """Energies of every basis state; ``qubits[k]`` is the spin on qubit ``k``.

    Defaults to the instance's sorted active indices.
    """
    qubits = list(ising.active if qubits is None else qubits)
    n = len(qubits)
    if n == 0:
        return np.full(1, ising.offset)
    _check_n(n)
    pos = {g: k for k, g in enumerate(qubits)}
    idx = np.arange(1 << n, dtype=np.int64)
    zs = [(1 - 2 * ((idx >> q) & 1)).astype(np.float64) for q in range(n)]
    E = np.full(1 << n, ising.offset)
    for i, h in ising.fields.items():
        E += h * zs[pos[i]]
    for (i, j), J in ising.couplings.items():
        E += J * (zs[pos[i]] * zs[pos[j]])
    return E


# -- gate kernels ----------------------------------------------------------


@numba.njit(cache=True)
def _phase(psi, E, gamma):
    for b in range(psi.shape[0]):
        psi[b] *= np.exp(-1j * gamma * E[b])


@numba.njit(cache=True)
def _rotate_all(psi, n, c, s, axis_y):
    dim = psi.shape[0]
    for q in range(n):
        step = 1 << q
        for base in range(0, dim, 2 * step):
            for b0 in range(base, base + step):
                a0 = psi[b0]
                a1 = psi[b0 + step]
                if axis_y:
                    psi[b0] = c * a0 - s * a1
                    psi[b0 + step] = s * a0 + c * a1
                else:
                    psi[b0] = c * a0 - 1j * s * a1
                    psi[b0 + step] = c * a1 - 1j * s * a0


@numba.njit(cache=True)
def _xy_edge(psi, a, b, c, s):
    ma = 1 << a
    mb = 1 << b
    for i in range(psi.shape[0]):
        if (i & ma) != 0 and (i & mb) == 0:
            j = i ^ ma ^ mb
            x = psi[i]
            y = psi[j]
            psi[i] = c * x - 1j * s * y
            psi[j] = c * y - 1j * s * x


def apply_cost_phase(psi: np.ndarray, cost: np.ndarray, gamma: float) -> np.ndarray:
    """``psi * exp(-i gamma E)``, in place; returns ``psi``."""
    if cost.shape != psi.shape:
        raise ValueError("cost diagonal and state have different dimensions")
    _phase(psi, cost, float(gamma))
    return psi


def apply_mixer(psi: np.ndarray, spec: MixerSpec, beta: float) -> np.ndarray:
    """Apply ``exp(-i beta H_M)`` in place; XY kinds as an ordered edge product."""
    n = num_qubits(psi)
    spec.validate_for(n)
    c, s = np.cos(beta), np.sin(beta)
    if spec.kind is MixerKind.TRANSVERSE_X:
        _rotate_all(psi, n, c, s, False)
    elif spec.kind is MixerKind.TRANSVERSE_Y:
        _rotate_all(psi, n, c, s, True)
    else:
        for a, b in spec.edges():
            _xy_edge(psi, a, b, c, s)
    return psi


# -- measurement -----------------------------------------------------------


def probabilities(psi: np.ndarray) -> np.ndarray:
    return psi.real**2 + psi.imag**2


def _z_signs(n: int, q: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    return 1 - 2 * ((idx >> q) & 1)


def expectation_z(psi: np.ndarray, i: int) -> float:
    n = num_qubits(psi)
    p = probabilities(psi).reshape(1 << (n - i - 1), 2, 1 << i)
    return float(p[:, 0, :].sum() - p[:, 1, :].sum())


def expectation_zz(psi: np.ndarray, i: int, j: int) -> float:
    n = num_qubits(psi)
    parity = ((np.arange(1 << n, dtype=np.int64) >> i) ^ (np.arange(1 << n, dtype=np.int64) >> j)) & 1
    return float(probabilities(psi) @ (1 - 2 * parity))


def expectation_energy(psi: np.ndarray, cost: np.ndarray) -> float:
    return float(probabilities(psi) @ cost)


@numba.njit(cache=True)
def _moments(probs, n, pa, pb):
    single = np.zeros(n)
    corr = np.zeros(pa.shape[0])
    for b in range(probs.shape[0]):
        p = probs[b]
        for q in range(n):
            if (b >> q) & 1:
                single[q] -= p
            else:
                single[q] += p
        for k in range(pa.shape[0]):
            if ((b >> pa[k]) ^ (b >> pb[k])) & 1:
                corr[k] -= p
            else:
                corr[k] += p
    return single, corr


def all_expectations(probs: np.ndarray, n: int, pairs) -> tuple[np.ndarray, dict]:
    """``<Z_q>`` for all qubits and ``<Z_a Z_b>`` for the requested pairs."""
    pairs = [tuple(p) for p in pairs]
    arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    single, corr = _moments(np.ascontiguousarray(probs, dtype=np.float64), n, arr[:, 0].copy(), arr[:, 1].copy())
    return single, {p: float(v) for p, v in zip(pairs, corr)}


def sample(psi: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Basis indices of ``shots`` i.i.d. measurements."""
    if shots < 1:
        raise ValueError("need at least one shot")
    p = probabilities(psi)
    p = p / p.sum()
    return rng.choice(p.shape[0], size=shots, p=p)


def bitstring(index: int, n: int) -> str:
    return "".join(str((index >> q) & 1) for q in range(n))


def sample_bitstrings(psi: np.ndarray, shots: int, rng: np.random.Generator) -> list[str]:
    n = num_qubits(psi)
    return [bitstring(int(b), n) for b in sample(psi, shots, rng)]


def block_weight_mass(psi: np.ndarray, blocks: list[list[int]], weights: list[int]) -> float:
    """Probability that every block has its prescribed Hamming weight."""
    n = num_qubits(psi)
    idx = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(1 << n, dtype=bool)
    for b, k in zip(blocks, weights):
        w = np.zeros(1 << n, dtype=np.int64)
        for q in b:
            w += (idx >> q) & 1
        ok &= w == k
    return float(probabilities(psi)[ok].sum())


def dump_amplitudes(psi: np.ndarray) -> str:
    """JSON debug dump (at most 10 qubits)."""
    n = num_qubits(psi)
    if n > 10:
        raise TooManyQubitsError("amplitude dumps are limited to 10 qubits")
    return json.dumps({
        "num_qubits": n,
        "amplitudes": [[bitstring(b, n), float(a.real), float(a.imag)] for b, a in enumerate(psi)],
    })
