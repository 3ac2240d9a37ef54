"""Independent reference implementations used only by the tests.

Everything here is written from the textbook definitions with dense arrays
and itertools so it shares no code path with the package under test.
"""

import itertools

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def all_bits(n):
    return [np.array(b) for b in itertools.product((0, 1), repeat=n)]


def qubo_energy(n, quad, lin, const, x):
    """Sum of terms straight from the polynomial."""
    e = const
    for i in range(n):
        e += lin[i] * x[i]
    for (i, j), v in quad.items():
        e += v * x[i] * x[j]
    return e


def ising_energy(h, J, const, z):
    e = const
    for i, v in h.items():
        e += v * z[i]
    for (i, j), v in J.items():
        e += v * z[i] * z[j]
    return e


def op_on(n, ops):
    """Kronecker product with ``ops[q]`` on qubit ``q``; qubit 0 is the least significant bit."""
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def expm_hermitian(H, t):
    """``exp(-i t H)`` through an eigendecomposition."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * t * w)) @ V.conj().T


def dense_cost(n, h, J, const, qubits):
    """Diagonal of the cost Hamiltonian with qubit ``k`` carrying spin ``qubits[k]``."""
    H = const * np.eye(2**n, dtype=complex)
    pos = {g: k for k, g in enumerate(qubits)}
    for i, v in h.items():
        H += v * op_on(n, {pos[i]: Z})
    for (i, j), v in J.items():
        H += v * op_on(n, {pos[i]: Z, pos[j]: Z})
    return H


def dense_xy_hamiltonian(n, edges):
    H = np.zeros((2**n, 2**n), dtype=complex)
    for a, b in edges:
        H += 0.5 * (op_on(n, {a: X, b: X}) + op_on(n, {a: Y, b: Y}))
    return H


def dense_transverse(n, pauli):
    return sum(op_on(n, {q: pauli}) for q in range(n))


def brute_min(h, J, const, active):
    best, arg = np.inf, None
    for s in itertools.product((1, -1), repeat=len(active)):
        z = dict(zip(active, s))
        e = ising_energy(h, J, const, z)
        if e < best - 1e-12:
            best, arg = e, z
    return best, arg


def all_minimizers(h, J, const, active, tol=1e-9):
    es = []
    for s in itertools.product((1, -1), repeat=len(active)):
        z = dict(zip(active, s))
        es.append((ising_energy(h, J, const, z), z))
    lo = min(e for e, _ in es)
    return lo, [z for e, z in es if e <= lo + tol]


def assignment_cost(num_channels, pairs, weights, channels):
    """Interference of a channel vector straight from the definition."""
    total = 0.0
    for (u, v), w in zip(pairs, weights):
        if channels[u] == channels[v]:
            total += w[channels[u]] if np.ndim(w) else w
    return total


def enumerate_assignments(num_users, num_channels, pairs, weights, capacities=None):
    out = []
    for ch in itertools.product(range(num_channels), repeat=num_users):
        if capacities is not None and any(ch.count(c) > capacities[c] for c in range(num_channels)):
            continue
        out.append((assignment_cost(num_channels, pairs, weights, ch), ch))
    return out
