import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_min, enumerate_assignments
from rqaoa_wireless.baselines import (
    AnnealingSolver,
    EnumerationTooLargeError,
    ExhaustiveAssigner,
    GreedyAssigner,
    GreedyConfig,
    brute_force,
    greedy_assign,
    greedy_extend,
    objective_range,
    simulated_annealing,
)
from rqaoa_wireless.ising import IsingInstance, qubo_to_ising
from rqaoa_wireless.wireless import (
    ChannelAssignmentInstance,
    InfeasibleInstanceError,
    PenaltyConfig,
    build_qubo,
    channels_to_matrix,
    check_feasibility,
    decode,
    generate_demo,
    generate_random,
    matrix_to_channels,
    objective_value,
)


@st.composite
def instances(draw, max_users=6, capacities=False):
    C = draw(st.integers(1, 3))
    U = draw(st.integers(1, max_users))
    pairs = list(itertools.combinations(range(U), 2))
    w = [draw(st.integers(0, 6)) for _ in pairs]
    caps = None
    if capacities:
        caps = [draw(st.integers(0, U)) for _ in range(C)]
        short = U - sum(caps)
        if short > 0:
            caps[0] += short
    return ChannelAssignmentInstance(U, C, pairs, w, caps)


# -- greedy -----------------------------------------------------------------


def test_greedy_separates_heavy_pair():
    inst = ChannelAssignmentInstance(3, 2, [(0, 1), (0, 2), (1, 2)], [5, 1, 1])
    X = greedy_assign(inst)
    assert objective_value(X, inst) == 1.0
    assert min(c for c, _ in enumerate_assignments(3, 2, inst.pairs, inst.weights)) == 1.0


def test_greedy_zero_weights_use_channel_zero():
    inst = ChannelAssignmentInstance(4, 3)
    assert matrix_to_channels(greedy_assign(inst)).tolist() == [0, 0, 0, 0]


def test_greedy_unit_capacities_spread_users():
    inst = ChannelAssignmentInstance(3, 3, [(0, 1)], [2.0], capacities=[1, 1, 1])
    ch = matrix_to_channels(greedy_assign(inst))
    assert sorted(ch.tolist()) == [0, 1, 2]
    assert objective_value(greedy_assign(inst), inst) == 0.0


def test_greedy_without_room_is_infeasible():
    inst = ChannelAssignmentInstance(3, 2, capacities=[1, 2])
    inst.capacities = np.array([1, 1])
    with pytest.raises(InfeasibleInstanceError):
        greedy_assign(inst)


def test_greedy_orders():
    inst = ChannelAssignmentInstance(3, 2, [(1, 2)], [4.0])
    # by index, user 2 avoids user 1; by degree, users 1 and 2 go first and user 0 takes channel 0
    assert matrix_to_channels(greedy_assign(inst, GreedyConfig("by_index"))).tolist() == [0, 0, 1]
    assert matrix_to_channels(greedy_assign(inst)).tolist() == [0, 0, 1]
    with pytest.raises(ValueError):
        GreedyConfig("random")


def test_greedy_ties_prefer_lower_load_under_capacities():
    inst = ChannelAssignmentInstance(2, 2, capacities=[2, 2])
    assert matrix_to_channels(greedy_assign(inst)).tolist() == [0, 1]


@settings(max_examples=80)
@given(instances(capacities=True))
def test_greedy_always_feasible(inst):
    X = greedy_assign(inst)
    assert check_feasibility(X, inst).feasible


# -- greedy extension -------------------------------------------------------


def test_extend_empty_core_equals_greedy():
    inst = generate_random(7, 3, seed=1)
    empty = np.zeros((7, 3), dtype=int)
    assert np.array_equal(greedy_extend(inst, empty), greedy_assign(inst))


def test_extend_full_core_returns_input():
    inst = generate_random(5, 2, seed=2)
    X = channels_to_matrix([1, 0, 1, 1, 0], 2)
    assert np.array_equal(greedy_extend(inst, X), X)


def test_extend_counts_interference_against_core():
    inst = ChannelAssignmentInstance(3, 2, [(0, 2), (1, 2)], [5.0, 1.0])
    X = np.zeros((3, 2), dtype=int)
    X[0, 0] = X[1, 1] = 1
    out = greedy_extend(inst, X)
    assert out[2].tolist() == [0, 1]


@settings(max_examples=60)
@given(instances(max_users=7), st.data())
def test_extend_never_touches_core_rows(inst, data):
    U, C = inst.num_users, inst.num_channels
    core = data.draw(st.lists(st.integers(0, U - 1), unique=True, max_size=U))
    X = np.zeros((U, C), dtype=int)
    for u in core:
        X[u, data.draw(st.integers(0, C - 1))] = 1
    out = greedy_extend(inst, X, core_users=core)
    assert np.array_equal(out[core], X[core])
    assert check_feasibility(out, inst).feasible


def test_extend_rejects_overfull_core():
    inst = ChannelAssignmentInstance(3, 2, capacities=[1, 2])
    X = np.zeros((3, 2), dtype=int)
    X[0, 0] = X[1, 0] = 1
    with pytest.raises(InfeasibleInstanceError):
        greedy_extend(inst, X)


# -- exhaustive enumeration -------------------------------------------------


def test_brute_force_examples():
    X, cost = brute_force(ChannelAssignmentInstance(1, 3))
    assert X.tolist() == [[1, 0, 0]] and cost == 0.0
    X, cost = brute_force(ChannelAssignmentInstance(2, 2, [(0, 1)], [3.0]))
    assert cost == 0.0 and matrix_to_channels(X).tolist() == [0, 1]


@settings(max_examples=60)
@given(instances(capacities=True))
def test_brute_force_matches_enumeration_oracle(inst):
    X, cost = brute_force(inst)
    table = enumerate_assignments(inst.num_users, inst.num_channels, inst.pairs.tolist(),
                                  inst.weights.tolist(), None if inst.capacities is None else inst.capacities.tolist())
    best = min(c for c, _ in table)
    assert cost == best
    # lexicographically first minimizer
    assert tuple(matrix_to_channels(X).tolist()) == min(ch for c, ch in table if c == best)
    lo, hi = objective_range(inst)
    assert lo == best and hi == max(c for c, _ in table)


def test_brute_force_agrees_with_penalty_qubo():
    for seed in range(4):
        inst = generate_random(4, 3, seed=seed)
        _, cost = brute_force(inst)
        q, layout = build_qubo(inst, PenaltyConfig(40.0))
        ising = qubo_to_ising(q)
        e, z = brute_min(ising.fields, ising.couplings, ising.offset, ising.active)
        assert e == pytest.approx(cost)
        X = decode([(1 - z[i]) // 2 for i in range(layout.n)], layout)
        assert objective_value(X, inst) == cost


def test_brute_force_refuses_huge_spaces():
    with pytest.raises(EnumerationTooLargeError):
        brute_force(ChannelAssignmentInstance(30, 2))


def test_demo_optimum_is_small_integer():
    X, cost = brute_force(generate_demo(0))
    assert check_feasibility(X, generate_demo(0)).feasible
    assert cost == int(cost)


# -- simulated annealing ----------------------------------------------------


def test_sa_single_spin():
    z, e = simulated_annealing(IsingInstance((0,), {0: 2.0}), seed=0)
    assert z == {0: -1} and e == -2.0


def test_sa_zero_hamiltonian():
    z, e = simulated_annealing(IsingInstance.from_terms({}, {}, active=(0, 1, 2)).shifted(1.5), seed=0)
    assert set(z) == {0, 1, 2} and e == 1.5


def test_sa_empty_model():
    assert simulated_annealing(IsingInstance((), {}, {}, 4.0)) == ({}, 4.0)


def test_sa_is_deterministic_per_seed():
    rng = np.random.default_rng(3)
    ising = IsingInstance(tuple(range(8)), {i: float(rng.normal()) for i in range(8)},
                          {(i, j): float(rng.normal()) for i, j in itertools.combinations(range(8), 2)})
    assert simulated_annealing(ising, seed=4) == simulated_annealing(ising, seed=4)


def test_sa_reaches_ground_state_on_most_seeds():
    rng = np.random.default_rng(5)
    n = 10
    ising = IsingInstance(tuple(range(n)), {i: float(rng.integers(-3, 4)) for i in range(n)},
                          {(i, j): float(rng.integers(-3, 4)) for i, j in itertools.combinations(range(n), 2)})
    best, _ = brute_min(ising.fields, ising.couplings, ising.offset, ising.active)
    hits = sum(simulated_annealing(ising, n_sweeps=2000, seed=s)[1] == pytest.approx(best) for s in range(10))
    assert hits >= 9


def test_sa_accepts_qubo():
    q, _ = build_qubo(generate_random(3, 2, seed=0), PenaltyConfig(20.0))
    z, e = simulated_annealing(q, seed=1)
    assert e == pytest.approx(qubo_to_ising(q).energy(z))


# -- estimators -------------------------------------------------------------


def test_estimators():
    inst = generate_random(5, 3, seed=7)
    g = GreedyAssigner().fit(inst)
    assert g.objective_ == objective_value(greedy_assign(inst), inst)
    ex = ExhaustiveAssigner()
    assert ex.fit_predict(inst).tolist() == matrix_to_channels(brute_force(inst)[0]).tolist()
    assert ex.objective_ <= g.objective_
    sa = AnnealingSolver(random_state=2)
    z = sa.fit_predict(IsingInstance((0,), {0: 1.0}))
    assert z == {0: -1} and sa.get_params()["random_state"] == 2
