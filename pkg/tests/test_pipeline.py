import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import assignment_cost
from rqaoa_wireless.baselines import brute_force, greedy_assign
from rqaoa_wireless.pipeline import (
    HybridPipeline,
    PipelineConfig,
    PipelineResult,
    delta_norm,
    feasibility_rate,
    metrics,
    restrict_instance,
    run_pipeline,
    scaled_ratio,
    select_core,
    summarize,
)
from rqaoa_wireless.qaoa import OptimizerConfig
from rqaoa_wireless.rqaoa import RqaoaConfig
from rqaoa_wireless.statevector import MixerKind
from rqaoa_wireless.wireless import (
    ChannelAssignmentInstance,
    PenaltyConfig,
    check_feasibility,
    generate_demo,
    generate_hotspot,
    generate_random,
    objective_value,
)

FAST = RqaoaConfig(n_cutoff=6, qaoa=OptimizerConfig(restarts=1, max_evaluations=40))


# -- core selection ---------------------------------------------------------


def test_select_core_full_and_dominant_pair():
    inst = ChannelAssignmentInstance(4, 2, [(0, 1), (1, 2), (2, 3)], [1.0, 5.0, 1.0])
    assert sorted(select_core(inst, 4)) == [0, 1, 2, 3]
    assert select_core(inst, 2) == [1, 2]
    with pytest.raises(ValueError):
        select_core(inst, 5)


def test_select_core_matches_sort_oracle():
    inst = generate_random(12, 3, seed=4)
    deg = [0.0] * 12
    for (u, v), w in zip(inst.pairs.tolist(), inst.weights.tolist()):
        deg[u] += w
        deg[v] += w
    ref = sorted(range(12), key=lambda u: (-deg[u], u))[:5]
    assert select_core(inst, 5) == ref


def test_restrict_singleton_and_full():
    inst = generate_random(5, 3, seed=1)
    sub, users = restrict_instance(inst, [3])
    assert sub.num_users == 1 and len(sub.pairs) == 0 and users == [3]
    sub, _ = restrict_instance(inst, range(5))
    assert np.array_equal(sub.pairs, inst.pairs) and np.array_equal(sub.weights, inst.weights)
    with pytest.raises(ValueError):
        restrict_instance(inst, [1, 1])


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.data())
def test_restricted_objective_matches_induced_pairs(seed, data):
    inst = generate_random(7, 3, seed=seed)
    users = data.draw(st.lists(st.integers(0, 6), min_size=1, max_size=7, unique=True))
    sub, _ = restrict_instance(inst, users)
    ch = data.draw(st.lists(st.integers(0, 2), min_size=len(users), max_size=len(users)))
    full_ch = {u: c for u, c in zip(users, ch)}
    ref = sum(w for (u, v), w in zip(inst.pairs.tolist(), inst.weights.tolist())
              if u in full_ch and v in full_ch and full_ch[u] == full_ch[v])
    assert assignment_cost(3, sub.pairs.tolist(), sub.weights.tolist(), ch) == ref


# -- full runs --------------------------------------------------------------


def test_exact_core_covering_everyone_equals_brute_force():
    inst = generate_random(5, 3, seed=2)
    X, res = run_pipeline(inst, PipelineConfig(core_size=5, solver="exact"))
    assert res.objective == brute_force(inst)[1]
    assert np.array_equal(X, brute_force(inst)[0])


def test_demo_rqaoa_pipeline_is_feasible_and_optimal():
    inst = generate_demo(3)
    cfg = PipelineConfig(core_size=4, rqaoa=RqaoaConfig(n_cutoff=6, qaoa=OptimizerConfig()),
                         penalty=PenaltyConfig(10.0), seed=3)
    X, res = run_pipeline(inst, cfg)
    assert res.feasible and check_feasibility(X, inst).feasible
    assert res.objective == brute_force(inst)[1]
    assert res.n_qubits_core == 16
    assert set(res.timings_ms) == {"presolve", "core", "extend", "total"}


def test_core_rows_survive_extension():
    inst = generate_hotspot(20, 2, seed=1)
    X, res = run_pipeline(inst, PipelineConfig(core_size=6, rqaoa=FAST))
    Xg, resg = run_pipeline(inst, PipelineConfig(core_size=6, solver="greedy"))
    assert res.feasible and resg.feasible
    assert res.n_qubits_core == 12
    # the extension is greedy in both arms; only the core differs
    d = delta_norm(res.objective, objective_value(greedy_assign(inst), inst))
    assert math.isfinite(d.value)


def test_qubit_count_independent_of_user_count():
    sizes = {run_pipeline(generate_hotspot(U, 2, seed=0), PipelineConfig(core_size=5, rqaoa=FAST))[1].n_qubits_core
             for U in (8, 24, 64)}
    assert sizes == {10}


def test_ring_xy_core_is_feasible_without_repair():
    inst = generate_random(9, 3, seed=6)
    rq = RqaoaConfig(n_cutoff=6, qaoa=OptimizerConfig(depth=1, mixer=MixerKind.RING_XY, init_state="onehot_uniform",
                                                      restarts=1, max_evaluations=40))
    _, res = run_pipeline(inst, PipelineConfig(core_size=3, rqaoa=rq))
    assert res.feasible and not res.repaired


def test_qaoa_sample_best_solver():
    inst = generate_random(3, 2, seed=5)
    rq = RqaoaConfig(qaoa=OptimizerConfig(restarts=1, max_evaluations=30))
    X, res = run_pipeline(inst, PipelineConfig(core_size=3, solver="qaoa_sample_best", rqaoa=rq))
    assert res.feasible and res.solver == "qaoa_sample_best"


def test_pipeline_is_deterministic_apart_from_timings():
    inst = generate_hotspot(16, 2, seed=2)
    cfg = PipelineConfig(core_size=5, rqaoa=FAST, seed=9)
    (Xa, a), (Xb, b) = run_pipeline(inst, cfg), run_pipeline(inst, cfg)
    assert np.array_equal(Xa, Xb)
    assert (a.objective, a.repaired, a.trace, a.core_users) == (b.objective, b.repaired, b.trace, b.core_users)


def test_oversized_quantum_core_refused():
    with pytest.raises(ValueError):
        run_pipeline(generate_random(14, 2, seed=0), PipelineConfig(core_size=14))


# -- metrics ----------------------------------------------------------------


def test_delta_norm_arithmetic():
    d = delta_norm(103, 100)
    assert d.value == pytest.approx(0.03) and d.relative
    d = delta_norm(2.5, 0)
    assert d.value == 2.5 and not d.relative


def test_scaled_ratio_endpoints():
    assert scaled_ratio(1.0, 1.0, 9.0) == 1.0
    assert scaled_ratio(9.0, 1.0, 9.0) == 0.0
    assert scaled_ratio(4.0, 4.0, 4.0) == 1.0
    assert scaled_ratio(3.0, 1.0, 9.0) == 0.75


def test_summary_statistics_match_second_implementation():
    vals = [0.91, 1.0, 0.85, 0.97, 1.0]
    s = summarize(vals)
    mean = sum(vals) / 5
    assert s["mean"] == pytest.approx(mean)
    assert s["std"] == pytest.approx(math.sqrt(sum((v - mean) ** 2 for v in vals) / 5))
    assert s["std"] == pytest.approx(float(np.std(vals)))
    assert math.isnan(summarize([])["mean"])


def test_feasibility_rate():
    assert feasibility_rate([True, False, True, True]) == 0.75


def test_metrics_aggregation():
    def fake(obj):
        return PipelineResult(np.zeros((1, 1)), obj, True, False, "rqaoa", 0, [0], 2, {})

    out = metrics([fake(10.0), fake(12.0), fake(3.0)], [10.0, 10.0, 0.0], [(10.0, 20.0), (10.0, 20.0), (0.0, 6.0)])
    assert out["feasibility_rate"] == 1.0
    assert out["delta_norm"]["mean"] == pytest.approx(0.1)
    assert out["absolute_deviation_count"] == 1
    assert out["scaled_ratio"]["mean"] == pytest.approx(statistics.fmean([1.0, 0.8, 0.5]))


# -- estimator --------------------------------------------------------------


def test_hybrid_pipeline_estimator():
    inst = generate_random(6, 2, seed=8)
    est = HybridPipeline(core_size=4, restarts=1, max_evaluations=30)
    ch = est.fit_predict(inst)
    assert ch.shape == (6,) and est.result_.feasible
    assert est.objective_ == objective_value(est.assignment_, inst)
    assert est.get_params()["core_size"] == 4
    exact = HybridPipeline(core_size=6, solver="exact").fit(inst)
    assert exact.objective_ == brute_force(inst)[1]
