#!/usr/bin/env python3

"""
変数表・BQM構築・Ising変換・復号のテスト
"""

import itertools

import numpy as np
import pytest

from fjssp_instance import Eligibility, FjsspInstance, Job, Operation, SetupParams, generate_instance
from qubo_builder import (
    Bqm,
    DiagnosticKind,
    EmptyWindowError,
    PenaltyWeights,
    SampleLengthError,
    Variable,
    build_bqm,
    build_variable_table,
    count_interactions,
    decode,
    encode_schedule,
    energy,
    from_ising,
    hamiltonian_terms,
    to_ising,
    write_bqm_text,
)

# n → (n_v, n_q)
PUBLISHED_METRICS = {
    20: (800, 1160),
    32: (2048, 3008),
    45: (4050, 5985),
    49: (4802, 7105),
    84: (14112, 21000),
    86: (14792, 22016),
}


def s1(n):
    return generate_instance(SetupParams.for_setup("S1", n))


def two_op_chain():
    """1ジョブ2工程（機械0→機械1, p=1）"""
    job = Job(id=0, operations=(Operation(eligible=(Eligibility(machine=0, time=1),)),
                                Operation(eligible=(Eligibility(machine=1, time=1),))))
    return FjsspInstance(jobs=(job,), machine_count=2, horizon=3)


def est_sample(instance, table):
    """S1 で全工程を最早開始時刻・ラテン方陣の機械に置いたサンプル"""
    n = instance.num_jobs
    x = np.zeros(len(table), dtype=np.int8)
    for i, j, _ in instance.iter_operations():
        x[table.index[Variable(i, j, (i + j) % n, j)]] = 1
    return x


def random_bqm(n, seed):
    rng = np.random.default_rng(seed)
    quadratic = {(a, b): rng.normal() for a in range(n) for b in range(a + 1, n) if rng.random() < 0.5}
    return Bqm(rng.normal(size=n), quadratic, rng.normal())


def all_assignments(n):
    return np.asarray(list(itertools.product((0, 1), repeat=n)), dtype=np.int8)


# ============================================
# 変数表
# ============================================

@pytest.mark.parametrize("n", [20, 84])
def test_variable_count_matches_published(n):
    table = build_variable_table(s1(n), 2)
    assert len(table) == PUBLISHED_METRICS[n][0]


def test_single_operation_window():
    table = build_variable_table(s1(1), 2)
    assert len(table) == 2
    assert table.window(0, 0) == [0, 1]


def test_variable_count_formula_with_flexibility():
    instance = generate_instance(SetupParams.for_setup("S2", 4, k=3))
    table = build_variable_table(instance, 2)
    assert len(table) == 4 * 4 * 3 * 2


def test_table_is_sorted_and_within_horizon():
    instance = generate_instance(SetupParams.for_setup("S3", 3, k=2, p=2))
    table = build_variable_table(instance, 3)
    assert list(table.entries) == sorted(table.entries)
    for idx, v in enumerate(table.entries):
        assert v.start + table.durations[idx] <= instance.horizon
    assert set(table.operations) == {(i, j) for i, j, _ in instance.iter_operations()}


def test_table_is_deterministic():
    instance = generate_instance(SetupParams.for_setup("S2", 5, k=2))
    assert build_variable_table(instance, 2) == build_variable_table(instance, 2)


def test_empty_window_names_operation():
    job = Job(id=0, operations=(Operation(eligible=(Eligibility(machine=0, time=2),)),
                                Operation(eligible=(Eligibility(machine=0, time=2),))))
    instance = FjsspInstance(jobs=(job,), machine_count=1, horizon=3)
    with pytest.raises(EmptyWindowError) as excinfo:
        build_variable_table(instance, 2)
    assert (excinfo.value.job, excinfo.value.op) == (0, 1)


def test_invalid_window_width():
    with pytest.raises(ValueError):
        build_variable_table(s1(2), 0)


# ============================================
# BQM
# ============================================

@pytest.mark.parametrize("n", sorted(PUBLISHED_METRICS))
def test_interaction_counts_match_published(n):
    instance = s1(n)
    table = build_variable_table(instance, 2)
    bqm = build_bqm(instance, table, PenaltyWeights.default(instance.num_operations, 2))
    assert count_interactions(bqm) == PUBLISHED_METRICS[n]


@pytest.mark.parametrize("n", range(1, 13))
def test_interaction_counts_closed_form(n):
    instance = s1(n)
    bqm = build_bqm(instance, build_variable_table(instance, 2))
    assert count_interactions(bqm) == (2 * n * n, n * n + 2 * n * (n - 1))


def test_any_positive_weights_give_same_counts():
    instance = s1(20)
    table = build_variable_table(instance, 2)
    bqm = build_bqm(instance, table, PenaltyWeights(alpha=3.0, beta=0.5, gamma=7.0, delta=0.25))
    assert count_interactions(bqm) == (800, 1160)


def test_single_operation_expansion():
    instance = s1(1)
    table = build_variable_table(instance, 2)
    weights = PenaltyWeights(alpha=2.0, beta=1.0, gamma=1.0, delta=0.25)
    bqm = build_bqm(instance, table, weights)
    assert list(bqm.linear) == [-2.0, -2.0 + 0.25]
    assert dict(bqm.quadratic) == {(0, 1): 4.0}
    assert bqm.offset == 2.0


def test_empty_bqm_counts():
    assert count_interactions(Bqm.empty()) == (0, 0)


def test_cancelled_coefficients_are_dropped():
    bqm = Bqm([0.0, 0.0], {(0, 1): 1.5, (1, 0): -1.5})
    assert len(bqm.quadratic) == 0
    assert count_interactions(bqm) == (0, 0)


def test_default_weights_dominate_objective():
    for n_ops, t_window in [(1, 1), (9, 2), (400, 2), (27, 4)]:
        assert PenaltyWeights.default(n_ops, t_window).dominates_objective(n_ops, t_window)


def test_all_zeros_energy_counts_operations():
    instance = s1(3)
    table = build_variable_table(instance, 2)
    bqm = build_bqm(instance, table)
    assert energy(bqm, np.zeros(len(table))) == pytest.approx(9.0)


def test_optimal_sample_has_zero_energy():
    instance = s1(3)
    table = build_variable_table(instance, 2)
    bqm = build_bqm(instance, table)
    assert energy(bqm, est_sample(instance, table)) == pytest.approx(0.0, abs=1e-12)


def test_double_start_costs_alpha():
    instance = s1(3)
    table = build_variable_table(instance, 2)
    weights = PenaltyWeights(alpha=2.0, beta=1.0, gamma=1.0, delta=0.1)
    bqm = build_bqm(instance, table, weights)
    base = est_sample(instance, table)
    # 最終工程 (0, 2) は機械2、遅い開始 t=3 は他の工程と衝突しない
    early = table.index[Variable(0, 2, 2, 2)]
    late = table.index[Variable(0, 2, 2, 3)]
    single = base.copy()
    single[early], single[late] = 0, 1
    double = base.copy()
    double[late] = 1
    assert energy(bqm, single) == pytest.approx(0.1)
    assert energy(bqm, double) - energy(bqm, single) == pytest.approx(2.0)


def test_energy_length_mismatch():
    bqm = build_bqm(s1(2), build_variable_table(s1(2), 2))
    with pytest.raises(SampleLengthError):
        energy(bqm, np.zeros(3))


def test_feasible_energy_is_weighted_delay():
    instance = s1(3)
    table = build_variable_table(instance, 2)
    weights = PenaltyWeights(alpha=1.0, beta=1.0, gamma=1.0, delta=0.05)
    bqm = build_bqm(instance, table, weights)
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(300):
        x = np.zeros(len(table), dtype=np.int8)
        for key in table.operations:
            span = table.variables_of(*key)
            x[span[-1] if rng.random() < 0.15 else span[0]] = 1
        result = decode(instance, table, x)
        if not result.feasible:
            continue
        delay = sum(o.start - table.base[(o.job, o.op)] for o in result.schedule.operations)
        assert energy(bqm, x) == pytest.approx(0.05 * delay)
        checked += 1
    assert checked > 0


def test_constraint_energy_zero_iff_feasible():
    instance = s1(2)
    table = build_variable_table(instance, 2)
    terms = hamiltonian_terms(instance, table)
    rng = np.random.default_rng(11)
    samples = list(rng.integers(0, 2, size=(200, len(table))))
    samples.append(est_sample(instance, table))
    for x in samples:
        zero = terms.constraint_energy(x) == 0.0
        assert zero == decode(instance, table, x).feasible


def test_terms_sum_to_bqm():
    instance = generate_instance(SetupParams.for_setup("S2", 3, k=2))
    table = build_variable_table(instance, 2)
    weights = PenaltyWeights(alpha=1.5, beta=2.0, gamma=2.5, delta=0.1)
    bqm = build_bqm(instance, table, weights)
    terms = hamiltonian_terms(instance, table)
    x = np.random.default_rng(5).integers(0, 2, size=len(table))
    expected = terms.constraint_energy(x, weights) + weights.delta * terms.makespan.energy(x)
    assert energy(bqm, x) == pytest.approx(expected)


def test_argmin_invariant_under_weight_scaling():
    instance = s1(2)
    table = build_variable_table(instance, 2)
    weights = PenaltyWeights.default(instance.num_operations, 2)
    X = all_assignments(len(table))

    def argmin_set(w):
        energies = build_bqm(instance, table, w).energies(X)
        return {tuple(x) for x in X[np.isclose(energies, energies.min(), atol=1e-9 * max(1.0, abs(energies.min())))]}

    reference = argmin_set(weights)
    for factor in (0.5, 3.0, 40.0):
        assert argmin_set(weights.scaled(factor)) == reference


def test_write_bqm_text(tmp_path):
    path = tmp_path / "single.bqm"
    write_bqm_text(Bqm([-1.0, 0.0, 0.5], {(0, 2): 2.0}, 1.0), path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["nvars 3", "lin 0 -1.0", "lin 2 0.5", "quad 0 2 2.0", "offset 1.0"]


# ============================================
# Ising
# ============================================

def test_ising_single_variable():
    ising = to_ising(Bqm([3.0]))
    assert ising.h.tolist() == [1.5]
    assert ising.offset == pytest.approx(1.5)


def test_zero_bqm_gives_zero_ising():
    ising = to_ising(Bqm.empty(4))
    assert ising.h.tolist() == [0.0] * 4
    assert ising.J == {}
    assert ising.offset == 0.0


def test_ising_energies_match_on_all_assignments():
    bqm = random_bqm(10, seed=1)
    X = all_assignments(10)
    ising = to_ising(bqm)
    np.testing.assert_allclose(ising.energies(2 * X.astype(float) - 1), bqm.energies(X), atol=1e-9)
    np.testing.assert_allclose(from_ising(ising).energies(X), bqm.energies(X), atol=1e-9)


# ============================================
# 復号
# ============================================

def test_decode_optimal_sample():
    instance = s1(3)
    table = build_variable_table(instance, 2)
    result = decode(instance, table, est_sample(instance, table))
    assert result.feasible
    assert result.schedule.makespan == 3
    assert result.violations == []
    assert encode_schedule(table, result.schedule).tolist() == est_sample(instance, table).tolist()


def test_decode_all_zeros():
    instance = s1(4)
    table = build_variable_table(instance, 2)
    result = decode(instance, table, np.zeros(len(table)))
    assert not result.feasible
    assert len(result.violations) == 16
    assert {d.kind for d in result.violations} == {DiagnosticKind.ONE_START}


def test_decode_precedence_violation():
    instance = two_op_chain()
    table = build_variable_table(instance, 2)
    x = np.zeros(len(table), dtype=np.int8)
    x[table.index[Variable(0, 0, 0, 1)]] = 1
    x[table.index[Variable(0, 1, 1, 1)]] = 1
    result = decode(instance, table, x)
    assert not result.feasible
    assert len(result.violations) == 1
    violation = result.violations[0]
    assert violation.kind == DiagnosticKind.PRECEDENCE
    assert violation.operations == ((0, 0), (0, 1))


def test_decode_overlap_violation():
    instance = s1(2)
    table = build_variable_table(instance, 2)
    x = est_sample(instance, table)
    # (0, 0) を t=1 にずらすと機械0で (1, 1) と重なり、(0, 1) より後に終わる
    x[table.index[Variable(0, 0, 0, 0)]] = 0
    x[table.index[Variable(0, 0, 0, 1)]] = 1
    kinds = [d.kind for d in decode(instance, table, x).violations]
    assert DiagnosticKind.OVERLAP in kinds
    assert DiagnosticKind.PRECEDENCE in kinds


def test_decode_length_mismatch():
    instance = s1(2)
    table = build_variable_table(instance, 2)
    with pytest.raises(SampleLengthError):
        decode(instance, table, np.zeros(len(table) + 1))
