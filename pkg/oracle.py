#!/usr/bin/env python3

"""
検証用の厳密解
BQM の全列挙最小化、分枝限定法による最適 makespan、スケジュールの実行可能性検査
"""

import heapq
import itertools
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from fjssp_instance import FjsspInstance
from qubo_builder import Bqm, Diagnostic, DiagnosticKind, Schedule, ScheduledOperation

logger = logging.getLogger(__name__)

EXHAUSTIVE_GUARD = 26
BLOCK_BITS = 12


class ExhaustiveGuardError(ValueError):
    """全列挙の変数数上限を超えた"""


class OracleBudgetExceeded(RuntimeError):
    """分枝限定法のノード予算切れ（実行不能とは区別する）"""

    def __init__(self, nodes: int, incumbent: Optional[int] = None):
        self.nodes = nodes
        self.incumbent = incumbent
        super().__init__(f"branch-and-bound budget of {nodes} nodes exhausted (incumbent: {incumbent})")


class ScheduleInfeasibleError(ValueError):
    """horizon 内に実行可能なスケジュールがない"""


# ============================================
# BQM 全列挙
# ============================================

def exact_bqm_minimum(bqm: Bqm, guard: int = EXHAUSTIVE_GUARD) -> Tuple[np.ndarray, float]:
    """全 2^n 状態の最小エネルギー（同値なら x0 を最上位とした辞書順最小）

    上位ビットを Gray コードで更新し、下位 12 ビットはまとめて行列計算する。
    """
    n = bqm.num_variables
    if n > guard:
        raise ExhaustiveGuardError(f"exhaustive search limited to {guard} variables (got {n})")
    if n == 0:
        return np.zeros(0, dtype=np.int8), bqm.offset

    Q = bqm.adjacency().toarray()
    lin = np.asarray(bqm.linear)
    low_bits = min(n, BLOCK_BITS)
    high_bits = n - low_bits
    high = slice(0, high_bits)
    low = slice(high_bits, n)

    # 下位ブロックの全状態（辞書順）
    block = np.asarray(list(itertools.product((0, 1), repeat=low_bits)), dtype=np.float64)
    Q_low = Q[low, low]
    low_only = 0.5 * np.einsum("si,ij,sj->s", block, Q_low, block)
    coupling = Q[low, high]  # (low, high)

    h = np.zeros(high_bits)
    high_fields = lin[high].copy()      # lin_high + Q_hh h
    low_fields = lin[low].copy()        # lin_low + C h
    high_energy = 0.0

    best_energy = np.inf
    best_key: Optional[Tuple[int, ...]] = None
    best_sample = None

    for step in range(2 ** high_bits):
        if step:
            # Gray コードで反転するビット（最下位の立っているビット位置）
            bit = (step & -step).bit_length() - 1
            i = high_bits - 1 - bit
            sign = 1.0 - 2.0 * h[i]
            high_energy += sign * high_fields[i]
            h[i] += sign
            high_fields += sign * Q[high, i]
            low_fields += sign * coupling[:, i]
        energies = high_energy + block @ low_fields + low_only
        idx = int(np.argmin(energies))
        value = float(energies[idx])
        key = tuple(int(b) for b in h) + tuple(int(b) for b in block[idx])
        if value < best_energy - 1e-9 or (abs(value - best_energy) <= 1e-9 and key < best_key):
            best_energy = value
            best_key = key
            best_sample = np.asarray(key, dtype=np.int8)

    return best_sample, bqm.energy(best_sample)


# ============================================
# 最適 makespan（分枝限定法）
# ============================================

def optimal_schedule(instance: FjsspInstance, horizon_cap: Optional[int] = None,
                     node_budget: int = 2_000_000) -> Schedule:
    """開始時刻の非減少順に工程を追加していく最良優先探索

    各工程は max(ジョブの前工程終了, 機械の空き, 直前に置いた開始時刻) に置く。
    任意の実行可能スケジュールをこの順で再生すると開始時刻は遅くならないので最適解を取りこぼさない。
    """
    jobs = instance.jobs
    n_jobs = len(jobs)
    min_times = [[op.min_time for op in job.operations] for job in jobs]
    remaining_min = [[sum(times[j:]) for j in range(len(times) + 1)] for times in min_times]

    # 機械が1台に固定された工程の残り負荷
    def machine_bound(next_op: Tuple[int, ...], machine_free: Dict[int, int], last_start: int) -> int:
        load: Dict[int, int] = defaultdict(int)
        for a, job in enumerate(jobs):
            for op in job.operations[next_op[a]:]:
                if len(op.eligible) == 1:
                    load[op.eligible[0].machine] += op.eligible[0].time
        return max((max(machine_free.get(m, 0), last_start) + total for m, total in load.items()), default=0)

    def lower_bound(next_op, job_ready, machine_free, last_start, makespan) -> int:
        bound = makespan
        for a in range(n_jobs):
            if next_op[a] < len(jobs[a].operations):
                bound = max(bound, max(job_ready[a], last_start) + remaining_min[a][next_op[a]])
        return max(bound, machine_bound(next_op, machine_free, last_start))

    counter = itertools.count()
    start_state = ((0,) * n_jobs, (0,) * n_jobs, (), 0, 0, ())
    heap = [(lower_bound((0,) * n_jobs, (0,) * n_jobs, {}, 0, 0), next(counter), start_state)]
    best: Optional[int] = None
    best_plan: Tuple = ()
    nodes = 0

    while heap:
        bound, _, (next_op, job_ready, machine_items, last_start, makespan, plan) = heapq.heappop(heap)
        if best is not None and bound >= best:
            break
        nodes += 1
        if nodes > node_budget:
            raise OracleBudgetExceeded(node_budget, best)
        if all(next_op[a] == len(jobs[a].operations) for a in range(n_jobs)):
            if best is None or makespan < best:
                best, best_plan = makespan, plan
            continue
        machine_free = dict(machine_items)
        for a in range(n_jobs):
            j = next_op[a]
            if j == len(jobs[a].operations):
                continue
            for e in jobs[a].operations[j].eligible:
                start = max(job_ready[a], machine_free.get(e.machine, 0), last_start)
                finish = start + e.time
                if horizon_cap is not None and start >= horizon_cap:
                    continue
                child_next = next_op[:a] + (j + 1,) + next_op[a + 1:]
                child_ready = job_ready[:a] + (finish,) + job_ready[a + 1:]
                child_free = dict(machine_free)
                child_free[e.machine] = finish
                child_makespan = max(makespan, finish)
                child_bound = lower_bound(child_next, child_ready, child_free, start, child_makespan)
                if best is not None and child_bound >= best:
                    continue
                state = (child_next, child_ready, tuple(sorted(child_free.items())), start, child_makespan,
                         plan + ((a, j, e.machine, start, finish),))
                heapq.heappush(heap, (child_bound, next(counter), state))

    if best is None:
        raise ScheduleInfeasibleError(f"no feasible schedule with starts below {horizon_cap}")
    logger.debug("branch and bound: makespan %d after %d nodes", best, nodes)
    return Schedule.from_operations(
        ScheduledOperation(job=a, op=j, machine=m, start=s, finish=f) for a, j, m, s, f in best_plan)


def optimal_makespan(instance: FjsspInstance, horizon_cap: Optional[int] = None,
                     node_budget: int = 2_000_000) -> int:
    """最小 makespan"""
    return optimal_schedule(instance, horizon_cap, node_budget).makespan


# ============================================
# スケジュール検査
# ============================================

def verify_schedule(instance: FjsspInstance, schedule: Schedule) -> List[Diagnostic]:
    """機械の適格性・先行制約・機械上の重なりを検査（空なら実行可能）"""
    diagnostics: List[Diagnostic] = []
    placed: Dict[Tuple[int, int], ScheduledOperation] = {}

    for o in schedule.operations:
        key = (o.job, o.op)
        if key in placed:
            diagnostics.append(Diagnostic(kind=DiagnosticKind.ONE_START,
                                          detail=f"operation {key} scheduled more than once", operations=(key,)))
            continue
        a = o.job if 0 <= o.job < instance.num_jobs else None
        if a is None or not 0 <= o.op < len(instance.jobs[a].operations):
            diagnostics.append(Diagnostic(kind=DiagnosticKind.WINDOW,
                                          detail=f"operation {key} does not exist", operations=(key,)))
            continue
        placed[key] = o
        duration = instance.jobs[a].operations[o.op].time_on(o.machine)
        if duration is None:
            diagnostics.append(Diagnostic(kind=DiagnosticKind.WINDOW,
                                          detail=f"machine {o.machine} is not eligible for operation {key}",
                                          operations=(key,)))
        elif o.finish != o.start + duration:
            diagnostics.append(Diagnostic(kind=DiagnosticKind.WINDOW,
                                          detail=f"operation {key} finishes at {o.finish}, expected {o.start + duration}",
                                          operations=(key,)))
        if o.start < 0:
            diagnostics.append(Diagnostic(kind=DiagnosticKind.WINDOW,
                                          detail=f"operation {key} starts before time 0", operations=(key,)))

    for a, job in enumerate(instance.jobs):
        for j in range(len(job.operations)):
            key = (a, j)
            if key not in placed:
                diagnostics.append(Diagnostic(kind=DiagnosticKind.ONE_START,
                                              detail=f"operation {key} is not scheduled", operations=(key,)))
                continue
            successor = placed.get((a, j + 1))
            if successor is not None and successor.start < placed[key].finish:
                diagnostics.append(Diagnostic(
                    kind=DiagnosticKind.PRECEDENCE,
                    detail=f"operation {(a, j + 1)} starts at {successor.start} before {key} finishes at {placed[key].finish}",
                    operations=(key, (a, j + 1))))

    by_machine = defaultdict(list)
    for o in placed.values():
        by_machine[o.machine].append(o)
    for machine, items in sorted(by_machine.items()):
        items.sort(key=lambda o: (o.start, o.job, o.op))
        for pos, first in enumerate(items):
            for second in items[pos + 1:]:
                if second.start >= first.finish:
                    break
                diagnostics.append(Diagnostic(
                    kind=DiagnosticKind.OVERLAP,
                    detail=f"operations {(first.job, first.op)} and {(second.job, second.op)} overlap on machine {machine}",
                    operations=((first.job, first.op), (second.job, second.op))))
    return diagnostics
