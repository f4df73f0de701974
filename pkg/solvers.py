#!/usr/bin/env python3

"""
3種類のソルバー構成
CQPU（埋め込み + 量子アニーリング模擬）、HQPU（SA・タブー・QA部分問題の並列ポートフォリオ）、
IHQPU（ボトルネック係数によるジョブ部分集合の反復解法）
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

import settings
from fjssp_instance import FjsspInstance
from oracle import verify_schedule
from qubo_builder import (Bqm, DecodeResult, Diagnostic, PenaltyWeights, Schedule, ScheduledOperation,
                          VariableTable, build_bqm, build_variable_table, count_interactions, decode)
from samplers import (SampleSet, SamplerParams, SqaParams, TabuParams, sample_ising, simulated_annealing,
                      tabu_search)
from topology import Embedding, EmbeddingFailure, Topology, embed_bqm, find_embedding, unembed

logger = logging.getLogger(__name__)


class SolverKind(str, Enum):
    CQPU = "CQPU"
    HQPU = "HQPU"
    IHQPU = "IHQPU"


class SolveStatus(str, Enum):
    SOLVED = "Solved"
    TIMED_OUT = "TimedOut"
    EMBEDDING_INFEASIBLE = "EmbeddingInfeasible"


class SolverConfig(BaseModel):
    """ソルバー設定

    deterministic_budget を指定するとスイープ数と最大ラウンド数で打ち切り、壁時計には依存しない。
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: SolverKind
    topology: Topology
    time_limit: PositiveFloat = settings.TIME_LIMIT
    deterministic_budget: Optional[PositiveInt] = None
    seed: int = Field(default=settings.SEED, ge=0)
    partition_threshold: float = Field(default=math.inf, gt=0)
    subset_size_cap: Optional[PositiveInt] = None
    weights: Optional[PenaltyWeights] = None
    t_window: PositiveInt = 2
    num_reads: PositiveInt = 10
    sweeps: PositiveInt = 1000
    max_rounds: PositiveInt = 50
    stall_rounds: PositiveInt = 10
    qa_subproblem_size: PositiveInt = 64
    embedding_effort: PositiveInt = 10
    postprocess: bool = True
    chain_strength: Optional[PositiveFloat] = None
    sqa: SqaParams = SqaParams()

    @property
    def deterministic(self) -> bool:
        return self.deterministic_budget is not None

    @property
    def sweep_count(self) -> int:
        return self.deterministic_budget or self.sweeps

    def echo(self) -> Dict[str, Any]:
        data = self.model_dump(mode="json", exclude={"topology"})
        data["topology"] = self.topology.name
        if math.isinf(self.partition_threshold):
            data["partition_threshold"] = "inf"
        return data


class LoopTrace(BaseModel):
    """IHQPU の1ループ分の記録"""
    loop: int
    jobs: List[int]
    n_v: int
    n_q: int
    makespan: Optional[int] = None
    energy: Optional[float] = None
    horizon: int
    repaired: bool = False
    window_extensions: int = 0


class SolveReport(BaseModel):
    config: Dict[str, Any]
    elapsed: float
    best_energy: Optional[float] = None
    best_sample: Optional[List[int]] = None
    schedule: Optional[Schedule] = None
    violations: List[Diagnostic] = []
    makespan: Optional[int] = None
    feasible: Optional[bool] = None
    n_v: int = 0
    n_q: int = 0
    n_e: Optional[int] = None
    max_chain_length: Optional[int] = None
    status: SolveStatus
    rounds: int = 0
    loop_trace: List[LoopTrace] = []

    def comparable(self) -> Dict[str, Any]:
        """経過時間と設定を除いた内容（決定性の比較用）"""
        return self.model_dump(mode="json", exclude={"elapsed", "config"})


# ============================================
# ボトルネック係数
# ============================================

class BottleneckFactor(BaseModel):
    model_config = ConfigDict(frozen=True)

    job: int
    value: float


def bottleneck_factors(instance: FjsspInstance, remaining_jobs: Sequence[int]) -> List[BottleneckFactor]:
    """総処理時間（適格機械の平均）÷ 平均選択可能機械数、降順（同値はジョブ番号順）"""
    factors = []
    for a in remaining_jobs:
        operations = instance.jobs[a].operations
        if not operations:
            factors.append(BottleneckFactor(job=a, value=0.0))
            continue
        total = sum(op.mean_time for op in operations)
        choice = sum(len(op.eligible) for op in operations) / len(operations)
        factors.append(BottleneckFactor(job=a, value=total / choice))
    return sorted(factors, key=lambda f: (-f.value, f.job))


# ============================================
# 部分問題
# ============================================

class Subproblem(NamedTuple):
    bqm: Bqm
    variables: Tuple[int, ...]
    fixed: np.ndarray  # 全変数長、free の位置は 0

    def expand(self, sub_sample) -> np.ndarray:
        x = self.fixed.copy()
        x[list(self.variables)] = np.asarray(sub_sample, dtype=np.int8)
        return x


def clamp_subproblem(bqm: Bqm, fixed: Mapping[int, int], free: Sequence[int]) -> Subproblem:
    """固定変数を線形項とオフセットに吸収した部分 BQM"""
    free = sorted(set(int(v) for v in free))
    overlap = set(free) & set(fixed)
    if overlap:
        raise ValueError(f"variables {sorted(overlap)} are both fixed and free")
    n = bqm.num_variables
    missing = set(range(n)) - set(free) - set(fixed)
    if missing:
        raise ValueError(f"variables {sorted(missing)} are neither fixed nor free")

    x = np.zeros(n, dtype=np.int8)
    for v, value in fixed.items():
        x[v] = value
    if n == 0:
        return Subproblem(Bqm.empty(0), (), x)

    offset = bqm.energy(x)
    fields = bqm.local_fields(x)
    position = {v: i for i, v in enumerate(free)}
    linear = fields[free] if free else np.zeros(0)
    rows, cols, vals = bqm.quadratic_arrays
    quadratic = {}
    for a, b, value in zip(rows, cols, vals):
        if a in position and b in position:
            quadratic[(position[a], position[b])] = value
    return Subproblem(Bqm(linear, quadratic, offset), tuple(free), x)


# ============================================
# CQPU パイプライン
# ============================================

class QpuResult(NamedTuple):
    sampleset: Optional[SampleSet]
    embedding: Union[Embedding, EmbeddingFailure]


def derive_seed(seed: int, *keys: int) -> int:
    """(seed, round, worker) などから独立したシードを作る"""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint64)[0])


def qpu_sample(bqm: Bqm, config: SolverConfig, seed: int) -> QpuResult:
    """find_embedding → embed_bqm → 量子アニーリング模擬 → unembed（→ タブーで後処理）"""
    embedding = find_embedding(bqm.interaction_graph(), config.topology, seed=seed, effort=config.embedding_effort)
    if isinstance(embedding, EmbeddingFailure):
        return QpuResult(None, embedding)

    problem = embed_bqm(bqm, embedding, config.topology, chain_strength=config.chain_strength)
    params = SamplerParams(seed=seed, num_reads=config.num_reads, sweeps=config.sweep_count, sqa=config.sqa)
    spins = sample_ising(problem.ising, params)
    samples = np.asarray([unembed(problem.to_qubit_sample(s), embedding, bqm) for s in spins], dtype=np.int8)
    sampleset = SampleSet.from_samples(bqm, samples, {"sampler": "qpu_stand_in", "n_e": embedding.n_e})

    if config.postprocess and bqm.num_variables:
        polish = SamplerParams(seed=seed, num_reads=len(samples), sweeps=max(50, config.sweep_count // 10),
                               tabu=TabuParams())
        polished = tabu_search(bqm, polish, initial_states=samples)
        sampleset = sampleset.concatenate(polished)
    return QpuResult(sampleset, embedding)


def _best_of(instance: Optional[FjsspInstance], table: Optional[VariableTable],
             sampleset: SampleSet) -> Tuple[np.ndarray, float, Optional[DecodeResult]]:
    """エネルギー順に見て最初の実行可能サンプル（なければ最低エネルギー）"""
    if instance is None:
        bits, value = sampleset.first
        return bits, value, None
    first = None
    for bits, value in sampleset:
        result = decode(instance, table, bits)
        if result.feasible:
            return bits, value, result
        if first is None:
            first = (bits, value, result)
    return first


def _report(config: SolverConfig, started: float, status: SolveStatus, n_v: int, n_q: int,
            bits: Optional[np.ndarray] = None, value: Optional[float] = None,
            result: Optional[DecodeResult] = None, **extra) -> SolveReport:
    schedule = result.schedule if result is not None else None
    return SolveReport(
        config=config.echo(),
        elapsed=time.perf_counter() - started,
        best_energy=value,
        best_sample=None if bits is None else [int(b) for b in bits],
        schedule=schedule,
        violations=result.violations if result is not None else [],
        makespan=schedule.makespan if schedule is not None else None,
        feasible=None if result is None and bits is not None else (schedule is not None),
        n_v=n_v,
        n_q=n_q,
        status=status,
        **extra,
    )


def _prepare(instance: FjsspInstance, config: SolverConfig) -> Tuple[VariableTable, Bqm]:
    table = build_variable_table(instance, config.t_window)
    weights = config.weights or PenaltyWeights.default(instance.num_operations, config.t_window)
    return table, build_bqm(instance, table, weights)


def solve_cqpu(instance: FjsspInstance, config: SolverConfig) -> SolveReport:
    """BQM 全体を1回で埋め込んで解く"""
    if config.kind is not SolverKind.CQPU:
        raise ValueError(f"solve_cqpu requires kind CQPU (got {config.kind.value})")
    started = time.perf_counter()
    table, bqm = _prepare(instance, config)
    n_v, n_q = count_interactions(bqm)

    result = qpu_sample(bqm, config, config.seed)
    if result.sampleset is None:
        failure = result.embedding
        logger.warning("CQPU: embedding failed on %s: %s", config.topology.name, failure.reason)
        return _report(config, started, SolveStatus.EMBEDDING_INFEASIBLE, n_v, n_q)

    bits, value, decoded = _best_of(instance, table, result.sampleset)
    elapsed = time.perf_counter() - started
    status = SolveStatus.TIMED_OUT if not config.deterministic and elapsed > config.time_limit else SolveStatus.SOLVED
    report = _report(config, started, status, n_v, n_q, bits, value, decoded,
                     n_e=result.embedding.n_e, max_chain_length=result.embedding.max_chain_length)
    logger.info("CQPU: n_v=%d n_q=%d n_e=%d makespan=%s status=%s elapsed=%.2fs",
                n_v, n_q, report.n_e, report.makespan, status.value, report.elapsed)
    return report


# ============================================
# HQPU
# ============================================

class Incumbent(NamedTuple):
    bits: np.ndarray
    energy: float
    feasible: bool


class WorkerResult(NamedTuple):
    name: str
    samples: List[np.ndarray]
    qa_size: Optional[int] = None
    n_e: Optional[int] = None
    max_chain_length: Optional[int] = None


def _better(candidate: Incumbent, incumbent: Optional[Incumbent]) -> bool:
    """実行可能解を優先し、同じ区分ならエネルギーが厳密に低い方"""
    if incumbent is None:
        return True
    if candidate.feasible != incumbent.feasible:
        return candidate.feasible
    return candidate.energy < incumbent.energy - 1e-12


def _sa_worker(bqm: Bqm, config: SolverConfig, seed: int) -> WorkerResult:
    params = SamplerParams(seed=seed, num_reads=config.num_reads, sweeps=config.sweep_count)
    sampleset = simulated_annealing(bqm, params)
    return WorkerResult("sa", list(sampleset.samples))


def _tabu_worker(bqm: Bqm, config: SolverConfig, seed: int, incumbent: Optional[np.ndarray]) -> WorkerResult:
    params = SamplerParams(seed=seed, num_reads=config.num_reads, sweeps=config.sweep_count, tabu=TabuParams())
    initial = None if incumbent is None else incumbent[None, :]
    sampleset = tabu_search(bqm, params, initial_states=initial)
    return WorkerResult("tabu", list(sampleset.samples))


def energy_impact_order(bqm: Bqm, sample: np.ndarray) -> np.ndarray:
    """単一フリップのエネルギー変化の大きい順"""
    x = np.asarray(sample, dtype=np.float64)
    impact = np.abs((1.0 - 2.0 * x) * bqm.local_fields(x))
    return np.argsort(-impact, kind="stable")


def _qa_worker(bqm: Bqm, config: SolverConfig, seed: int, incumbent: Optional[np.ndarray],
               size: int, round_index: int) -> WorkerResult:
    """影響の大きい変数を部分問題として切り出し CQPU パイプラインで解く"""
    n = bqm.num_variables
    x = np.zeros(n, dtype=np.int8) if incumbent is None else incumbent
    order = energy_impact_order(bqm, x)
    m = min(size, n)
    while m >= 1:
        # 直近ラウンドと別の変数を選ぶ（影響順のリストを転がす）
        shift = (round_index * m) % n
        free = np.roll(order, -shift)[:m]
        chosen = set(free.tolist())
        fixed = {v: int(x[v]) for v in range(n) if v not in chosen}
        sub = clamp_subproblem(bqm, fixed, free.tolist())
        result = qpu_sample(sub.bqm, config, seed)
        if result.sampleset is not None:
            samples = [sub.expand(bits) for bits in result.sampleset.samples]
            return WorkerResult("qa", samples, qa_size=m, n_e=result.embedding.n_e,
                                max_chain_length=result.embedding.max_chain_length)
        m //= 2  # 容量探索
    logger.debug("QA subproblem worker idle: no subproblem embeds")
    return WorkerResult("qa", [], qa_size=0)


class HybridOutcome(NamedTuple):
    incumbent: Optional[Incumbent]
    rounds: int
    timed_out: bool
    n_e: Optional[int]
    max_chain_length: Optional[int]


def hybrid_minimize(bqm: Bqm, config: SolverConfig, feasibility: Optional[Callable[[np.ndarray], bool]] = None,
                    time_limit: Optional[float] = None) -> HybridOutcome:
    """SA・タブー・QA部分問題の3ワーカーとコーディネーター

    決定モードではワーカーを固定順に逐次実行し、それ以外はスレッドで並列実行する。
    """
    started = time.perf_counter()
    deadline = started + (time_limit if time_limit is not None else config.time_limit)
    incumbent: Optional[Incumbent] = None
    qa_size = config.qa_subproblem_size
    stall = 0
    rounds = 0
    timed_out = False
    n_e = None
    max_chain = None

    def judge(bits) -> Incumbent:
        ok = True if feasibility is None else feasibility(bits)
        return Incumbent(np.asarray(bits, dtype=np.int8), bqm.energy(bits), ok)

    executor = None if config.deterministic else ThreadPoolExecutor(max_workers=3)
    try:
        while True:
            if config.deterministic and rounds >= config.max_rounds:
                break
            if not config.deterministic and time.perf_counter() >= deadline:
                timed_out = True
                break

            snapshot = None if incumbent is None else incumbent.bits.copy()
            seeds = [derive_seed(config.seed, rounds, w) for w in range(3)]
            tasks = [
                (_sa_worker, (bqm, config, seeds[0])),
                (_tabu_worker, (bqm, config, seeds[1], snapshot)),
            ]
            if qa_size >= 1:
                tasks.append((_qa_worker, (bqm, config, seeds[2], snapshot, qa_size, rounds)))
            if executor is None:
                results = [fn(*args) for fn, args in tasks]
            else:
                futures = [executor.submit(fn, *args) for fn, args in tasks]
                results = [f.result() for f in futures]

            improved = False
            for worker in results:
                if worker.qa_size is not None:
                    qa_size = worker.qa_size
                    if worker.n_e is not None:
                        n_e = max(n_e or 0, worker.n_e)
                        max_chain = max(max_chain or 0, worker.max_chain_length)
                candidates = sorted((judge(bits) for bits in worker.samples),
                                    key=lambda c: (not c.feasible, c.energy))
                if candidates and _better(candidates[0], incumbent):
                    incumbent = candidates[0]
                    improved = True
            rounds += 1
            stall = 0 if improved else stall + 1
            logger.debug("HQPU round %d: energy=%s feasible=%s stall=%d", rounds,
                         None if incumbent is None else f"{incumbent.energy:.6f}",
                         None if incumbent is None else incumbent.feasible, stall)
            if stall >= config.stall_rounds:
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    return HybridOutcome(incumbent, rounds, timed_out, n_e, max_chain)


def solve_hqpu(problem: Union[FjsspInstance, Bqm], config: SolverConfig) -> SolveReport:
    """並列ハイブリッド（インスタンスなら復号まで、BQM ならエネルギー最小化のみ）"""
    if config.kind is not SolverKind.HQPU:
        raise ValueError(f"solve_hqpu requires kind HQPU (got {config.kind.value})")
    started = time.perf_counter()
    if isinstance(problem, Bqm):
        instance, table, bqm = None, None, problem
        feasibility = None
    else:
        instance = problem
        table, bqm = _prepare(instance, config)

        def feasibility(bits):
            return decode(instance, table, bits).feasible

    n_v, n_q = count_interactions(bqm)
    outcome = hybrid_minimize(bqm, config, feasibility)
    status = SolveStatus.TIMED_OUT if outcome.timed_out else SolveStatus.SOLVED
    if outcome.incumbent is None:
        return _report(config, started, status, n_v, n_q, rounds=outcome.rounds)

    bits = outcome.incumbent.bits
    decoded = decode(instance, table, bits) if instance is not None else None
    report = _report(config, started, status, n_v, n_q, bits, outcome.incumbent.energy, decoded,
                     n_e=outcome.n_e, max_chain_length=outcome.max_chain_length, rounds=outcome.rounds)
    logger.info("HQPU: n_v=%d n_q=%d rounds=%d makespan=%s status=%s elapsed=%.2fs",
                n_v, n_q, outcome.rounds, report.makespan, status.value, report.elapsed)
    return report


# ============================================
# IHQPU
# ============================================

class _Occupancy:
    """確定済み工程の機械ごとの占有区間"""

    def __init__(self):
        self.intervals: Dict[int, List[Tuple[int, int]]] = {}

    def collides(self, machine: int, start: int, finish: int) -> bool:
        return any(start < f and s < finish for s, f in self.intervals.get(machine, ()))

    def earliest_free(self, machine: int, lower: int, duration: int) -> int:
        t = lower
        for s, f in sorted(self.intervals.get(machine, ())):
            if t + duration <= s:
                break
            if t < f:
                t = f
        return t

    def add(self, machine: int, start: int, finish: int):
        self.intervals.setdefault(machine, []).append((start, finish))


class _LoopWindows(NamedTuple):
    candidates: Dict[Tuple[int, int], Tuple[int, List[Tuple[int, int]]]]
    horizon: int
    extensions: int


def _job_windows(instance: FjsspInstance, job: int, occupancy: _Occupancy, t_window: int,
                 horizon: int) -> _LoopWindows:
    """確定済み区間と衝突しない左詰めの時間窓"""
    candidates = {}
    extensions = 0
    lower = 0
    for j, operation in enumerate(instance.jobs[job].operations):
        starts = {e.machine: occupancy.earliest_free(e.machine, lower, e.time) for e in operation.eligible}
        base = min(starts.values())
        width = t_window
        while True:
            horizon = max(horizon, base + width - 1 + operation.max_time)
            pairs = [(e.machine, t)
                     for e in operation.eligible
                     for t in range(base, base + width)
                     if t + e.time <= horizon and not occupancy.collides(e.machine, t, t + e.time)]
            if pairs:
                break
            width += t_window
            extensions += 1
        candidates[(job, j)] = (base, pairs)
        lower = min(starts[e.machine] + e.time for e in operation.eligible)
    return _LoopWindows(candidates, horizon, extensions)


def _greedy_place(instance: FjsspInstance, jobs: Sequence[int], occupancy: _Occupancy) -> List[ScheduledOperation]:
    """工程を最早終了の機械・時刻に順に置く（占有は更新する）"""
    placed = []
    for a in jobs:
        ready = 0
        for j, operation in enumerate(instance.jobs[a].operations):
            options = []
            for e in operation.eligible:
                start = occupancy.earliest_free(e.machine, ready, e.time)
                options.append((start + e.time, e.machine, start))
            finish, machine, start = min(options)
            occupancy.add(machine, start, finish)
            placed.append(ScheduledOperation(job=a, op=j, machine=machine, start=start, finish=finish))
            ready = finish
    return placed


def solve_ihqpu(instance: FjsspInstance, config: SolverConfig) -> SolveReport:
    """閾値以下なら HQPU に委譲、超えればボトルネック順のジョブ部分集合ごとに解いて統合する"""
    if config.kind is not SolverKind.IHQPU:
        raise ValueError(f"solve_ihqpu requires kind IHQPU (got {config.kind.value})")
    started = time.perf_counter()
    # 閾値判定は変数表だけで行う（委譲時の BQM は HQPU 側で作る）
    table = build_variable_table(instance, config.t_window)
    if len(table) <= config.partition_threshold:
        report = solve_hqpu(instance, config.model_copy(update={"kind": SolverKind.HQPU}))
        return report.model_copy(update={"config": config.echo(), "elapsed": time.perf_counter() - started})

    weights = config.weights or PenaltyWeights.default(instance.num_operations, config.t_window)
    n_v, n_q = count_interactions(build_bqm(instance, table, weights))
    cap = config.subset_size_cap or instance.num_jobs
    occupancy = _Occupancy()
    horizon = instance.horizon
    remaining = list(range(instance.num_jobs))
    fixed: List[ScheduledOperation] = []
    trace: List[LoopTrace] = []
    total_energy = 0.0
    timed_out = False
    n_e = None
    max_chain = None

    while remaining:
        order = [f.job for f in bottleneck_factors(instance, remaining)]

        # 閾値に収まる最大の先頭部分（最低1ジョブ）
        chosen: List[int] = []
        candidates: Dict = {}
        loop_horizon = horizon
        extensions = 0
        for a in order[:cap]:
            windows = _job_windows(instance, a, occupancy, config.t_window, loop_horizon)
            size = sum(len(pairs) for _, pairs in windows.candidates.values())
            current = sum(len(pairs) for _, pairs in candidates.values())
            if chosen and current + size > config.partition_threshold:
                break
            chosen.append(a)
            candidates.update(windows.candidates)
            loop_horizon = windows.horizon
            extensions += windows.extensions

        sub_table = VariableTable(instance, candidates, horizon=loop_horizon)
        sub_bqm = build_bqm(instance, sub_table, weights)
        sub_v, sub_q = count_interactions(sub_bqm)
        budget = max(1.0, config.time_limit * len(sub_table) / len(table))

        def feasibility(bits, _table=sub_table):
            return decode(instance, _table, bits).feasible

        outcome = hybrid_minimize(sub_bqm, config.model_copy(update={"seed": derive_seed(config.seed, len(trace))}),
                                  feasibility, time_limit=budget)
        timed_out = timed_out or outcome.timed_out
        if outcome.n_e is not None:
            n_e = max(n_e or 0, outcome.n_e)
            max_chain = max(max_chain or 0, outcome.max_chain_length)

        decoded = decode(instance, sub_table, outcome.incumbent.bits) if outcome.incumbent is not None else None
        repaired = decoded is None or not decoded.feasible
        if repaired:
            logger.warning("IHQPU loop %d: sub-schedule infeasible, placing jobs %s greedily", len(trace), chosen)
            placed = _greedy_place(instance, chosen, occupancy)
        else:
            placed = list(decoded.schedule.operations)
            for o in placed:
                occupancy.add(o.machine, o.start, o.finish)
            total_energy += outcome.incumbent.energy

        fixed.extend(placed)
        loop_horizon = max([loop_horizon] + [o.finish for o in placed])
        horizon = loop_horizon
        trace.append(LoopTrace(loop=len(trace), jobs=chosen, n_v=sub_v, n_q=sub_q,
                               makespan=max(o.finish for o in placed) if placed else 0,
                               energy=None if repaired else outcome.incumbent.energy,
                               horizon=horizon, repaired=repaired, window_extensions=extensions))
        logger.debug("IHQPU loop %d: jobs=%s n_v=%d repaired=%s", len(trace) - 1, chosen, sub_v, repaired)
        remaining = [a for a in remaining if a not in chosen]

    schedule = Schedule.from_operations(fixed)
    violations = verify_schedule(instance, schedule)
    feasible = not violations
    status = SolveStatus.TIMED_OUT if timed_out else SolveStatus.SOLVED
    report = SolveReport(
        config=config.echo(),
        elapsed=time.perf_counter() - started,
        best_energy=total_energy,
        schedule=schedule if feasible else None,
        violations=violations,
        makespan=schedule.makespan if feasible else None,
        feasible=feasible,
        n_v=n_v,
        n_q=n_q,
        n_e=n_e,
        max_chain_length=max_chain,
        status=status,
        rounds=len(trace),
        loop_trace=trace,
    )
    logger.info("IHQPU: %d loops, n_v=%d n_q=%d makespan=%s status=%s elapsed=%.2fs",
                len(trace), n_v, n_q, report.makespan, status.value, report.elapsed)
    return report


SOLVERS = {
    SolverKind.CQPU: solve_cqpu,
    SolverKind.HQPU: solve_hqpu,
    SolverKind.IHQPU: solve_ihqpu,
}


def solve(instance: FjsspInstance, config: SolverConfig) -> SolveReport:
    return SOLVERS[config.kind](instance, config)
