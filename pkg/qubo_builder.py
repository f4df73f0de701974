#!/usr/bin/env python3

"""
FJSSP → BQM（QUBO/Ising）変換
変数表の構築、ペナルティ項と makespan 目的関数の展開、エネルギー評価、サンプルの復号
"""

import logging
import types
from collections import defaultdict
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat
from scipy import sparse

from fjssp_instance import FjsspInstance, earliest_starts

logger = logging.getLogger(__name__)

OpKey = Tuple[int, int]


class EmptyWindowError(ValueError):
    """時間窓を horizon で切り詰めた結果、変数が残らない工程"""

    def __init__(self, job: int, op: int, detail: str = ""):
        self.job = job
        self.op = op
        super().__init__(f"operation ({job}, {op}) has no admissible start time{': ' + detail if detail else ''}")


class SampleLengthError(ValueError):
    """サンプル長と変数数の不一致"""


# ============================================
# 変数表
# ============================================

class Variable(NamedTuple):
    """x_ijkt: ジョブ i の工程 j が機械 k で時刻 t に開始"""
    job: int
    op: int
    machine: int
    start: int


class VariableTable:
    """(i, j, k, t) と連番インデックスの対応表

    entries は (i, j, k, t) の辞書順。base は makespan 項の基準時刻
    （通常は最早開始時刻、反復分割では調整後の窓の開始）。
    """

    def __init__(self, instance: FjsspInstance, candidates: Mapping[OpKey, Tuple[int, Iterable[Tuple[int, int]]]],
                 horizon: Optional[int] = None):
        self.horizon = instance.horizon if horizon is None else horizon
        entries = []
        base = {}
        for (i, j), (op_base, pairs) in candidates.items():
            base[(i, j)] = op_base
            for k, t in pairs:
                entries.append(Variable(i, j, k, t))
        entries.sort()
        self.entries: Tuple[Variable, ...] = tuple(entries)
        self.index: Dict[Variable, int] = {v: idx for idx, v in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise ValueError("duplicate variables in table")
        self.base: Dict[OpKey, int] = dict(sorted(base.items()))

        durations = []
        for v in self.entries:
            p = instance.operation(v.job, v.op).time_on(v.machine)
            if p is None:
                raise ValueError(f"machine {v.machine} is not eligible for operation ({v.job}, {v.op})")
            durations.append(p)
        self.durations = np.asarray(durations, dtype=np.int64)
        self.durations.setflags(write=False)

        # (i, j) ごとの連続区間（辞書順なので工程ごとに連続する）
        self.op_slices: Dict[OpKey, range] = {}
        start = 0
        for idx in range(1, len(self.entries) + 1):
            if idx == len(self.entries) or self.entries[idx][:2] != self.entries[start][:2]:
                self.op_slices[tuple(self.entries[start][:2])] = range(start, idx)
                start = idx
        for key in self.base:
            if key not in self.op_slices:
                raise EmptyWindowError(*key)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VariableTable):
            return NotImplemented
        return self.entries == other.entries and self.base == other.base and self.horizon == other.horizon

    @property
    def operations(self) -> List[OpKey]:
        return list(self.op_slices)

    def window(self, job: int, op: int) -> List[int]:
        """工程の開始時刻候補（機械をまたいだ和集合）"""
        return sorted({self.entries[idx].start for idx in self.op_slices[(job, op)]})

    def variables_of(self, job: int, op: int) -> range:
        return self.op_slices[(job, op)]


def build_variable_table(instance: FjsspInstance, t_window: int, horizon: Optional[int] = None) -> VariableTable:
    """時間窓 {est, ..., est + T_r - 1} ∩ [0, T - p] で変数を列挙"""
    if t_window < 1:
        raise ValueError(f"t_window must be >= 1 (got {t_window})")
    horizon = instance.horizon if horizon is None else horizon
    est = earliest_starts(instance)
    candidates = {}
    for i, j, operation in instance.iter_operations():
        base = est[(i, j)]
        pairs = [(e.machine, t)
                 for e in operation.eligible
                 for t in range(base, base + t_window)
                 if t >= 0 and t + e.time <= horizon]
        if not pairs:
            raise EmptyWindowError(i, j, f"window starts at {base}, horizon {horizon}")
        candidates[(i, j)] = (base, pairs)
    return VariableTable(instance, candidates, horizon=horizon)


# ============================================
# BQM
# ============================================

class Bqm:
    """E(x) = offset + Σ linear_i x_i + Σ_{a<b} quadratic_ab x_a x_b

    quadratic のキーは a < b。ちょうど 0 に打ち消し合った係数は保持しない。
    """

    def __init__(self, linear: Sequence[float], quadratic: Optional[Mapping[Tuple[int, int], float]] = None,
                 offset: float = 0.0):
        lin = np.array(linear, dtype=np.float64)
        n = len(lin)
        quad: Dict[Tuple[int, int], float] = {}
        for (a, b), coeff in (quadratic or {}).items():
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"quadratic term ({a}, {b}) outside 0..{n - 1}")
            if a == b:
                lin[a] += coeff  # x*x = x
                continue
            key = (a, b) if a < b else (b, a)
            quad[key] = quad.get(key, 0.0) + coeff
        quad = {key: quad[key] for key in sorted(quad) if quad[key] != 0.0}

        lin.setflags(write=False)
        self._linear = lin
        self._quadratic = types.MappingProxyType(quad)
        self.offset = float(offset)
        self._rows = np.fromiter((a for a, _ in quad), dtype=np.int64, count=len(quad))
        self._cols = np.fromiter((b for _, b in quad), dtype=np.int64, count=len(quad))
        self._vals = np.fromiter(quad.values(), dtype=np.float64, count=len(quad))
        self._adjacency = None

    @classmethod
    def empty(cls, num_variables: int = 0) -> "Bqm":
        return cls(np.zeros(num_variables))

    @property
    def num_variables(self) -> int:
        return len(self._linear)

    @property
    def linear(self) -> np.ndarray:
        return self._linear

    @property
    def quadratic(self) -> Mapping[Tuple[int, int], float]:
        return self._quadratic

    @property
    def quadratic_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._rows, self._cols, self._vals

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bqm):
            return NotImplemented
        return (self.num_variables == other.num_variables
                and np.array_equal(self._linear, other._linear)
                and dict(self._quadratic) == dict(other._quadratic)
                and self.offset == other.offset)

    def __repr__(self) -> str:
        return f"Bqm(num_variables={self.num_variables}, num_interactions={len(self._quadratic)}, offset={self.offset})"

    def adjacency(self) -> sparse.csr_matrix:
        """対称な結合行列（対角0）"""
        if self._adjacency is None:
            n = self.num_variables
            rows = np.concatenate([self._rows, self._cols])
            cols = np.concatenate([self._cols, self._rows])
            vals = np.concatenate([self._vals, self._vals])
            self._adjacency = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return self._adjacency

    def interaction_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.num_variables))
        graph.add_edges_from(self._quadratic)
        return graph

    def local_fields(self, sample: np.ndarray) -> np.ndarray:
        """f_i = linear_i + Σ_j Q_ij x_j（フリップ差分は (1 - 2x_i) f_i）"""
        x = np.asarray(sample, dtype=np.float64)
        return self._linear + self.adjacency() @ x

    def energy(self, sample) -> float:
        x = np.asarray(sample, dtype=np.float64)
        if x.shape != (self.num_variables,):
            raise SampleLengthError(f"sample has length {x.size}, BQM has {self.num_variables} variables")
        return float(self.offset + self._linear @ x + np.sum(self._vals * x[self._rows] * x[self._cols]))

    def energies(self, samples) -> np.ndarray:
        X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if X.shape[1] != self.num_variables:
            raise SampleLengthError(f"samples have length {X.shape[1]}, BQM has {self.num_variables} variables")
        return self.offset + X @ self._linear + (X[:, self._rows] * X[:, self._cols]) @ self._vals

    def scaled(self, factor: float) -> "Bqm":
        return Bqm(self._linear * factor, {key: value * factor for key, value in self._quadratic.items()},
                   self.offset * factor)


def energy(bqm: Bqm, sample) -> float:
    """E(x) を評価（長さ不一致は SampleLengthError）"""
    return bqm.energy(sample)


def count_interactions(bqm: Bqm) -> Tuple[int, int]:
    """(n_v, n_q): 何らかの項を持つ変数数と非零の二次項数"""
    active = bqm.linear != 0.0
    rows, cols, _ = bqm.quadratic_arrays
    active[rows] = True
    active[cols] = True
    return int(np.count_nonzero(active)), len(bqm.quadratic)


def write_bqm_text(bqm: Bqm, path: Path):
    """テキスト形式でBQMを書き出す"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(f"nvars {bqm.num_variables}\n")
        for idx, coeff in enumerate(bqm.linear):
            if coeff != 0.0:
                f.write(f"lin {idx} {float(coeff)!r}\n")
        for (a, b), coeff in bqm.quadratic.items():
            f.write(f"quad {a} {b} {float(coeff)!r}\n")
        f.write(f"offset {bqm.offset!r}\n")


# ============================================
# Ising
# ============================================

class IsingModel:
    """E(s) = offset + Σ h_i s_i + Σ_{a<b} J_ab s_a s_b, s ∈ {-1, +1}"""

    def __init__(self, h: Sequence[float], J: Optional[Mapping[Tuple[int, int], float]] = None, offset: float = 0.0):
        self.h = np.array(h, dtype=np.float64)
        couplings: Dict[Tuple[int, int], float] = {}
        for (a, b), value in (J or {}).items():
            if a == b:
                offset += value  # s*s = 1
                continue
            key = (a, b) if a < b else (b, a)
            couplings[key] = couplings.get(key, 0.0) + value
        self.J = {key: couplings[key] for key in sorted(couplings) if couplings[key] != 0.0}
        self.offset = float(offset)
        self._rows = np.fromiter((a for a, _ in self.J), dtype=np.int64, count=len(self.J))
        self._cols = np.fromiter((b for _, b in self.J), dtype=np.int64, count=len(self.J))
        self._vals = np.fromiter(self.J.values(), dtype=np.float64, count=len(self.J))

    @property
    def num_variables(self) -> int:
        return len(self.h)

    def coupling_matrix(self) -> sparse.csr_matrix:
        n = self.num_variables
        rows = np.concatenate([self._rows, self._cols])
        cols = np.concatenate([self._cols, self._rows])
        vals = np.concatenate([self._vals, self._vals])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def max_abs_coefficient(self) -> float:
        values = np.concatenate([np.abs(self.h), np.abs(self._vals)])
        return float(values.max()) if values.size else 0.0

    def interaction_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.num_variables))
        graph.add_edges_from(self.J)
        return graph

    def energy(self, spins) -> float:
        s = np.asarray(spins, dtype=np.float64)
        if s.shape != (self.num_variables,):
            raise SampleLengthError(f"spin vector has length {s.size}, model has {self.num_variables} spins")
        return float(self.offset + self.h @ s + np.sum(self._vals * s[self._rows] * s[self._cols]))

    def energies(self, spins) -> np.ndarray:
        S = np.atleast_2d(np.asarray(spins, dtype=np.float64))
        return self.offset + S @ self.h + (S[:, self._rows] * S[:, self._cols]) @ self._vals


def to_ising(bqm: Bqm) -> IsingModel:
    """x = (1 + s) / 2 で変数変換（エネルギーは全状態で一致）"""
    rows, cols, vals = bqm.quadratic_arrays
    h = bqm.linear / 2.0
    h = h + np.bincount(rows, weights=vals, minlength=bqm.num_variables) / 4.0
    h = h + np.bincount(cols, weights=vals, minlength=bqm.num_variables) / 4.0
    J = {key: value / 4.0 for key, value in bqm.quadratic.items()}
    offset = bqm.offset + float(np.sum(bqm.linear)) / 2.0 + float(np.sum(vals)) / 4.0
    return IsingModel(h, J, offset)


def from_ising(ising: IsingModel) -> Bqm:
    """s = 2x - 1 で QUBO に戻す"""
    n = ising.num_variables
    vals = ising._vals
    linear = 2.0 * ising.h
    linear = linear - 2.0 * np.bincount(ising._rows, weights=vals, minlength=n)
    linear = linear - 2.0 * np.bincount(ising._cols, weights=vals, minlength=n)
    quadratic = {key: 4.0 * value for key, value in ising.J.items()}
    offset = ising.offset - float(np.sum(ising.h)) + float(np.sum(vals))
    return Bqm(linear, quadratic, offset)


# ============================================
# ペナルティ項
# ============================================

class PenaltyWeights(BaseModel):
    """ラグランジュ係数 α（開始一意）, β（先行）, γ（重なり）, δ（makespan）"""
    model_config = ConfigDict(frozen=True)

    alpha: PositiveFloat = 1.0
    beta: PositiveFloat = 1.0
    gamma: PositiveFloat = 1.0
    delta: PositiveFloat

    @classmethod
    def default(cls, num_operations: int, t_window: int) -> "PenaltyWeights":
        """制約違反1件が目的関数の全レンジより重くなる既定値"""
        delta = 1.0 / (2.0 * max(num_operations, 1) * max(t_window - 1, 1))
        return cls(alpha=1.0, beta=1.0, gamma=1.0, delta=delta)

    def dominates_objective(self, num_operations: int, t_window: int) -> bool:
        bound = self.delta * (t_window - 1) * num_operations
        return min(self.alpha, self.beta, self.gamma) > bound

    def scaled(self, factor: float) -> "PenaltyWeights":
        return PenaltyWeights(alpha=self.alpha * factor, beta=self.beta * factor,
                              gamma=self.gamma * factor, delta=self.delta * factor)


class _Accumulator:
    def __init__(self, num_variables: int):
        self.linear = np.zeros(num_variables)
        self.quadratic: Dict[Tuple[int, int], float] = defaultdict(float)
        self.offset = 0.0

    def add_quadratic(self, a: int, b: int, coeff: float):
        key = (a, b) if a < b else (b, a)
        self.quadratic[key] += coeff

    def to_bqm(self) -> Bqm:
        return Bqm(self.linear, self.quadratic, self.offset)


def _add_onestart(acc: _Accumulator, table: VariableTable, weight: float):
    # (Σ x - 1)^2 = 1 - Σ x + 2 Σ_{a<b} x_a x_b
    for span in table.op_slices.values():
        acc.offset += weight
        for a in span:
            acc.linear[a] -= weight
            for b in range(a + 1, span.stop):
                acc.add_quadratic(a, b, 2.0 * weight)


def _add_precedence(acc: _Accumulator, table: VariableTable, weight: float):
    entries, durations = table.entries, table.durations
    for (i, j), span in table.op_slices.items():
        successor = table.op_slices.get((i, j + 1))
        if successor is None:
            continue
        for a in span:
            finish = entries[a].start + durations[a]
            for b in successor:
                if entries[b].start < finish:
                    acc.add_quadratic(a, b, weight)


def _add_overlap(acc: _Accumulator, table: VariableTable, weight: float):
    by_machine = defaultdict(list)
    for idx, v in enumerate(table.entries):
        by_machine[v.machine].append((v.start, int(table.durations[idx]), idx, (v.job, v.op)))
    for items in by_machine.values():
        items.sort()
        for pos, (start, duration, a, op_a) in enumerate(items):
            for start_b, _, b, op_b in items[pos + 1:]:
                if start_b >= start + duration:
                    break
                if op_a != op_b:
                    acc.add_quadratic(a, b, weight)


def _add_makespan(acc: _Accumulator, table: VariableTable, weight: float):
    for idx, v in enumerate(table.entries):
        acc.linear[idx] += weight * (v.start - table.base[(v.job, v.op)])


class HamiltonianTerms(NamedTuple):
    """重みなしの4項（制約3項 + 目的関数）"""
    onestart: Bqm
    precedence: Bqm
    overlap: Bqm
    makespan: Bqm

    def constraint_energy(self, sample, weights: Optional["PenaltyWeights"] = None) -> float:
        w = weights or PenaltyWeights(delta=1.0)
        return (w.alpha * self.onestart.energy(sample) + w.beta * self.precedence.energy(sample)
                + w.gamma * self.overlap.energy(sample))


def hamiltonian_terms(instance: FjsspInstance, table: VariableTable) -> HamiltonianTerms:
    n = len(table)
    accs = [_Accumulator(n) for _ in range(4)]
    _add_onestart(accs[0], table, 1.0)
    _add_precedence(accs[1], table, 1.0)
    _add_overlap(accs[2], table, 1.0)
    _add_makespan(accs[3], table, 1.0)
    return HamiltonianTerms(*(acc.to_bqm() for acc in accs))


def build_bqm(instance: FjsspInstance, table: VariableTable, weights: Optional[PenaltyWeights] = None) -> Bqm:
    """α·H_onestart + β·H_precedence + γ·H_overlap + δ·H_makespan"""
    if weights is None:
        weights = PenaltyWeights.default(len(table.op_slices), _window_width(table))
    acc = _Accumulator(len(table))
    _add_onestart(acc, table, weights.alpha)
    _add_precedence(acc, table, weights.beta)
    _add_overlap(acc, table, weights.gamma)
    _add_makespan(acc, table, weights.delta)
    bqm = acc.to_bqm()
    logger.debug("built BQM: %d variables, %d interactions", bqm.num_variables, len(bqm.quadratic))
    return bqm


def _window_width(table: VariableTable) -> int:
    widths = [len(table.window(*key)) for key in table.op_slices]
    return max(widths) if widths else 1


# ============================================
# 復号
# ============================================

class DiagnosticKind(str, Enum):
    ONE_START = "OneStart"
    PRECEDENCE = "Precedence"
    OVERLAP = "Overlap"
    WINDOW = "Window"


class Diagnostic(BaseModel):
    """制約違反1件"""
    model_config = ConfigDict(frozen=True)

    kind: DiagnosticKind
    detail: str
    operations: Tuple[OpKey, ...] = ()
    variables: Tuple[int, ...] = ()


class ScheduledOperation(BaseModel):
    model_config = ConfigDict(frozen=True)

    job: int
    op: int
    machine: int
    start: int
    finish: int


class Schedule(BaseModel):
    """工程ごとの (機械, 開始, 終了)"""
    model_config = ConfigDict(frozen=True)

    operations: Tuple[ScheduledOperation, ...]

    @classmethod
    def from_operations(cls, operations: Iterable[ScheduledOperation]) -> "Schedule":
        return cls(operations=tuple(sorted(operations, key=lambda o: (o.job, o.op))))

    @property
    def makespan(self) -> int:
        return max((o.finish for o in self.operations), default=0)

    def get(self, job: int, op: int) -> Optional[ScheduledOperation]:
        for o in self.operations:
            if o.job == job and o.op == op:
                return o
        return None

    def by_operation(self) -> Dict[OpKey, ScheduledOperation]:
        return {(o.job, o.op): o for o in self.operations}


class DecodeResult(BaseModel):
    """復号結果（feasible のときだけ schedule を持つ）"""
    schedule: Optional[Schedule] = None
    violations: List[Diagnostic] = []

    @property
    def feasible(self) -> bool:
        return self.schedule is not None


def decode(instance: FjsspInstance, table: VariableTable, sample) -> DecodeResult:
    """サンプルをスケジュールに復号し、制約違反を列挙"""
    x = np.asarray(sample)
    if x.shape != (len(table),):
        raise SampleLengthError(f"sample has length {x.size}, table has {len(table)} variables")

    violations: List[Diagnostic] = []
    chosen: Dict[OpKey, int] = {}
    for (i, j), span in table.op_slices.items():
        on = [idx for idx in span if x[idx]]
        if len(on) == 1:
            chosen[(i, j)] = on[0]
        else:
            violations.append(Diagnostic(kind=DiagnosticKind.ONE_START,
                                         detail=f"operation ({i}, {j}) has {len(on)} start variables set",
                                         operations=((i, j),), variables=tuple(on)))

    entries, durations = table.entries, table.durations
    for (i, j), a in chosen.items():
        b = chosen.get((i, j + 1))
        if b is None:
            continue
        finish = entries[a].start + int(durations[a])
        if entries[b].start < finish:
            violations.append(Diagnostic(
                kind=DiagnosticKind.PRECEDENCE,
                detail=f"operation ({i}, {j + 1}) starts at {entries[b].start} before ({i}, {j}) finishes at {finish}",
                operations=((i, j), (i, j + 1)), variables=(a, b)))

    by_machine = defaultdict(list)
    for key, idx in chosen.items():
        by_machine[entries[idx].machine].append((entries[idx].start, int(durations[idx]), idx, key))
    for machine, items in sorted(by_machine.items()):
        items.sort()
        for pos, (start, duration, a, op_a) in enumerate(items):
            for start_b, _, b, op_b in items[pos + 1:]:
                if start_b >= start + duration:
                    break
                violations.append(Diagnostic(
                    kind=DiagnosticKind.OVERLAP,
                    detail=f"operations {op_a} and {op_b} overlap on machine {machine}",
                    operations=(op_a, op_b), variables=(a, b)))

    if violations:
        return DecodeResult(schedule=None, violations=violations)
    schedule = Schedule.from_operations(
        ScheduledOperation(job=entries[idx].job, op=entries[idx].op, machine=entries[idx].machine,
                           start=entries[idx].start, finish=entries[idx].start + int(durations[idx]))
        for idx in chosen.values())
    return DecodeResult(schedule=schedule, violations=[])


def encode_schedule(table: VariableTable, schedule: Schedule) -> np.ndarray:
    """スケジュールをサンプルに戻す（表にない割り当ては KeyError）"""
    x = np.zeros(len(table), dtype=np.int8)
    for o in schedule.operations:
        x[table.index[Variable(o.job, o.op, o.machine, o.start)]] = 1
    return x
