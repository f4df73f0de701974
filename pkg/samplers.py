#!/usr/bin/env python3

"""
BQM 用の古典サンプラー
シミュレーテッドアニーリング、タブー探索、経路積分モンテカルロによる量子アニーリング模擬（QPU の代替）
"""

import logging
import math
import time
from typing import Any, Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator
from scipy import sparse

from qubo_builder import Bqm, IsingModel, to_ising

logger = logging.getLogger(__name__)


# ============================================
# パラメータ
# ============================================

class SaParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta_min: PositiveFloat
    beta_max: PositiveFloat

    @model_validator(mode="after")
    def _check_range(self):
        if not self.beta_min < self.beta_max:
            raise ValueError(f"beta_min ({self.beta_min}) must be < beta_max ({self.beta_max})")
        return self


class TabuParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    tenure: Optional[PositiveInt] = None  # None: min(20, n/4)
    restarts: int = Field(default=0, ge=0)


class SqaParams(BaseModel):
    """正規化単位（Ising 係数の最大絶対値 = 1）"""
    model_config = ConfigDict(frozen=True)

    trotter_slices: int = Field(default=8, ge=2)
    temperature: PositiveFloat = 0.1
    gamma_initial: float = Field(default=3.0, ge=0.0)
    gamma_final: float = Field(default=1e-3, ge=0.0)

    @model_validator(mode="after")
    def _check_schedule(self):
        # 等しい値は固定磁場の実行として許可
        if self.gamma_final > self.gamma_initial:
            raise ValueError(f"gamma_final ({self.gamma_final}) must not exceed gamma_initial ({self.gamma_initial})")
        return self


class SamplerParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    num_reads: PositiveInt = 1
    sweeps: PositiveInt = 1000
    sa: Optional[SaParams] = None
    tabu: Optional[TabuParams] = None
    sqa: Optional[SqaParams] = None


def make_rng(seed: int) -> np.random.Generator:
    """PCG64（プラットフォーム間で再現可能）"""
    return np.random.Generator(np.random.PCG64(seed))


# ============================================
# サンプル集合
# ============================================

class SampleSet:
    """エネルギー昇順のサンプル集合（同エネルギーは生成順）"""

    def __init__(self, samples: np.ndarray, energies: np.ndarray, info: Optional[Dict[str, Any]] = None):
        samples = np.asarray(samples, dtype=np.int8)
        energies = np.asarray(energies, dtype=np.float64)
        order = np.argsort(energies, kind="stable")
        self.samples = samples[order]
        self.energies = energies[order]
        self.samples.setflags(write=False)
        self.energies.setflags(write=False)
        self.info: Dict[str, Any] = dict(info or {})

    @classmethod
    def from_samples(cls, bqm: Bqm, samples, info: Optional[Dict[str, Any]] = None) -> "SampleSet":
        """エネルギーは bqm から再計算"""
        samples = np.atleast_2d(np.asarray(samples, dtype=np.int8))
        if samples.shape[1] == 0:
            energies = np.full(samples.shape[0], bqm.offset)
        else:
            energies = bqm.energies(samples)
        return cls(samples, energies, info)

    def __len__(self) -> int:
        return len(self.energies)

    def __iter__(self):
        for bits, value in zip(self.samples, self.energies):
            yield bits, float(value)

    @property
    def first(self) -> Tuple[np.ndarray, float]:
        return self.samples[0], float(self.energies[0])

    @property
    def lowest_energy(self) -> float:
        return float(self.energies[0])

    def concatenate(self, other: "SampleSet") -> "SampleSet":
        return SampleSet(np.vstack([self.samples, other.samples]),
                         np.concatenate([self.energies, other.energies]), self.info)


def _info(name: str, params: SamplerParams, started: float, **extra) -> Dict[str, Any]:
    info = {"sampler": name, "params": params.model_dump(), "elapsed": time.perf_counter() - started}
    info.update(extra)
    return info


def _random_bits(rng: np.random.Generator, reads: int, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=(reads, n), dtype=np.int8)


def _initial_states(rng, reads: int, n: int, initial_states) -> np.ndarray:
    X = _random_bits(rng, reads, n)
    if initial_states is not None:
        init = np.atleast_2d(np.asarray(initial_states, dtype=np.int8))
        if init.shape[1] != n:
            raise ValueError(f"initial states have length {init.shape[1]}, expected {n}")
        rows = min(reads, init.shape[0])
        X[:rows] = init[:rows]
    return X


def color_classes(graph: nx.Graph) -> List[np.ndarray]:
    """同じクラスの変数同士は結合を持たない（同時に更新できる）"""
    if graph.number_of_nodes() == 0:
        return []
    coloring = nx.greedy_color(graph, strategy="largest_first")
    classes: Dict[int, List[int]] = {}
    for node, color in coloring.items():
        classes.setdefault(color, []).append(node)
    return [np.asarray(sorted(nodes), dtype=np.int64) for _, nodes in sorted(classes.items())]


# ============================================
# 差分エネルギー
# ============================================

class IncrementalState:
    """局所場を保持して単一フリップのエネルギー差を O(次数) で更新"""

    def __init__(self, bqm: Bqm, sample):
        self._adjacency = bqm.adjacency()
        self.x = np.array(sample, dtype=np.int8)
        self.fields = bqm.local_fields(self.x)
        self.energy = bqm.energy(self.x)

    def delta(self, i: int) -> float:
        return float((1 - 2 * int(self.x[i])) * self.fields[i])

    def flip(self, i: int) -> float:
        d = self.delta(i)
        step = 1 - 2 * int(self.x[i])
        self.x[i] ^= 1
        row = self._adjacency.getrow(i)
        self.fields[row.indices] += step * row.data
        self.energy += d
        return d


def default_beta_range(bqm: Bqm) -> Tuple[float, float]:
    """beta_min = ln2 / ΔE_max, beta_max = ln100 / ΔE_min"""
    abs_adj = abs(bqm.adjacency())
    bounds = np.abs(bqm.linear) + np.asarray(abs_adj.sum(axis=1)).ravel()
    coefficients = np.concatenate([np.abs(bqm.linear), np.abs(bqm.quadratic_arrays[2])])
    coefficients = coefficients[coefficients > 0]
    if coefficients.size == 0:
        return 0.1, 1.0
    delta_max = float(bounds.max())
    delta_min = float(coefficients.min())
    beta_min = math.log(2) / delta_max
    beta_max = math.log(100) / delta_min
    if beta_max <= beta_min:
        beta_max = beta_min * 10.0
    return beta_min, beta_max


# ============================================
# シミュレーテッドアニーリング
# ============================================

def simulated_annealing(bqm: Bqm, params: SamplerParams, initial_states=None) -> SampleSet:
    """幾何スケジュールの Metropolis 単一フリップ（独立集合ごとに全読み出しをまとめて更新）"""
    started = time.perf_counter()
    rng = make_rng(params.seed)
    n = bqm.num_variables
    reads = params.num_reads
    if params.sa is not None:
        beta_min, beta_max = params.sa.beta_min, params.sa.beta_max
    else:
        beta_min, beta_max = default_beta_range(bqm)

    X = _initial_states(rng, reads, n, initial_states)
    if n == 0:
        return SampleSet.from_samples(bqm, X, _info("simulated_annealing", params, started))

    adjacency = bqm.adjacency()
    classes = [(cls, adjacency[:, cls].tocsr()) for cls in color_classes(bqm.interaction_graph())]
    fields = bqm.linear + (adjacency @ X.T.astype(np.float64)).T

    for beta in np.geomspace(beta_min, beta_max, params.sweeps):
        for cls, columns in classes:
            x = X[:, cls]
            step = 1 - 2 * x.astype(np.float64)
            delta = step * fields[:, cls]
            accept = (delta <= 0) | (rng.random(delta.shape) < np.exp(-beta * np.clip(delta, 0, None)))
            if not accept.any():
                continue
            dx = np.where(accept, step, 0.0)
            X[:, cls] = x + dx.astype(np.int8)
            fields += (columns @ dx.T).T

    sampleset = SampleSet.from_samples(bqm, X, _info("simulated_annealing", params, started,
                                                     beta_range=(beta_min, beta_max)))
    logger.debug("SA: %d reads, best energy %.6f", reads, sampleset.lowest_energy)
    return sampleset


# ============================================
# タブー探索
# ============================================

def _tabu_run(bqm: Bqm, start: np.ndarray, iterations: int, tenure: int,
              rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    state = IncrementalState(bqm, start)
    n = len(state.x)
    tabu_until = np.zeros(n, dtype=np.int64)
    best_x = state.x.copy()
    best_energy = state.energy
    for it in range(iterations):
        delta = (1 - 2 * state.x.astype(np.float64)) * state.fields
        # 改善解なら tabu でも許可（aspiration）
        allowed = (tabu_until <= it) | (state.energy + delta < best_energy - 1e-12)
        if not allowed.any():
            allowed[:] = True
        masked = np.where(allowed, delta, np.inf)
        lowest = masked.min()
        ties = np.flatnonzero(masked == lowest)
        i = int(ties[rng.integers(len(ties))]) if len(ties) > 1 else int(ties[0])
        state.flip(i)
        tabu_until[i] = it + 1 + tenure
        if state.energy < best_energy - 1e-12:
            best_energy = state.energy
            best_x = state.x.copy()
    return best_x, best_energy


def tabu_search(bqm: Bqm, params: SamplerParams, initial_states=None) -> SampleSet:
    """最急降下 + 直近フリップの tabu リスト + aspiration + ランダム再始動"""
    started = time.perf_counter()
    rng = make_rng(params.seed)
    n = bqm.num_variables
    tabu = params.tabu or TabuParams()
    tenure = tabu.tenure if tabu.tenure is not None else max(1, min(20, n // 4))
    tenure = min(tenure, max(n - 1, 0))

    X = _initial_states(rng, params.num_reads, n, initial_states)
    if n == 0:
        return SampleSet.from_samples(bqm, X, _info("tabu_search", params, started))

    results = np.empty_like(X)
    for r in range(params.num_reads):
        best_x, best_energy = _tabu_run(bqm, X[r], params.sweeps, tenure, rng)
        for _ in range(tabu.restarts):
            x, e = _tabu_run(bqm, _random_bits(rng, 1, n)[0], params.sweeps, tenure, rng)
            if e < best_energy - 1e-12:
                best_x, best_energy = x, e
        results[r] = best_x

    sampleset = SampleSet.from_samples(bqm, results, _info("tabu_search", params, started, tenure=tenure))
    logger.debug("tabu: %d reads, best energy %.6f", params.num_reads, sampleset.lowest_energy)
    return sampleset


# ============================================
# 量子アニーリング模擬（経路積分モンテカルロ）
# ============================================

def transverse_coupling(gamma: float, trotter_slices: int, temperature: float) -> float:
    """J⊥ = -(P·T/2) ln tanh(Γ / (P·T))"""
    pt = trotter_slices * temperature
    arg = max(gamma / pt, 1e-12)
    return -0.5 * pt * math.log(math.tanh(arg))


def _slice_groups(P: int) -> List[np.ndarray]:
    # 隣接しないスライスの組（P が奇数なら最後のスライスを単独に）
    if P % 2 == 0:
        return [np.arange(0, P, 2), np.arange(1, P, 2)]
    return [np.arange(0, P - 1, 2), np.arange(1, P, 2), np.asarray([P - 1])]


def _run_pimc(ising: IsingModel, params: SamplerParams, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """(最終レプリカ (R, P, n), 読み出しごとの最良レプリカ (R, n)) を返す"""
    sqa = params.sqa or SqaParams()
    n = ising.num_variables
    R, P, T = params.num_reads, sqa.trotter_slices, sqa.temperature
    PT = P * T

    scale = ising.max_abs_coefficient() or 1.0
    h = ising.h / scale
    J = ising.coupling_matrix() / scale
    J = sparse.csr_matrix(J)

    # 全スライスを同じランダム状態で初期化
    base = rng.choice(np.asarray([-1.0, 1.0]), size=(R, 1, n))
    S = np.repeat(base, P, axis=1)
    L = h + (J @ S.reshape(R * P, n).T).T.reshape(R, P, n)

    classes = [(cls, sparse.csr_matrix(J[cls, :])) for cls in color_classes(ising.interaction_graph())]
    groups = _slice_groups(P)
    prev_idx = (np.arange(P) - 1) % P
    next_idx = (np.arange(P) + 1) % P

    def replica_energies():
        return S @ h + 0.5 * np.einsum("rpn,rpn->rp", S, L - h)

    best = S[:, 0, :].copy()
    best_energy = np.full(R, np.inf)

    gammas = np.linspace(sqa.gamma_initial, sqa.gamma_final, params.sweeps)
    for gamma in gammas:
        j_perp = transverse_coupling(gamma, P, T)
        for cls, rows in classes:
            rows_t = rows.T.tocsr()
            for K in groups:
                s = S[:, K[:, None], cls[None, :]]
                neighbours = S[:, prev_idx[K][:, None], cls[None, :]] + S[:, next_idx[K][:, None], cls[None, :]]
                delta = -2.0 * s * L[:, K[:, None], cls[None, :]] + 2.0 * j_perp * s * neighbours
                accept = (delta <= 0) | (rng.random(delta.shape) < np.exp(-np.clip(delta, 0, None) / PT))
                if not accept.any():
                    continue
                dS = np.where(accept, -2.0 * s, 0.0)
                S[:, K[:, None], cls[None, :]] = s + dS
                update = (rows_t @ dS.reshape(-1, len(cls)).T).T
                L[:, K, :] += update.reshape(R, len(K), n)

            # 全スライス同時フリップ（スライス間結合は不変）
            s = S[:, :, cls]
            delta = np.sum(-2.0 * s * L[:, :, cls], axis=1)
            accept = (delta <= 0) | (rng.random(delta.shape) < np.exp(-np.clip(delta, 0, None) / PT))
            if accept.any():
                dS = np.where(accept[:, None, :], -2.0 * s, 0.0)
                S[:, :, cls] = s + dS
                update = (rows_t @ dS.reshape(-1, len(cls)).T).T
                L += update.reshape(R, P, n)

        energies = replica_energies()
        slice_best = energies.argmin(axis=1)
        slice_energy = energies[np.arange(R), slice_best]
        improved = slice_energy < best_energy - 1e-12
        if improved.any():
            best_energy[improved] = slice_energy[improved]
            best[improved] = S[np.flatnonzero(improved), slice_best[improved], :]

    return S, best


def sqa_replicas(ising: IsingModel, params: SamplerParams) -> np.ndarray:
    """最終レプリカのスピン (num_reads, P, n)"""
    if ising.num_variables == 0:
        P = (params.sqa or SqaParams()).trotter_slices
        return np.zeros((params.num_reads, P, 0))
    replicas, _ = _run_pimc(ising, params, make_rng(params.seed))
    return replicas


def sample_ising(ising: IsingModel, params: SamplerParams) -> np.ndarray:
    """読み出しごとの最良スピン配置 (num_reads, n)"""
    if ising.num_variables == 0:
        return np.zeros((params.num_reads, 0))
    _, best = _run_pimc(ising, params, make_rng(params.seed))
    return best


def simulated_quantum_annealing(bqm: Bqm, params: SamplerParams) -> SampleSet:
    """Ising 変換 → P 個のトロッタースライスで横磁場を線形に減衰 → QUBO ビットに戻す"""
    started = time.perf_counter()
    spins = sample_ising(to_ising(bqm), params)
    bits = ((spins + 1) // 2).astype(np.int8)
    sampleset = SampleSet.from_samples(bqm, bits, _info("simulated_quantum_annealing", params, started))
    logger.debug("SQA: %d reads, best energy %.6f", params.num_reads, sampleset.lowest_energy)
    return sampleset


SAMPLERS = {
    "sa": simulated_annealing,
    "tabu": tabu_search,
    "sqa": simulated_quantum_annealing,
}
