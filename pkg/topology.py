#!/usr/bin/env python3

"""
QPU ハードウェアグラフと minor embedding
Chimera 生成・エッジリスト読み込み・チェーン探索・埋め込み/逆埋め込み
"""

import logging
from collections import Counter
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import dwave_networkx as dnx
import minorminer
import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict

from qubo_builder import Bqm, IsingModel, to_ising

logger = logging.getLogger(__name__)


class TopologyFormatError(ValueError):
    """エッジリスト・トポロジー指定の書式エラー"""


class MissingChainError(ValueError):
    """埋め込みにチェーンのない論理変数"""

    def __init__(self, variable: int):
        self.variable = variable
        super().__init__(f"no chain for logical variable {variable}")


# ============================================
# トポロジー
# ============================================

class Topology:
    """量子ビット（ノード）とカプラ（エッジ）の無向グラフ"""

    def __init__(self, name: str, graph: nx.Graph):
        if nx.number_of_selfloops(graph):
            raise TopologyFormatError(f"topology '{name}' has self-loops")
        self.name = name
        self.graph = nx.freeze(nx.Graph(graph))

    @classmethod
    def from_edges(cls, name: str, edges: Iterable[Tuple[int, int]], nodes: Iterable[int] = ()) -> "Topology":
        graph = nx.Graph()
        graph.add_nodes_from(nodes)
        graph.add_edges_from(edges)
        return cls(name, graph)

    @property
    def nodes(self) -> FrozenSet[int]:
        return frozenset(self.graph.nodes)

    @property
    def edges(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset((min(a, b), max(a, b)) for a, b in self.graph.edges)

    @property
    def num_qubits(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def num_couplers(self) -> int:
        return self.graph.number_of_edges()

    def __repr__(self) -> str:
        return f"Topology({self.name!r}, qubits={self.num_qubits}, couplers={self.num_couplers})"


def chimera(rows: int, cols: int, shore: int = 4) -> Topology:
    """rows × cols 個の K_{shore,shore} セルを格子状に接続

    線形ラベルは ((row · cols + col) · 2 + 向き) · shore + k（向き 0 が縦で下のセルへ、1 が横で右のセルへ）
    """
    if min(rows, cols, shore) < 1:
        raise ValueError(f"chimera dimensions must be >= 1 (got {rows}, {cols}, {shore})")
    graph = dnx.chimera_graph(rows, cols, shore)
    return Topology(f"chimera:{rows},{cols},{shore}", graph)


def load_topology(path: Path) -> Topology:
    """1行1エッジ `u v`、`#` 以降はコメント"""
    path = Path(path)
    graph = nx.Graph()
    with path.open("r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise TopologyFormatError(f"{path.name}: line {lineno}: expected 'u v', got {raw.strip()!r}")
            try:
                u, v = int(fields[0]), int(fields[1])
            except ValueError:
                raise TopologyFormatError(f"{path.name}: line {lineno}: qubit indices must be integers, got {raw.strip()!r}")
            if u < 0 or v < 0:
                raise TopologyFormatError(f"{path.name}: line {lineno}: qubit indices must be non-negative")
            if u == v:
                raise TopologyFormatError(f"{path.name}: line {lineno}: self-loop on qubit {u}")
            graph.add_edge(u, v)
    return Topology(f"file:{path}", graph)


def parse_topology_spec(spec: str) -> Topology:
    """`chimera:R,C,S` または `file:path`"""
    kind, _, arg = spec.partition(":")
    if kind == "chimera":
        try:
            dims = [int(x) for x in arg.split(",")]
        except ValueError:
            raise TopologyFormatError(f"invalid chimera spec '{spec}' (expected chimera:R,C,S)")
        if len(dims) == 2:
            dims.append(4)
        if len(dims) != 3 or min(dims) < 1:
            raise TopologyFormatError(f"invalid chimera spec '{spec}' (expected chimera:R,C,S)")
        return chimera(*dims)
    if kind == "file" and arg:
        return load_topology(Path(arg))
    raise TopologyFormatError(f"unknown topology spec '{spec}' (use chimera:R,C,S or file:path)")


# ============================================
# 埋め込み
# ============================================

class Embedding:
    """論理変数 → 物理量子ビットのチェーン"""

    def __init__(self, chains: Mapping[int, Iterable[int]]):
        self.chains: Dict[int, FrozenSet[int]] = {}
        for v, chain in sorted(chains.items()):
            chain = frozenset(chain)
            if not chain:
                raise ValueError(f"empty chain for logical variable {v}")
            self.chains[v] = chain

    def __len__(self) -> int:
        return len(self.chains)

    def __getitem__(self, v: int) -> FrozenSet[int]:
        return self.chains[v]

    def __contains__(self, v: int) -> bool:
        return v in self.chains

    @property
    def n_e(self) -> int:
        """使用量子ビット数"""
        return sum(len(chain) for chain in self.chains.values())

    @property
    def max_chain_length(self) -> int:
        return max((len(chain) for chain in self.chains.values()), default=0)

    def to_dict(self) -> Dict[int, List[int]]:
        return {v: sorted(chain) for v, chain in self.chains.items()}


class EmbeddingFailure(BaseModel):
    """埋め込み失敗の診断（例外ではなく値）"""
    model_config = ConfigDict(frozen=True)

    reason: str
    first_unplaceable: Optional[int] = None
    qubits_free: int = 0


def validate_embedding(embedding: Embedding, logical: nx.Graph, topology: Topology) -> List[str]:
    """チェーンの素・連結・エッジ被覆を検査（空リストなら有効）"""
    problems = []
    owner: Dict[int, int] = {}
    for v, chain in embedding.chains.items():
        for q in chain:
            if q not in topology.graph:
                problems.append(f"chain of {v} uses unknown qubit {q}")
            elif q in owner:
                problems.append(f"qubit {q} shared by chains of {owner[q]} and {v}")
            else:
                owner[q] = v
        present = [q for q in chain if q in topology.graph]
        if present and not nx.is_connected(topology.graph.subgraph(present)):
            problems.append(f"chain of {v} is not connected")
    for v in logical.nodes:
        if v not in embedding:
            problems.append(f"no chain for logical variable {v}")
    for u, v in logical.edges:
        if u not in embedding or v not in embedding:
            continue
        if not any(owner.get(q) == v for p in embedding[u] if p in topology.graph
                   for q in topology.graph.neighbors(p)):
            problems.append(f"no coupler between chains of {u} and {v}")
    return problems


def _first_conflict(nodes: List[int], chains: Mapping[int, Iterable[int]], shared: Iterable[int]) -> int:
    """チェーンなし、または共有量子ビットを含む最初の論理変数"""
    shared = set(shared)
    for v in nodes:
        if v not in chains or shared.intersection(chains[v]):
            return v
    return nodes[0]


def find_embedding(logical: nx.Graph, topology: Topology, seed: int = 0,
                   effort: int = 10) -> Union[Embedding, EmbeddingFailure]:
    """論理グラフを物理グラフに minor embedding する

    探索は minorminer（重なりを許して張り直し、重なり量子ビットの費用を履歴で上げていく）。
    effort は再起動回数。孤立変数は残りの空き量子ビットに1個ずつ置く。
    """
    nodes = sorted(logical.nodes)
    if not nodes:
        return Embedding({})
    if len(nodes) > topology.num_qubits:
        return EmbeddingFailure(reason=f"{len(nodes)} logical variables exceed {topology.num_qubits} qubits",
                                first_unplaceable=nodes[topology.num_qubits], qubits_free=topology.num_qubits)

    # 論理グラフがそのまま部分グラフなら恒等埋め込み
    if all(v in topology.graph for v in nodes) and all(topology.graph.has_edge(u, v) for u, v in logical.edges):
        return Embedding({v: [v] for v in nodes})

    edges = sorted((min(u, v), max(u, v)) for u, v in logical.edges if u != v)
    chains: Dict[int, List[int]] = {}
    valid = True
    if edges:
        found, valid = minorminer.find_embedding(edges, topology.graph, random_seed=seed % 2 ** 31, tries=effort,
                                                 threads=1, return_overlap=True)
        chains = {v: sorted(chain) for v, chain in found.items() if chain}

    usage = Counter(q for chain in chains.values() for q in chain)
    shared = sorted(q for q, used in usage.items() if used > 1)
    missing = [v for v, degree in logical.degree() if degree and v not in chains]
    if not valid or shared or missing:
        first = _first_conflict(nodes, chains, shared)
        logger.warning("embedding failed: %d qubits shared, %d variables without a chain after %d tries",
                       len(shared), len(missing), effort)
        return EmbeddingFailure(reason=f"{len(shared)} qubits still shared after {effort} tries",
                                first_unplaceable=first, qubits_free=topology.num_qubits - len(usage))

    free = [q for q in sorted(topology.graph.nodes) if q not in usage]
    for v in nodes:
        if v in chains:
            continue
        if not free:
            return EmbeddingFailure(reason="no free qubit left for isolated variables",
                                    first_unplaceable=v, qubits_free=0)
        chains[v] = [free.pop(0)]

    embedding = Embedding(chains)
    logger.debug("embedded %d variables on %d qubits (max chain %d)", len(embedding), embedding.n_e,
                 embedding.max_chain_length)
    return embedding


# ============================================
# 埋め込み済み物理問題
# ============================================

class PhysicalProblem:
    """物理量子ビット上の Ising 問題（qubits[i] が i 番目のスピン）"""

    def __init__(self, ising: IsingModel, qubits: List[int], embedding: Embedding, chain_strength: float):
        self.ising = ising
        self.qubits = qubits
        self.embedding = embedding
        self.chain_strength = chain_strength
        self.position = {q: i for i, q in enumerate(qubits)}

    def to_qubit_sample(self, spins) -> Dict[int, int]:
        """スピン列 → {qubit: bit}"""
        return {q: int(s > 0) for q, s in zip(self.qubits, spins)}


def _coupler_between(chain_a: FrozenSet[int], chain_b: FrozenSet[int], graph: nx.Graph) -> Optional[Tuple[int, int]]:
    for p in sorted(chain_a):
        for q in sorted(graph.neighbors(p)):
            if q in chain_b:
                return p, q
    return None


def embed_bqm(bqm: Bqm, embedding: Embedding, topology: Topology,
              chain_strength: Optional[float] = None) -> PhysicalProblem:
    """論理 Ising をチェーン上に展開（h は等分、J は1本のカプラ、チェーン内は -chain_strength）"""
    ising = to_ising(bqm)
    for v in range(bqm.num_variables):
        if v not in embedding:
            raise MissingChainError(v)
    if chain_strength is None:
        chain_strength = 1.5 * (ising.max_abs_coefficient() or 1.0)

    qubits = sorted({q for v in range(bqm.num_variables) for q in embedding[v]})
    position = {q: i for i, q in enumerate(qubits)}
    h = np.zeros(len(qubits))
    J: Dict[Tuple[int, int], float] = {}
    offset = ising.offset

    for v in range(bqm.num_variables):
        chain = embedding[v]
        for q in chain:
            h[position[q]] += ising.h[v] / len(chain)
        if len(chain) > 1:
            subgraph = topology.graph.subgraph(chain)
            if not nx.is_connected(subgraph):
                raise ValueError(f"chain of logical variable {v} is not connected")
            tree = nx.bfs_tree(subgraph, min(chain))
            for p, q in tree.edges:
                key = tuple(sorted((position[p], position[q])))
                J[key] = J.get(key, 0.0) - chain_strength
                offset += chain_strength  # チェーンが揃っていれば論理エネルギーと一致

    for (a, b), value in ising.J.items():
        coupler = _coupler_between(embedding[a], embedding[b], topology.graph)
        if coupler is None:
            raise ValueError(f"no coupler between chains of logical variables {a} and {b}")
        key = tuple(sorted((position[coupler[0]], position[coupler[1]])))
        J[key] = J.get(key, 0.0) + value

    return PhysicalProblem(IsingModel(h, J, offset), qubits, embedding, chain_strength)


def unembed(sample: Mapping[int, int], embedding: Embedding, bqm: Bqm) -> np.ndarray:
    """チェーンの多数決。同数のときは論理エネルギーの低い方（それでも同じなら 0）"""
    n = bqm.num_variables
    x = np.zeros(n, dtype=np.int8)
    tied = []
    for v in range(n):
        if v not in embedding:
            raise MissingChainError(v)
        votes = [int(sample[q]) for q in embedding[v]]
        ones = sum(votes)
        if 2 * ones > len(votes):
            x[v] = 1
        elif 2 * ones == len(votes):
            tied.append(v)
    if tied:
        adjacency = bqm.adjacency()
        for v in tied:
            field = bqm.linear[v] + adjacency.getrow(v).dot(x.astype(np.float64))[0]
            x[v] = 1 if field < 0 else 0
    return x


def count_broken_chains(sample: Mapping[int, int], embedding: Embedding) -> int:
    return sum(1 for chain in embedding.chains.values() if len({int(sample[q]) for q in chain}) > 1)
