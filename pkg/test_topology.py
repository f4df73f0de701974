#!/usr/bin/env python3

"""
ハードウェアグラフ・minor embedding・埋め込み/逆埋め込みのテスト
"""

import itertools

import networkx as nx
import numpy as np
import pytest

from fjssp_instance import SetupParams, generate_instance
from qubo_builder import Bqm, build_bqm, build_variable_table
from topology import (
    Embedding,
    EmbeddingFailure,
    MissingChainError,
    Topology,
    TopologyFormatError,
    chimera,
    count_broken_chains,
    embed_bqm,
    find_embedding,
    load_topology,
    parse_topology_spec,
    unembed,
    validate_embedding,
)


def random_bqm(n, seed, density=0.5):
    rng = np.random.default_rng(seed)
    quadratic = {(a, b): rng.normal() for a in range(n) for b in range(a + 1, n) if rng.random() < density}
    return Bqm(rng.normal(size=n), quadratic, rng.normal())


def setup_graph(setup, n):
    params = SetupParams.for_setup(setup, n, k=n)
    instance = generate_instance(params)
    return build_bqm(instance, build_variable_table(instance, params.t_window)).interaction_graph()


def largest_embeddable(setup, topology, limit=6):
    largest = 0
    for n in range(1, limit + 1):
        if not isinstance(find_embedding(setup_graph(setup, n), topology, seed=0), Embedding):
            break
        largest = n
    return largest


# ============================================
# トポロジー
# ============================================

@pytest.mark.parametrize("dims,nodes,edges", [((1, 1, 4), 8, 16), ((2, 2, 4), 32, 80), ((3, 2, 2), 24, 38)])
def test_chimera_counts(dims, nodes, edges):
    rows, cols, shore = dims
    topology = chimera(*dims)
    assert topology.num_qubits == nodes == rows * cols * 2 * shore
    assert topology.num_couplers == edges == rows * cols * shore ** 2 + shore * (cols * (rows - 1) + rows * (cols - 1))
    assert topology.name == f"chimera:{rows},{cols},{shore}"


def test_chimera_unit_cell_is_bipartite():
    graph = chimera(1, 1, 4).graph
    assert nx.is_bipartite(graph)
    assert all(graph.degree(q) == 4 for q in graph.nodes)


def test_chimera_linear_labels():
    graph = chimera(2, 2, 4).graph
    assert graph.has_edge(0, 4)    # セル内 縦 ↔ 横
    assert graph.has_edge(4, 12)   # 横は右のセルへ
    assert graph.has_edge(0, 16)   # 縦は下のセルへ
    assert not graph.has_edge(0, 8)


def test_load_topology(tmp_path):
    path = tmp_path / "path.txt"
    path.write_text("0 1\n1 2\n", encoding="utf-8")
    topology = load_topology(path)
    assert topology.num_qubits == 3
    assert topology.edges == {(0, 1), (1, 2)}


def test_load_topology_deduplicates_and_skips_comments(tmp_path):
    path = tmp_path / "dup.txt"
    path.write_text("# couplers\n0 1\n1 0  # reversed\n\n0 1\n", encoding="utf-8")
    topology = load_topology(path)
    assert topology.num_couplers == 1


@pytest.mark.parametrize("content,line", [("0 1\n1 2 3\n", 2), ("0 x\n", 1), ("2 2\n", 1), ("0 1\n-1 2\n", 2)])
def test_load_topology_reports_line(tmp_path, content, line):
    path = tmp_path / "bad.txt"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(TopologyFormatError, match=f"line {line}"):
        load_topology(path)


def test_parse_topology_spec(tmp_path):
    assert parse_topology_spec("chimera:2,2").num_qubits == 32
    assert parse_topology_spec("chimera:1,1,2").num_qubits == 4
    path = tmp_path / "edges.txt"
    path.write_text("3 4\n", encoding="utf-8")
    assert parse_topology_spec(f"file:{path}").nodes == {3, 4}


@pytest.mark.parametrize("spec", ["pegasus:16", "chimera:a,b", "chimera:0,2,4", "file:", "chimera:1,2,3,4"])
def test_parse_topology_spec_rejects(spec):
    with pytest.raises(TopologyFormatError):
        parse_topology_spec(spec)


def test_self_loop_rejected():
    with pytest.raises(TopologyFormatError):
        Topology.from_edges("loop", [(0, 0)])


# ============================================
# 埋め込み探索
# ============================================

def test_subgraph_is_embedded_one_to_one():
    # K4,4 セル内のパス 0-4-1-5-2-6-3-7
    logical = nx.path_graph([0, 4, 1, 5, 2, 6, 3, 7])
    embedding = find_embedding(logical, chimera(4, 4, 4), seed=0)
    assert isinstance(embedding, Embedding)
    assert embedding.n_e == 8
    assert embedding.max_chain_length == 1


def test_path_graph_embeds():
    logical = nx.path_graph(10)
    topology = chimera(4, 4, 4)
    embedding = find_embedding(logical, topology, seed=3)
    assert isinstance(embedding, Embedding)
    assert validate_embedding(embedding, logical, topology) == []
    assert embedding.n_e >= 10


def test_s1_instance_embeds_on_small_chimera():
    logical = setup_graph("S1", 3)
    topology = chimera(4, 4, 4)
    embedding = find_embedding(logical, topology, seed=0)
    assert isinstance(embedding, Embedding)
    assert validate_embedding(embedding, logical, topology) == []
    assert embedding.n_e >= logical.number_of_nodes()


@pytest.mark.parametrize("n", [4, 5, 6])
def test_sparse_s1_graphs_embed_for_every_seed(n):
    # 疎な S1 グラフはどのシードでも 8×8 セルに載る
    logical = setup_graph("S1", n)
    topology = chimera(8, 8, 4)
    for seed in range(5):
        embedding = find_embedding(logical, topology, seed=seed)
        assert isinstance(embedding, Embedding), (n, seed, embedding)
        assert validate_embedding(embedding, logical, topology) == []


def test_isolated_variables_get_free_qubits():
    logical = nx.complete_graph(5)
    logical.add_nodes_from([10, 11])
    topology = chimera(2, 2, 4)
    embedding = find_embedding(logical, topology, seed=1)
    assert isinstance(embedding, Embedding)
    assert validate_embedding(embedding, logical, topology) == []
    assert len(embedding[10]) == len(embedding[11]) == 1


def test_oversized_problem_fails_with_diagnostic():
    logical = setup_graph("S2", 8)
    failure = find_embedding(logical, chimera(4, 4, 4), seed=0)
    assert isinstance(failure, EmbeddingFailure)
    assert "exceed" in failure.reason
    assert failure.qubits_free == 128


def test_clique_too_dense_for_unit_cell():
    failure = find_embedding(nx.complete_graph(8), chimera(1, 1, 4), seed=0, effort=5)
    assert isinstance(failure, EmbeddingFailure)
    assert failure.first_unplaceable is not None


def test_empty_logical_graph():
    embedding = find_embedding(nx.Graph(), chimera(1, 1, 4))
    assert isinstance(embedding, Embedding)
    assert embedding.n_e == 0


def test_find_embedding_is_deterministic():
    logical = nx.gnp_random_graph(10, 0.4, seed=2)
    topology = chimera(4, 4, 4)
    first = find_embedding(logical, topology, seed=7)
    second = find_embedding(logical, topology, seed=7)
    assert isinstance(first, Embedding)
    assert first.to_dict() == second.to_dict()


@pytest.mark.slow
def test_successful_embeddings_are_valid():
    topology = chimera(4, 4, 4)
    successes = 0
    for seed in range(150):
        rng = np.random.default_rng(seed)
        logical = nx.gnp_random_graph(int(rng.integers(3, 11)), 0.3, seed=seed)
        embedding = find_embedding(logical, topology, seed=seed)
        if not isinstance(embedding, Embedding):
            continue
        assert validate_embedding(embedding, logical, topology) == []
        assert embedding.n_e >= logical.number_of_nodes()
        successes += 1
        if successes == 100:
            break
    assert successes == 100


def test_removing_an_edge_keeps_success():
    topology = chimera(8, 8, 4)
    for seed in range(10):
        logical = nx.gnp_random_graph(9, 0.35, seed=seed)
        if logical.number_of_edges() == 0:
            continue
        assert isinstance(find_embedding(logical, topology, seed=seed), Embedding)
        smaller = logical.copy()
        smaller.remove_edge(*sorted(logical.edges)[seed % logical.number_of_edges()])
        embedding = find_embedding(smaller, topology, seed=seed)
        assert isinstance(embedding, Embedding)
        assert validate_embedding(embedding, smaller, topology) == []


@pytest.mark.slow
def test_flexible_instances_hit_capacity_first():
    topology = chimera(4, 4, 4)
    assert largest_embeddable("S2", topology) < largest_embeddable("S1", topology)


# ============================================
# 検査
# ============================================

def test_validate_embedding_reports_problems():
    topology = chimera(1, 1, 4)
    logical = nx.Graph([(0, 1), (1, 2)])
    # 量子ビット 0 と 1 は同じ側（カプラなし）
    assert validate_embedding(Embedding({0: [0], 1: [1], 2: [4]}), logical, topology) == [
        "no coupler between chains of 0 and 1"]
    shared = validate_embedding(Embedding({0: [0], 1: [4], 2: [4]}), logical, topology)
    assert any("shared" in p for p in shared)
    missing = validate_embedding(Embedding({0: [0], 1: [4]}), logical, topology)
    assert missing == ["no chain for logical variable 2"]


def test_validate_embedding_disconnected_chain():
    topology = chimera(1, 1, 4)
    logical = nx.Graph()
    logical.add_node(0)
    problems = validate_embedding(Embedding({0: [0, 1]}), logical, topology)
    assert problems == ["chain of 0 is not connected"]


# ============================================
# 埋め込み・逆埋め込み
# ============================================

def triangle_embedding():
    """三角形を K4,4 上に長さ2のチェーンで配置（6量子ビット）"""
    return Embedding({0: [0, 4], 1: [1, 5], 2: [2, 6]})


def test_strong_chains_have_unbroken_ground_state():
    topology = chimera(1, 1, 4)
    bqm = Bqm([0.5, -1.0, 0.3], {(0, 1): 1.2, (1, 2): -0.7, (0, 2): 0.9}, 0.25)
    embedding = triangle_embedding()
    assert validate_embedding(embedding, bqm.interaction_graph(), topology) == []
    total = float(np.abs(bqm.linear).sum() + sum(abs(v) for v in bqm.quadratic.values()))
    problem = embed_bqm(bqm, embedding, topology, chain_strength=2 * total)
    assert len(problem.qubits) == 6

    spins = 2 * np.asarray(list(itertools.product((0, 1), repeat=6)), dtype=float) - 1
    energies = problem.ising.energies(spins)
    ground = spins[int(np.argmin(energies))]
    sample = problem.to_qubit_sample(ground)
    assert count_broken_chains(sample, embedding) == 0

    logical = unembed(sample, embedding, bqm)
    X = np.asarray(list(itertools.product((0, 1), repeat=3)))
    assert bqm.energy(logical) == pytest.approx(bqm.energies(X).min())
    assert energies.min() == pytest.approx(bqm.energies(X).min())


def test_unbroken_chains_preserve_energy():
    topology = chimera(4, 4, 4)
    bqm = random_bqm(8, seed=4)
    embedding = find_embedding(bqm.interaction_graph(), topology, seed=1)
    assert isinstance(embedding, Embedding)
    problem = embed_bqm(bqm, embedding, topology)
    owner = {q: v for v, chain in embedding.chains.items() for q in chain}
    rng = np.random.default_rng(0)
    for x in rng.integers(0, 2, size=(20, 8)):
        spins = np.asarray([2 * x[owner[q]] - 1 for q in problem.qubits], dtype=float)
        assert problem.ising.energy(spins) == pytest.approx(bqm.energy(x))


def test_unembed_majority_and_ties():
    embedding = Embedding({0: [0, 4, 1], 1: [5, 2]})
    bqm = Bqm([0.0, -1.0])
    sample = {0: 1, 4: 1, 1: 0, 5: 1, 2: 0}
    assert unembed(sample, embedding, bqm).tolist() == [1, 1]
    assert count_broken_chains(sample, embedding) == 2
    assert unembed(sample, embedding, Bqm([0.0, 1.0])).tolist() == [1, 0]
    # 局所場 0 の同数は 0
    assert unembed({0: 0, 4: 1}, Embedding({0: [0, 4]}), Bqm([0.0])).tolist() == [0]


def test_missing_chain_is_an_error():
    bqm = Bqm([1.0, 1.0])
    with pytest.raises(MissingChainError):
        embed_bqm(bqm, Embedding({0: [0]}), chimera(1, 1, 4))
    with pytest.raises(MissingChainError):
        unembed({0: 1}, Embedding({0: [0]}), bqm)
