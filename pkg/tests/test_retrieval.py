import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from gen import random_graph
from esckit import retrieval as r
from esckit.kg import CaseSubgraph, KgNode, KnowledgeGraph, NodeType

E, S, A, R = NodeType.EXPECTATION, NodeType.STRESSOR, NodeType.AFFECTIVE_STATE, NodeType.RESPONSE
FULL = {"xReact": "sad", "xIntent": "to work", "xWant": "a job", "xNeed": "to apply", "xEffect": "feels bad"}
ONE = r.FunctionSimilarity(lambda a, b: 1.0)


def minimal():
    nodes = [KgNode("e", E, "exp"), KgNode("s", S, "str"), KgNode("a", A, "aff"), KgNode("r", R, "resp")]
    return KnowledgeGraph(nodes, [("s", "e"), ("e", "a"), ("e", "r")])


def hub():
    nodes = [KgNode("e", E, "job")]
    edges = []
    for t, p, texts in ((S, "s", ("job loss", "debt")), (A, "a", ("sad", "angry")), (R, "r", ("a new job", "rest"))):
        for i, text in enumerate(texts):
            nodes.append(KgNode(f"{p}{i}", t, text))
            edges.append(("e", f"{p}{i}"))
    return KnowledgeGraph(nodes, edges)


def test_query_graph_slots():
    q = r.build_query_graph("I lost my job", FULL)
    d = q.descriptions()
    assert d == {E: "I lost my job", A: "sad", S: "to work", R: "a job to apply feels bad"}


def test_query_graph_degenerate():
    d = r.build_query_graph("help", {}).descriptions()
    assert d[E] == "help" and d[A] is None and d[S] is None and d[R] is None


def test_query_graph_partial_response_slot():
    d = r.build_query_graph("x", {"xNeed": "rest", "xWant": ""}).descriptions()
    assert d[R] == "rest"


@pytest.mark.parametrize("u", ["", "   "])
def test_empty_utterance_rejected(u):
    with pytest.raises(ValueError):
        r.build_query_graph(u, FULL)


def test_constant_provider_scores():
    g = minimal()
    sg = CaseSubgraph("e", "s", "a", "r")
    assert r.score_subgraph(r.build_query_graph("x", FULL), sg, ONE, g).score == 4.0
    only = r.score_subgraph(r.build_query_graph("x", {}), sg, ONE, g)
    assert only.score == 1.0 and only.components == (1.0, None, None, None)


def test_cosine_scores_by_hand():
    vec = {"e": (3.0, 4.0), "s": (1.0, 0.0), "a": (0.0, 2.0), "r": (1.0, 1.0)}
    types = {"e": E, "s": S, "a": A, "r": R}
    g = KnowledgeGraph([KgNode(k, types[k], k, v) for k, v in vec.items()], [("s", "e"), ("e", "a"), ("e", "r")])
    f = r.EmbeddingSimilarity(g, {E: (1.0, 0.0), A: (0.0, 1.0), S: (1.0, 1.0), R: (2.0, 0.0)})
    q = r.build_query_graph("x", FULL)
    got = r.score_subgraph(q, CaseSubgraph("e", "s", "a", "r"), f, g)
    # cos(e) = 3/5, cos(a) = 1, cos(s) = 1/sqrt2, cos(r) = 1/sqrt2
    expected = (0.6, 1.0, 1 / math.sqrt(2), 1 / math.sqrt(2))
    assert got.components == pytest.approx(expected, abs=1e-12)
    assert got.score == pytest.approx(sum(expected), abs=1e-12)


def test_embedding_single_and_batch_agree():
    rng = np.random.default_rng(3)
    nodes = [KgNode(f"n{i}", t, "x", tuple(rng.normal(size=8))) for i, t in enumerate([E, E, S, A, R, R])]
    g = KnowledgeGraph(nodes)
    f = r.EmbeddingSimilarity(g, {t: rng.normal(size=8) for t in NodeType})
    for t in NodeType:
        batch = f.score_type(g, t, "x")
        single = [f.score(t, "x", g.node(nid)) for nid in g.nodes_of(t)]
        assert list(batch) == single


def test_minimal_retrieve():
    res = r.retrieve(r.build_query_graph("x", FULL), minimal(), ONE, r.RetrievalConfig(1, 1))
    assert len(res) == 1 and res[0].score == 4.0


def test_hub_all_eight_in_oracle_order():
    g, q = hub(), r.build_query_graph("my job", {"xReact": "sad", "xIntent": "job", "xWant": "job"})
    f = r.LexicalSimilarity()
    res = r.retrieve(q, g, f, r.RetrievalConfig(2, 8))
    assert len(res) == 8
    assert [(s.score, s.subgraph) for s in res] == [
        (score, CaseSubgraph(*ids)) for score, ids in oracles.rank_subgraphs(q, g, f, 8)
    ]


def test_join_failure_gives_empty_result_with_diagnostic():
    nodes = [KgNode("e1", E, "job"), KgNode("e2", E, "other"), KgNode("s1", S, "nothing"),
             KgNode("s2", S, "debt"), KgNode("a", A, "sad"), KgNode("r", R, "rest")]
    edges = [("s1", "e1"), ("e1", "a"), ("e1", "r"), ("s2", "e2"), ("e2", "a"), ("e2", "r")]
    g = KnowledgeGraph(nodes, edges)
    q = r.build_query_graph("job", {"xIntent": "debt"})
    res = r.retrieve(q, g, r.LexicalSimilarity(), r.RetrievalConfig(1, 1))
    assert list(res) == [] and res.diagnostic


def test_oracle_cap():
    with pytest.raises(r.OracleCapExceeded, match="indexed"):
        r.brute_force_retrieve(r.build_query_graph("x"), hub(), ONE, cap=7)


def test_provider_failure_names_node():
    def boom(a, b):
        raise ValueError("bad")

    with pytest.raises(r.RetrievalError, match="'e'"):
        r.retrieve(r.build_query_graph("x"), minimal(), r.FunctionSimilarity(boom))


def test_config_validation():
    for bad in (dict(k_per_type=0), dict(n_subgraphs=0), dict(tie_break="random")):
        with pytest.raises(ValueError):
            r.RetrievalConfig(**bad)


def test_ties_are_lexicographic():
    res = r.retrieve(r.build_query_graph("x", FULL), hub(), ONE, r.RetrievalConfig(2, 8))
    assert [s.subgraph for s in res] == sorted(s.subgraph for s in res)


def _query(rng):
    from gen import WORDS

    def text():
        return " ".join(rng.choice(WORDS[:8]) for _ in range(rng.randint(1, 3)))

    exp = {k: (text() if rng.random() < 0.7 else None) for k in ("xReact", "xIntent", "xWant", "xNeed", "xEffect")}
    return r.build_query_graph(text(), exp)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_full_k_equals_brute_force(seed):
    rng = random.Random(seed)
    g, q = random_graph(rng, 300), _query(rng)
    f = r.LexicalSimilarity()
    k = max(len(g.nodes_of(t)) for t in NodeType)
    n = rng.randint(1, 20)
    fast = r.retrieve(q, g, f, r.RetrievalConfig(k, n))
    slow = r.brute_force_retrieve(q, g, f, n)
    assert fast.to_list(g) == slow.to_list(g)
    assert [(s.score, s.subgraph) for s in slow] == [
        (score, CaseSubgraph(*ids)) for score, ids in oracles.rank_subgraphs(q, g, f, n)
    ]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_retrieval_properties(seed):
    rng = random.Random(seed)
    g, q = random_graph(rng, 300), _query(rng)
    f = r.LexicalSimilarity()
    k1 = rng.randint(1, 3)
    small = r.retrieve(q, g, f, r.RetrievalConfig(k1, 1000))
    big = r.retrieve(q, g, f, r.RetrievalConfig(k1 + rng.randint(0, 3), 1000))
    assert {s.subgraph for s in small} <= {s.subgraph for s in big}
    desc = q.descriptions()
    for s in small:
        assert g.is_case(s.subgraph)
        assert s.score == pytest.approx(sum(c for c in s.components if c is not None), abs=1e-9)
        for t, nid in s.subgraph.node_ids().items():
            c = s.component(t)
            if desc[t] is None:
                assert c is None
            else:
                assert nid in small.selected[t]
                assert c == f.score(t, desc[t], g.node(nid))
    keys = [s.sort_key() for s in small]
    assert keys == sorted(keys)
    again = r.retrieve(q, g, r.LexicalSimilarity(), r.RetrievalConfig(k1, 1000))
    assert again.to_list(g) == small.to_list(g)
    n = rng.randint(1, 5)
    assert len(r.retrieve(q, g, f, r.RetrievalConfig(k1, n))) <= n
