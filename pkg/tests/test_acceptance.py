"""Acceptance suite: one check per criterion, each reporting PASS, FAIL or SKIP.

Run with pytest (lines appear in the terminal summary) or directly:

    python3 tests/test_acceptance.py

Criterion 5 needs external data. Set any of these to enable its parts:

    ESCKIT_HEAL_NODES, ESCKIT_HEAL_EDGES        HEAL export (node JSONL, edge TSV)
    ESCKIT_ED_CORPUS, ESCKIT_ESC_CORPUS         initiative-annotated corpora (native JSON)
"""

from __future__ import annotations

import os
import random
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from gen import (  # noqa: E402
    HEAL_EDGES,
    HEAL_NODES,
    adversarial_text,
    parametric_graph,
    random_dialogue,
    random_graph,
    random_knowledge,
)
from esckit import flow, kg, metrics, retrieval, seqformat  # noqa: E402
from esckit.dialogue import SpeakerRole, load_corpus  # noqa: E402
from esckit.kg import KgNode, KnowledgeGraph, NodeType  # noqa: E402
from esckit.text.stemmer import stem  # noqa: E402

RESULTS: dict[int, tuple[str, str]] = {}
TOL = 1e-12


def _close(a, b) -> bool:
    if a is None or b is None:
        return a is b
    return abs(a - b) <= TOL


def _record(n: int, status: str, detail: str) -> tuple[str, str]:
    RESULTS[n] = (status, detail)
    return status, detail


# -- 1 -----------------------------------------------------------------------


def criterion_1(n_dialogues: int = 1000, seed: int = 1):
    rng = random.Random(seed)
    ds = [random_dialogue(rng, f"r{i}", max_len=12, vocab=20) for i in range(n_dialogues)]
    t0 = time.perf_counter()
    mismatches = []
    for d in ds:
        pairs = [
            ("information", metrics.information(d).as_dict(), oracles.information(d)),
            ("repetition", metrics.repetition(d).as_dict(), oracles.repetition(d)),
            ("relaxation", metrics.relaxation(d).as_dict(), oracles.relaxation(d)),
        ]
        for name, ours, ref in pairs:
            if not all(_close(ours[c], ref[c]) for c in ("init", "non", "all")):
                mismatches.append((d.id, name, ours, ref))
        if any(u.is_system for u in d.utterances):
            if not _close(metrics.proactivity(d), oracles.proactivity(d)):
                mismatches.append((d.id, "proactivity"))
    report = metrics.corpus_report(ds)
    with_sys = [d for d in ds if any(u.is_system for u in d.utterances)]
    for name, per in (("information", oracles.information_counts), ("repetition", oracles.repetition_counts),
                      ("relaxation", oracles.relaxation_values)):
        ref = oracles.pooled(ds, per)
        ours = report.metric(name).as_dict()
        if not all(_close(ours[c], ref[c]) for c in ("init", "non", "all")):
            mismatches.append(("corpus", name, ours, ref))
    if not _close(report.proactivity.init, oracles.pooled_proactivity(with_sys)):
        mismatches.append(("corpus", "proactivity"))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 10
    detail = f"{n_dialogues} dialogues, {len(mismatches)} mismatches, {elapsed:.2f}s (limit 10s)"
    if mismatches:
        detail += f"; first: {mismatches[0]}"
    return _record(1, "PASS" if ok else "FAIL", detail)


# -- 2 -----------------------------------------------------------------------


def _random_query(rng):
    from gen import WORDS

    def text():
        return " ".join(rng.choice(WORDS[:8]) for _ in range(rng.randint(1, 3)))

    slots = ("xReact", "xIntent", "xWant", "xNeed", "xEffect")
    return retrieval.build_query_graph(text(), {k: (text() if rng.random() < 0.8 else None) for k in slots})


def criterion_2(n_graphs: int = 200, seed: int = 2):
    rng = random.Random(seed)
    t0 = time.perf_counter()
    failures = []
    total_subgraphs = 0
    for i in range(n_graphs):
        g = random_graph(rng, 1000)
        q = _random_query(rng)
        f = retrieval.LexicalSimilarity()
        k = max(len(g.nodes_of(t)) for t in NodeType)
        n = rng.choice((1, 5, 50, 1000))
        total_subgraphs += g.subgraph_count()
        fast = retrieval.retrieve(q, g, f, retrieval.RetrievalConfig(k, n))
        slow = retrieval.brute_force_retrieve(q, g, f, n)
        if fast.to_list(g) != slow.to_list(g):
            failures.append(i)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    detail = (f"{n_graphs} graphs ({total_subgraphs} subgraphs in total), {len(failures)} differ, "
              f"{elapsed:.2f}s (limit 60s)")
    return _record(2, "PASS" if ok else "FAIL", detail)


# -- 3 -----------------------------------------------------------------------


def scale_graph(seed: int = 3, dim: int = 128):
    """400 hubs, each joined to 10 stressors, 5 affects and 100 responses from shared pools."""
    rng = np.random.default_rng(seed)
    pools = {NodeType.EXPECTATION: 400, NodeType.STRESSOR: 200, NodeType.AFFECTIVE_STATE: 41, NodeType.RESPONSE: 2000}
    degree = {NodeType.STRESSOR: 10, NodeType.AFFECTIVE_STATE: 5, NodeType.RESPONSE: 100}
    ids = {t: [f"{t.value[:3]}{i:05d}" for i in range(n)] for t, n in pools.items()}
    nodes = []
    for t, group in ids.items():
        vecs = rng.normal(size=(len(group), dim))
        nodes.extend(KgNode(nid, t, nid, tuple(v)) for nid, v in zip(group, vecs.tolist()))
    edges = []
    for e in ids[NodeType.EXPECTATION]:
        for t, k in degree.items():
            for j in rng.choice(len(ids[t]), size=k, replace=False):
                edges.append((e, ids[t][j]))
    g = KnowledgeGraph(nodes, edges)
    query = {t: rng.normal(size=dim) for t in NodeType}
    return g, query


def criterion_3(k: int = 10):
    g, qvec = scale_graph()
    for t in NodeType:  # index load: normalized embedding matrices
        g.embedding_matrix(t)
    total = g.subgraph_count()
    q = retrieval.build_query_graph("placeholder", {"xReact": "r", "xIntent": "i", "xWant": "w", "xNeed": "n", "xEffect": "e"})

    calls = {"n": 0}
    real = retrieval.enumerate_subgraphs

    def counting(*args, **kwargs):
        calls["n"] += 1
        return real(*args, **kwargs)

    retrieval.enumerate_subgraphs = counting
    try:
        t0 = time.perf_counter()
        f = retrieval.EmbeddingSimilarity(g, qvec)
        res = retrieval.retrieve(q, g, f, retrieval.RetrievalConfig(k, 1))
        elapsed = time.perf_counter() - t0
    finally:
        retrieval.enumerate_subgraphs = real
    valid = all(g.is_case(s.subgraph) for s in res)
    # naive check over the K^4 combinations of the selected nodes
    import itertools

    sel = res.selected
    best = None
    for e, s_, a, r in itertools.product(sel[NodeType.EXPECTATION], sel[NodeType.STRESSOR],
                                         sel[NodeType.AFFECTIVE_STATE], sel[NodeType.RESPONSE]):
        sg = kg.CaseSubgraph(e, s_, a, r)
        if g.is_case(sg):
            key = retrieval.score_subgraph(q, sg, f, g).sort_key()
            best = key if best is None or key < best else best
    valid = valid and [s.sort_key() for s in res] == ([best] if best else [])
    ok = total >= 2_000_000 and elapsed < 1.0 and res.candidates_scored <= k ** 4 and calls["n"] == 0 and valid
    detail = (f"{total} enumerable subgraphs, query {elapsed * 1000:.1f} ms (limit 1000 ms), "
              f"{res.candidates_scored} candidates scored (bound {k ** 4}), enumerations {calls['n']}, "
              f"results {len(res)}, top-1 {'matches' if valid else 'differs from'} naive search over selections")
    return _record(3, "PASS" if ok else "FAIL", detail)


# -- 4 -----------------------------------------------------------------------


def criterion_4():
    path = Path(__file__).parent / "data" / "snowball_english.tsv"
    pairs = [line.split("\t") for line in path.read_text(encoding="utf-8").splitlines()]
    failures = [(w, e, stem(w)) for w, e in pairs if stem(w) != e]
    rate = 1 - len(failures) / len(pairs)
    detail = f"{len(pairs) - len(failures)}/{len(pairs)} words ({rate:.4%}, threshold 99.9%)"
    if failures:
        detail += f"; failures: {failures[:20]}"
    return _record(4, "PASS" if rate >= 0.999 else "FAIL", detail)


# -- 5 -----------------------------------------------------------------------

HEAL_EDGE_CELLS = {
    (NodeType.STRESSOR, NodeType.EXPECTATION): 9801,
    (NodeType.EXPECTATION, NodeType.RESPONSE): 26628,
    (NodeType.EXPECTATION, NodeType.AFFECTIVE_STATE): 3050,
}
PUBLISHED_PROACTIVITY = {"ESCKIT_ED_CORPUS": 0.28, "ESCKIT_ESC_CORPUS": 0.48}


def _heal_mismatches(stats) -> list[str]:
    bad = [f"{t.value} nodes {stats.node_counts[t]} != {n}" for t, n in HEAL_NODES.items() if stats.node_counts[t] != n]
    bad += [f"{a.value}-{b.value} edges {stats.edges(a, b)} != {n}" for (a, b), n in HEAL_EDGE_CELLS.items()
            if stats.edges(a, b) != n]
    return bad


def criterion_5():
    parts, failed, ran = [], False, False
    # always-on partial check: a synthetic graph built from the published HEAL counts
    with tempfile.TemporaryDirectory() as tmp:
        nodes_path, edges_path = Path(tmp) / "n.jsonl", Path(tmp) / "e.tsv"
        kg.write_graph(parametric_graph(HEAL_NODES, HEAL_EDGES), nodes_path, edges_path)
        bad = _heal_mismatches(kg.graph_stats(kg.load_graph(nodes_path, edges_path)))
    parts.append("synthetic HEAL-sized layout " + ("ok" if not bad else f"mismatch {bad}"))
    failed |= bool(bad)

    heal_nodes, heal_edges = os.environ.get("ESCKIT_HEAL_NODES"), os.environ.get("ESCKIT_HEAL_EDGES")
    if heal_nodes and heal_edges:
        ran = True
        bad = _heal_mismatches(kg.graph_stats(kg.load_graph(heal_nodes, heal_edges)))
        parts.append("HEAL stats " + ("match published counts" if not bad else f"differ: {bad}"))
        failed |= bool(bad)
    else:
        parts.append("HEAL export not provided")

    for var, target in PUBLISHED_PROACTIVITY.items():
        path = os.environ.get(var)
        if not path:
            parts.append(f"{var} not provided")
            continue
        ran = True
        report = metrics.corpus_report(load_corpus(path))
        micro, macro = report.proactivity.init, report.macro["proactivity"].init
        ok = any(v is not None and abs(v - target) <= 0.02 for v in (micro, macro))
        parts.append(f"{var}: proactivity micro={micro} macro={macro} target {target}±0.02 {'ok' if ok else 'off'}")
        failed |= not ok
    status = "FAIL" if failed else ("PASS" if ran else "SKIP")
    return _record(5, status, "; ".join(parts))


# -- 6 -----------------------------------------------------------------------


def criterion_6(n: int = 10_000, seed: int = 6):
    rng = random.Random(seed)
    failures = []
    for i in range(n):
        situation = adversarial_text(rng)
        context = tuple(
            (rng.choice((SpeakerRole.USER, SpeakerRole.SYSTEM)), adversarial_text(rng)) for _ in range(rng.randint(1, 6))
        )
        knowledge = random_knowledge(rng)
        strategy = adversarial_text(rng).strip()
        response = adversarial_text(rng)
        x = seqformat.encode_input(situation, context, knowledge, budget=None)
        y = seqformat.encode_output(strategy, response)
        try:
            same = seqformat.parse_input(x.text) == x and seqformat.parse_output(y.text) == (strategy, response)
        except seqformat.FormatError:
            same = False
        if not same:
            failures.append(i)
    detail = f"{n} adversarial tuples, {len(failures)} failures"
    return _record(6, "PASS" if not failures else "FAIL", detail)


# -- 7 -----------------------------------------------------------------------


def criterion_7():
    from esckit.cli import main
    from make_goldens import COMMANDS, FIX, GOLD

    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "analyze_json"
        argv = [str(a) for a in COMMANDS["analyze_json"]]
        argv[argv.index("--out") + 1] = str(out)
        code = main(argv)
        for name in ("flow.json", "transitions.csv", "flow.dot", "progress.json", "progress.csv"):
            if code != 0 or (out / name).read_bytes() != (GOLD / "analyze_json" / name).read_bytes():
                mismatched.append(name)

    corpus = load_corpus(FIX / "corpus3.json")
    rng = random.Random(7)
    extra = [random_dialogue(rng, f"x{i}") for i in range(50)]
    parts_a, parts_b = list(corpus), extra
    whole = parts_a + parts_b
    additive = (
        (flow.transition_matrix(parts_a) + flow.transition_matrix(parts_b)).to_json() == flow.transition_matrix(whole).to_json()
        and (flow.progress_profile(parts_a) + flow.progress_profile(parts_b)).to_json() == flow.progress_profile(whole).to_json()
    )
    ok = not mismatched and additive
    detail = f"goldens {'identical' if not mismatched else f'differ: {mismatched}'}; additivity {'holds' if additive else 'broken'}"
    return _record(7, "PASS" if ok else "FAIL", detail)


CRITERIA = {
    1: ("metric-oracle equivalence", criterion_1),
    2: ("retrieval-oracle equivalence", criterion_2),
    3: ("retrieval at scale", criterion_3),
    4: ("Snowball conformance", criterion_4),
    5: ("published statistics (conditional)", criterion_5),
    6: ("linearization round-trip", criterion_6),
    7: ("flow/progress determinism and additivity", criterion_7),
}


def summary_lines() -> list[str]:
    return [f"criterion {n} [{CRITERIA[n][0]}]: {RESULTS[n][0]} - {RESULTS[n][1]}" for n in sorted(RESULTS)]


@pytest.mark.parametrize("number", list(CRITERIA), ids=[f"criterion_{n}" for n in CRITERIA])
def test_criterion(number):
    status, detail = CRITERIA[number][1]()
    print(f"criterion {number}: {status} - {detail}")
    if status == "SKIP":
        pytest.skip(detail)
    assert status == "PASS", detail


if __name__ == "__main__":
    for _, fn in CRITERIA.values():
        fn()
        print(summary_lines()[-1], flush=True)
    sys.exit(0 if all(s in ("PASS", "SKIP") for s, _ in RESULTS.values()) else 1)
