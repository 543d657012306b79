"""Case-subgraph retrieval from commonsense-expanded query graphs.

A query graph pairs the user utterance with up to five commonsense
expansions. Each of the four node types gets one description:

    expectation      <- the utterance
    affective_state  <- xReact
    stressor         <- xIntent
    response         <- xWant, xNeed, xEffect joined by single spaces

A case subgraph scores the sum of the four description/node similarities.
:func:`retrieve` restricts every present slot to its top-K nodes and joins
them through expectation hubs; :func:`brute_force_retrieve` scores every
subgraph and serves as the reference.
"""

from __future__ import annotations

import abc
import enum
import heapq
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Optional, Sequence

import numpy as np

from esckit.kg import CaseSubgraph, KgNode, KnowledgeGraph, NodeType, enumerate_subgraphs
from esckit.text.pipeline import TextPipeline, default_pipeline

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_N = 1
DEFAULT_ORACLE_CAP = 1_000_000
TIE_BREAK_RULES = ("lexicographic",)

# component order of the similarity sum
SCORE_ORDER = (NodeType.EXPECTATION, NodeType.AFFECTIVE_STATE, NodeType.STRESSOR, NodeType.RESPONSE)


class RetrievalError(RuntimeError):
    pass


class OracleCapExceeded(RetrievalError):
    pass


class CommonsenseRelation(enum.Enum):
    X_REACT = "xReact"
    X_INTENT = "xIntent"
    X_WANT = "xWant"
    X_NEED = "xNeed"
    X_EFFECT = "xEffect"


RESPONSE_RELATIONS = (CommonsenseRelation.X_WANT, CommonsenseRelation.X_NEED, CommonsenseRelation.X_EFFECT)

# query-side slot names, also used as keys of the embedding sidecar file
SLOT_NAMES = {
    NodeType.EXPECTATION: "utterance",
    NodeType.AFFECTIVE_STATE: "xReact",
    NodeType.STRESSOR: "xIntent",
    NodeType.RESPONSE: "response",
}


@dataclass(frozen=True)
class QueryGraph:
    utterance: str
    expansions: Mapping[CommonsenseRelation, Optional[str]] = field(default_factory=dict)

    def expansion(self, rel: CommonsenseRelation) -> Optional[str]:
        value = self.expansions.get(rel)
        return value if value else None

    def descriptions(self) -> dict[NodeType, Optional[str]]:
        """Target description per node type; None where the slot is absent."""
        resp_parts = [self.expansion(r) for r in RESPONSE_RELATIONS]
        resp_parts = [p for p in resp_parts if p is not None]
        return {
            NodeType.EXPECTATION: self.utterance,
            NodeType.AFFECTIVE_STATE: self.expansion(CommonsenseRelation.X_REACT),
            NodeType.STRESSOR: self.expansion(CommonsenseRelation.X_INTENT),
            NodeType.RESPONSE: " ".join(resp_parts) if resp_parts else None,
        }


def build_query_graph(utterance: str, expansions: Mapping | None = None) -> QueryGraph:
    """Validate and assemble a query graph.

    ``expansions`` may be keyed by :class:`CommonsenseRelation` or by the
    relation names (``"xReact"`` ...). Missing, None and empty values are
    absent slots.
    """
    if not utterance or not utterance.strip():
        raise ValueError("query utterance must be non-empty")
    rels = {}
    for key, value in (expansions or {}).items():
        rel = key if isinstance(key, CommonsenseRelation) else CommonsenseRelation(key)
        if value is not None and not isinstance(value, str):
            raise TypeError(f"expansion {rel.value} must be a string")
        rels[rel] = value if value else None
    return QueryGraph(utterance, rels)


def load_query(path: str | Path) -> QueryGraph:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "utterance" not in doc:
        raise ValueError(f"{path}: query must be an object with an 'utterance' field")
    return build_query_graph(doc["utterance"], {r.value: doc.get(r.value) for r in CommonsenseRelation if r.value in doc})


def load_query_embeddings(path: str | Path) -> dict[NodeType, np.ndarray]:
    """Read the slot -> vector sidecar (keys: utterance, xReact, xIntent, response)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    by_name = {name: t for t, name in SLOT_NAMES.items()}
    out = {}
    for key, vec in doc.items():
        if key not in by_name:
            raise ValueError(f"{path}: unknown slot {key!r}; expected one of {sorted(by_name)}")
        out[by_name[key]] = np.asarray(vec, dtype=np.float64)
    return out


# -- similarity providers ----------------------------------------------------


class SimilarityProvider(abc.ABC):
    """Scores a query description against a graph node; higher is more similar.

    ``score_type`` must return, for every node of a type, exactly the value
    ``score`` returns for that node; the default implementation loops.
    """

    @abc.abstractmethod
    def score(self, node_type: NodeType, text: str, node: KgNode) -> float: ...

    def score_type(self, g: KnowledgeGraph, node_type: NodeType, text: str) -> np.ndarray:
        ids = g.nodes_of(node_type)
        out = np.empty(len(ids), dtype=np.float64)
        for i, nid in enumerate(ids):
            out[i] = self._guarded(node_type, text, g.node(nid))
        return out

    def _guarded(self, node_type, text, node) -> float:
        try:
            return float(self.score(node_type, text, node))
        except Exception as exc:
            raise RetrievalError(f"similarity provider failed on node {node.id!r}: {exc}") from exc


class FunctionSimilarity(SimilarityProvider):
    """Wraps a plain ``fn(query_text, node_text) -> float``."""

    def __init__(self, fn: Callable[[str, str], float]):
        self.fn = fn

    def score(self, node_type, text, node):
        return self.fn(text, node.text)


class LexicalSimilarity(SimilarityProvider):
    """Dice coefficient between the stem sets of the two texts."""

    def __init__(self, pipeline: TextPipeline | None = None):
        self.pipeline = pipeline or default_pipeline()
        self._cache: dict[str, frozenset] = {}

    def _stems(self, text: str) -> frozenset:
        s = self._cache.get(text)
        if s is None:
            s = self._cache[text] = frozenset(self.pipeline.preprocess(text))
        return s

    def dice(self, a: str, b: str) -> float:
        sa, sb = self._stems(a), self._stems(b)
        if not sa and not sb:
            return 0.0
        return 2 * len(sa & sb) / (len(sa) + len(sb))

    def score(self, node_type, text, node):
        return self.dice(text, node.text)


class EmbeddingSimilarity(SimilarityProvider):
    """Cosine similarity between per-slot query vectors and node embeddings.

    Scores for a type are computed once as a matrix-vector product; single
    ``score`` calls read from the same vector so both paths agree bit for bit.
    """

    def __init__(self, g: KnowledgeGraph, query_vectors: Mapping[NodeType, Sequence[float]]):
        self.graph = g
        self.query_vectors = {}
        for t, vec in query_vectors.items():
            v = np.asarray(vec, dtype=np.float64)
            if g.embedding_dim is not None and v.shape != (g.embedding_dim,):
                raise ValueError(f"query vector for {SLOT_NAMES[t]} has shape {v.shape}, expected ({g.embedding_dim},)")
            norm = np.linalg.norm(v)
            self.query_vectors[t] = v / norm if norm > 0 else v
        self._rows = {t: {nid: i for i, nid in enumerate(g.nodes_of(t))} for t in NodeType}
        self._scores: dict[NodeType, np.ndarray] = {}

    def _type_scores(self, node_type: NodeType) -> np.ndarray:
        if node_type not in self._scores:
            if node_type not in self.query_vectors:
                raise RetrievalError(f"no query embedding for slot {SLOT_NAMES[node_type]!r}")
            self._scores[node_type] = self.graph.embedding_matrix(node_type) @ self.query_vectors[node_type]
        return self._scores[node_type]

    def score(self, node_type, text, node):
        return float(self._type_scores(node_type)[self._rows[node_type][node.id]])

    def score_type(self, g, node_type, text):
        if g is not self.graph:
            raise RetrievalError("embedding provider is bound to a different graph")
        return self._type_scores(node_type)


# -- scoring -----------------------------------------------------------------


@dataclass(frozen=True)
class ScoredSubgraph:
    subgraph: CaseSubgraph
    score: float
    components: tuple[Optional[float], ...]  # in SCORE_ORDER; None for absent slots

    def component(self, t: NodeType) -> Optional[float]:
        return self.components[SCORE_ORDER.index(t)]

    def sort_key(self):
        return (-self.score, self.subgraph)

    def to_dict(self, g: KnowledgeGraph | None = None) -> dict:
        ids = self.subgraph.node_ids()
        nodes = {}
        for t in SCORE_ORDER:
            entry = {"id": ids[t], "score": self.component(t)}
            if g is not None:
                entry["text"] = g.node(ids[t]).text
            nodes[t.value] = entry
        return {"score": self.score, "nodes": nodes}


def _total(components: Sequence[Optional[float]]) -> float:
    total = 0.0
    for c in components:
        if c is not None:
            total += c
    return total


def score_subgraph(q: QueryGraph, sg: CaseSubgraph, f: SimilarityProvider, g: KnowledgeGraph) -> ScoredSubgraph:
    """Score one subgraph by calling the provider on each present slot."""
    desc = q.descriptions()
    ids = sg.node_ids()
    comps = []
    for t in SCORE_ORDER:
        if desc[t] is None:
            comps.append(None)
        else:
            comps.append(f._guarded(t, desc[t], g.node(ids[t])))
    return ScoredSubgraph(sg, _total(comps), tuple(comps))


@dataclass(frozen=True)
class RetrievalConfig:
    k_per_type: int = DEFAULT_K
    n_subgraphs: int = DEFAULT_N
    tie_break: str = "lexicographic"

    def __post_init__(self):
        if self.k_per_type < 1:
            raise ValueError("k_per_type must be >= 1")
        if self.n_subgraphs < 1:
            raise ValueError("n_subgraphs must be >= 1")
        if self.tie_break not in TIE_BREAK_RULES:
            raise ValueError(f"unknown tie_break {self.tie_break!r}; expected one of {TIE_BREAK_RULES}")


@dataclass
class RetrievalResult(Sequence):
    """Ranked subgraphs plus instrumentation."""

    subgraphs: list[ScoredSubgraph]
    candidates_scored: int = 0
    selected: dict[NodeType, Optional[tuple[str, ...]]] = field(default_factory=dict)
    diagnostic: Optional[str] = None

    def __getitem__(self, i):
        return self.subgraphs[i]

    def __len__(self) -> int:
        return len(self.subgraphs)

    def __iter__(self) -> Iterator[ScoredSubgraph]:
        return iter(self.subgraphs)

    def to_list(self, g: KnowledgeGraph | None = None) -> list[dict]:
        return [dict(rank=i + 1, **s.to_dict(g)) for i, s in enumerate(self.subgraphs)]


def top_k(g: KnowledgeGraph, f: SimilarityProvider, node_type: NodeType, text: str, k: int) -> dict[str, float]:
    """The ``k`` best nodes of a type, ordered by score desc then id asc."""
    ids = g.nodes_of(node_type)
    if not ids:
        return {}
    scores = np.asarray(f.score_type(g, node_type, text), dtype=np.float64)
    # ids are sorted, so position order is id order
    order = np.lexsort((np.arange(len(ids)), -scores))[:k]
    return {ids[i]: float(scores[i]) for i in order}


def retrieve(
    q: QueryGraph, g: KnowledgeGraph, f: SimilarityProvider, cfg: RetrievalConfig | None = None
) -> RetrievalResult:
    """Top-N subgraphs built from per-type top-K node selections."""
    cfg = cfg or RetrievalConfig()
    desc = q.descriptions()
    selected: dict[NodeType, Optional[dict[str, float]]] = {}
    for t in SCORE_ORDER:
        selected[t] = None if desc[t] is None else top_k(g, f, t, desc[t], cfg.k_per_type)

    if selected[NodeType.EXPECTATION]:
        hubs = sorted(selected[NodeType.EXPECTATION])
    else:
        hubs = list(g.nodes_of(NodeType.EXPECTATION))

    def pick(hub: str, t: NodeType):
        sel = selected[t]
        nbrs = g.neighbors(hub, t)
        if sel is None:
            return [(nid, None) for nid in nbrs]
        return [(nid, sel[nid]) for nid in nbrs if nid in sel]

    counter = itertools.count()
    exp_sel = selected[NodeType.EXPECTATION]

    def candidates():
        for e in hubs:
            e_score = None if exp_sel is None else exp_sel[e]
            strs = pick(e, NodeType.STRESSOR)
            affs = pick(e, NodeType.AFFECTIVE_STATE)
            resps = pick(e, NodeType.RESPONSE)
            for (s, s_score), (a, a_score), (r, r_score) in itertools.product(strs, affs, resps):
                next(counter)
                comps = (e_score, a_score, s_score, r_score)
                yield ScoredSubgraph(CaseSubgraph(e, s, a, r), _total(comps), comps)

    ranked = heapq.nsmallest(cfg.n_subgraphs, candidates(), key=ScoredSubgraph.sort_key)
    n_scored = next(counter)
    result = RetrievalResult(
        ranked,
        candidates_scored=n_scored,
        selected={t: (None if s is None else tuple(s)) for t, s in selected.items()},
    )
    if not ranked:
        result.diagnostic = (
            "no candidate subgraph: the selected nodes of each type are not connected "
            "through a common expectation node; try a larger K"
        )
        logger.info(result.diagnostic)
    return result


def brute_force_retrieve(
    q: QueryGraph,
    g: KnowledgeGraph,
    f: SimilarityProvider,
    n: int = DEFAULT_N,
    cap: int = DEFAULT_ORACLE_CAP,
) -> RetrievalResult:
    """Score every case subgraph and return the global top ``n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = g.subgraph_count()
    if total > cap:
        raise OracleCapExceeded(
            f"graph has {total} subgraphs, above the exhaustive-scoring cap of {cap}; "
            "use the indexed retrieval path instead"
        )
    scored = (score_subgraph(q, sg, f, g) for sg in enumerate_subgraphs(g))
    ranked = heapq.nsmallest(n, scored, key=ScoredSubgraph.sort_key)
    result = RetrievalResult(ranked, candidates_scored=total)
    if not ranked:
        result.diagnostic = "graph contains no case subgraph"
    return result
