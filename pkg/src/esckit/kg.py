"""Typed mental-health knowledge graph with expectation-hub case subgraphs.

Node file: JSON lines with ``id``, ``type``, ``text`` and an optional
``embedding`` array. Edge file: one tab-separated pair of node ids per
line; blank lines and lines starting with ``#`` are ignored. Edges are
undirected.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised for unreadable or invalid graph files."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)
        self.path = path
        self.line = line


class NodeType(enum.Enum):
    EXPECTATION = "expectation"
    AFFECTIVE_STATE = "affective_state"
    STRESSOR = "stressor"
    RESPONSE = "response"

    @property
    def label(self) -> str:
        return _TABLE_LABELS[self]


_TYPE_ALIASES = {
    "expectation": NodeType.EXPECTATION,
    "affective_state": NodeType.AFFECTIVE_STATE,
    "affective state": NodeType.AFFECTIVE_STATE,
    "affectivestate": NodeType.AFFECTIVE_STATE,
    "affect": NodeType.AFFECTIVE_STATE,
    "stressor": NodeType.STRESSOR,
    "response": NodeType.RESPONSE,
}

# row/column order of the statistics table
TABLE_ORDER = (NodeType.STRESSOR, NodeType.EXPECTATION, NodeType.RESPONSE, NodeType.AFFECTIVE_STATE)
_TABLE_LABELS = {
    NodeType.STRESSOR: "Stressor",
    NodeType.EXPECTATION: "Expectation",
    NodeType.RESPONSE: "Response",
    NodeType.AFFECTIVE_STATE: "Affect. State",
}

# canonical (table-ordered) type pairs that may be joined by an edge
ALLOWED_PAIR_KEYS = (
    (NodeType.STRESSOR, NodeType.STRESSOR),
    (NodeType.STRESSOR, NodeType.EXPECTATION),
    (NodeType.EXPECTATION, NodeType.EXPECTATION),
    (NodeType.EXPECTATION, NodeType.RESPONSE),
    (NodeType.EXPECTATION, NodeType.AFFECTIVE_STATE),
    (NodeType.RESPONSE, NodeType.RESPONSE),
)
ALLOWED_PAIRS = frozenset(frozenset(p) for p in ALLOWED_PAIR_KEYS)


def parse_node_type(value: str) -> NodeType:
    key = str(value).strip().lower().replace("-", "_")
    if key == "feedback":
        raise ValueError("node type 'feedback' is not supported; only expectation, affective_state, stressor and response nodes are used")
    if key not in _TYPE_ALIASES:
        raise ValueError(f"unknown node type {value!r}")
    return _TYPE_ALIASES[key]


def pair_key(a: NodeType, b: NodeType) -> tuple[NodeType, NodeType]:
    """Canonical (table-ordered) key for an unordered type pair."""
    ia, ib = TABLE_ORDER.index(a), TABLE_ORDER.index(b)
    return (a, b) if ia <= ib else (b, a)


@dataclass(frozen=True)
class KgNode:
    id: str
    type: NodeType
    text: str
    embedding: Optional[tuple[float, ...]] = None


@dataclass(frozen=True, order=True)
class CaseSubgraph:
    """One case: an expectation hub with a stressor, an affective state and a response.

    Field order gives the deterministic sort order used for tie-breaking.
    """

    exp: str
    str_: str
    aff: str
    resp: str

    def node_ids(self) -> dict[NodeType, str]:
        return {
            NodeType.EXPECTATION: self.exp,
            NodeType.AFFECTIVE_STATE: self.aff,
            NodeType.STRESSOR: self.str_,
            NodeType.RESPONSE: self.resp,
        }


@dataclass
class GraphStats:
    node_counts: dict[NodeType, int]
    edge_counts: dict[tuple[NodeType, NodeType], int]
    duplicate_edges: int = 0

    def edges(self, a: NodeType, b: NodeType) -> int:
        return self.edge_counts.get(pair_key(a, b), 0)

    def table(self) -> list[list[str]]:
        """Rows in the Stressor/Expectation/Response/Affect. State layout.

        Off-diagonal cells hold cross-type edge counts (``-`` where the pair
        is not allowed); diagonal cells hold node counts.
        """
        rows = [[""] + [t.label for t in TABLE_ORDER]]
        for a in TABLE_ORDER:
            row = [a.label]
            for b in TABLE_ORDER:
                if a is b:
                    row.append(str(self.node_counts.get(a, 0)))
                elif frozenset((a, b)) in ALLOWED_PAIRS:
                    row.append(str(self.edges(a, b)))
                else:
                    row.append("-")
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.table())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "nodes": {t.value: self.node_counts.get(t, 0) for t in TABLE_ORDER},
            "edges": {f"{a.value}-{b.value}": self.edges(a, b) for a, b in ALLOWED_PAIR_KEYS},
            "duplicate_edges_ignored": self.duplicate_edges,
            "table": self.table(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


class KnowledgeGraph:
    """Immutable typed graph indexed by node and by neighbour type."""

    def __init__(self, nodes: Iterable[KgNode], edges: Iterable[tuple[str, str]] = ()):
        self.nodes: dict[str, KgNode] = {}
        dim = None
        for node in nodes:
            if node.id in self.nodes:
                raise GraphFormatError(f"duplicate node id {node.id!r}")
            if node.embedding is not None:
                if dim is None:
                    dim = len(node.embedding)
                elif len(node.embedding) != dim:
                    raise GraphFormatError(
                        f"node {node.id!r}: embedding dimension {len(node.embedding)} differs from {dim}"
                    )
            self.nodes[node.id] = node
        self.embedding_dim = dim
        adj: dict[str, dict[NodeType, set[str]]] = {nid: {t: set() for t in NodeType} for nid in self.nodes}
        edge_counts: dict[tuple[NodeType, NodeType], int] = {}
        seen: set[frozenset] = set()
        duplicates = 0
        for a, b in edges:
            self._check_edge(a, b)
            key = frozenset((a, b))
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            ta, tb = self.nodes[a].type, self.nodes[b].type
            adj[a][tb].add(b)
            adj[b][ta].add(a)
            pk = pair_key(ta, tb)
            edge_counts[pk] = edge_counts.get(pk, 0) + 1
        self._adj = {nid: {t: tuple(sorted(ids)) for t, ids in by_type.items()} for nid, by_type in adj.items()}
        self._by_type = {t: tuple(sorted(n.id for n in self.nodes.values() if n.type is t)) for t in NodeType}
        self._edge_counts = edge_counts
        self.duplicate_edges = duplicates
        self._matrices: dict[NodeType, np.ndarray] = {}

    def _check_edge(self, a: str, b: str, line: int | None = None) -> None:
        for end in (a, b):
            if end not in self.nodes:
                raise GraphFormatError(f"edge endpoint {end!r} does not exist", line=line)
        if a == b:
            raise GraphFormatError(f"self-loop on {a!r}", line=line)
        ta, tb = self.nodes[a].type, self.nodes[b].type
        if frozenset((ta, tb)) not in ALLOWED_PAIRS:
            raise GraphFormatError(f"disallowed edge type pair {ta.value}-{tb.value} ({a!r}, {b!r})", line=line)

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> KgNode:
        return self.nodes[node_id]

    def nodes_of(self, t: NodeType) -> tuple[str, ...]:
        """Ids of all nodes of type ``t``, sorted."""
        return self._by_type[t]

    def neighbors(self, node_id: str, t: NodeType) -> tuple[str, ...]:
        """Sorted neighbours of ``node_id`` having type ``t``."""
        return self._adj[node_id][t]

    def has_edge(self, a: str, b: str) -> bool:
        if a not in self.nodes or b not in self.nodes:
            return False
        return b in self._adj[a][self.nodes[b].type]

    def is_case(self, sg: CaseSubgraph) -> bool:
        """Structural check of the expectation-hub pattern."""
        types = {
            sg.exp: NodeType.EXPECTATION,
            sg.str_: NodeType.STRESSOR,
            sg.aff: NodeType.AFFECTIVE_STATE,
            sg.resp: NodeType.RESPONSE,
        }
        for nid, t in types.items():
            if nid not in self.nodes or self.nodes[nid].type is not t:
                return False
        return self.has_edge(sg.str_, sg.exp) and self.has_edge(sg.exp, sg.aff) and self.has_edge(sg.exp, sg.resp)

    def embedding_matrix(self, t: NodeType) -> np.ndarray:
        """Row-normalized embeddings of type ``t`` nodes, in :meth:`nodes_of` order."""
        if t not in self._matrices:
            ids = self.nodes_of(t)
            if self.embedding_dim is None:
                raise ValueError("graph has no node embeddings")
            rows = []
            for nid in ids:
                emb = self.nodes[nid].embedding
                if emb is None:
                    raise ValueError(f"node {nid!r} has no embedding")
                rows.append(emb)
            mat = np.asarray(rows, dtype=np.float64).reshape(len(ids), self.embedding_dim)
            norms = np.linalg.norm(mat, axis=1, keepdims=True)
            mat = np.divide(mat, norms, out=np.zeros_like(mat), where=norms > 0)
            mat.setflags(write=False)
            self._matrices[t] = mat
        return self._matrices[t]

    def subgraph_count(self) -> int:
        """Closed-form number of case subgraphs."""
        total = 0
        for e in self.nodes_of(NodeType.EXPECTATION):
            total += (
                len(self.neighbors(e, NodeType.STRESSOR))
                * len(self.neighbors(e, NodeType.AFFECTIVE_STATE))
                * len(self.neighbors(e, NodeType.RESPONSE))
            )
        return total

    def stats(self) -> GraphStats:
        return graph_stats(self)


def enumerate_subgraphs(g: KnowledgeGraph, limit: int | None = None) -> Iterator[CaseSubgraph]:
    """Yield every case subgraph once, ordered by (expectation, stressor, affect, response) ids."""
    def gen():
        for e in g.nodes_of(NodeType.EXPECTATION):
            for s, a, r in itertools.product(
                g.neighbors(e, NodeType.STRESSOR),
                g.neighbors(e, NodeType.AFFECTIVE_STATE),
                g.neighbors(e, NodeType.RESPONSE),
            ):
                yield CaseSubgraph(e, s, a, r)

    return itertools.islice(gen(), limit) if limit is not None else gen()


def graph_stats(g: KnowledgeGraph) -> GraphStats:
    return GraphStats(
        node_counts={t: len(g.nodes_of(t)) for t in NodeType},
        edge_counts={k: g._edge_counts.get(k, 0) for k in ALLOWED_PAIR_KEYS},
        duplicate_edges=g.duplicate_edges,
    )


def read_nodes(path: str | Path) -> list[KgNode]:
    nodes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(rec, dict):
                raise GraphFormatError("node record must be an object", path, lineno)
            for key in ("id", "type", "text"):
                if key not in rec:
                    raise GraphFormatError(f"missing {key!r}", path, lineno)
            try:
                ntype = parse_node_type(rec["type"])
            except ValueError as exc:
                raise GraphFormatError(str(exc), path, lineno) from None
            emb = rec.get("embedding")
            if emb is not None:
                if not isinstance(emb, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in emb):
                    raise GraphFormatError("'embedding' must be an array of numbers", path, lineno)
                emb = tuple(float(x) for x in emb)
            nodes.append(KgNode(str(rec["id"]), ntype, str(rec["text"]), emb))
    return nodes


def read_edges(path: str | Path) -> list[tuple[int, str, str]]:
    """Edge pairs with their 1-based line numbers."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise GraphFormatError("expected two tab-separated node ids", path, lineno)
            edges.append((lineno, parts[0].strip(), parts[1].strip()))
    return edges


def load_graph(nodes_path: str | Path, edges_path: str | Path) -> KnowledgeGraph:
    """Load and validate a graph; errors carry the offending edge line number."""
    nodes = read_nodes(nodes_path)
    edges = read_edges(edges_path)
    probe = KnowledgeGraph(nodes)
    for lineno, a, b in edges:
        try:
            probe._check_edge(a, b)
        except GraphFormatError as exc:
            raise GraphFormatError(str(exc), edges_path, lineno) from None
    g = KnowledgeGraph(nodes, [(a, b) for _, a, b in edges])
    if g.duplicate_edges:
        logger.warning("%s: %d duplicate edge(s) ignored", edges_path, g.duplicate_edges)
    return g


def write_graph(g: KnowledgeGraph, nodes_path: str | Path, edges_path: str | Path) -> None:
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for nid in sorted(g.nodes):
            n = g.nodes[nid]
            rec = {"id": n.id, "type": n.type.value, "text": n.text}
            if n.embedding is not None:
                rec["embedding"] = list(n.embedding)
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for a in sorted(g.nodes):
            for t in NodeType:
                for b in g.neighbors(a, t):
                    if a < b:
                        fh.write(f"{a}\t{b}\n")
