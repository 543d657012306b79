"""Dialogue-flow transitions and conversation-progress phases.

Greeting and farewell utterances (Hi/Bye) are identified by a lexicon
heuristic and excluded from phase assignment. They are still part of the
metric computations in :mod:`esckit.metrics`.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from esckit.dialogue import Dialogue, EafrLabel, InitiativeType, eafr_label
from esckit.metrics import relaxation_terms
from esckit.text.pipeline import read_word_list, tokenize

logger = logging.getLogger(__name__)

N_PHASES = 5


class FlowTag(enum.Enum):
    HI = "Hi"
    BYE = "Bye"
    BODY = "body"


class FlowNode(enum.Enum):
    HI = "H"
    BYE = "B"
    EXPRESSION = "E"
    ACTION = "A"
    FEEDBACK = "F"
    REFLECTION = "R"


START = "Start"
END = "End"
NODE_ORDER = ("H", "E", "A", "F", "R", "B")
ROWS = (START,) + NODE_ORDER
COLUMNS = NODE_ORDER + (END,)

_EAFR_NODE = {
    EafrLabel.EXPRESSION: FlowNode.EXPRESSION,
    EafrLabel.ACTION: FlowNode.ACTION,
    EafrLabel.FEEDBACK: FlowNode.FEEDBACK,
    EafrLabel.REFLECTION: FlowNode.REFLECTION,
}


@dataclass(frozen=True)
class Lexicon:
    """Greeting and farewell phrases, matched as token sequences."""

    greetings: tuple[tuple[str, ...], ...]
    farewells: tuple[tuple[str, ...], ...]

    @classmethod
    def load(cls, greetings: str | Path | None = None, farewells: str | Path | None = None) -> "Lexicon":
        g = read_word_list(greetings, default="greetings.txt")
        f = read_word_list(farewells, default="farewells.txt")
        return cls(_phrases(g), _phrases(f))

    @staticmethod
    def _contains(text: str, phrases) -> bool:
        tokens = tokenize(text)
        for phrase in phrases:
            k = len(phrase)
            for i in range(len(tokens) - k + 1):
                if tuple(tokens[i:i + k]) == phrase:
                    return True
        return False

    def is_greeting(self, text: str) -> bool:
        return self._contains(text, self.greetings)

    def is_farewell(self, text: str) -> bool:
        return self._contains(text, self.farewells)


def _phrases(entries: Iterable[str]) -> tuple[tuple[str, ...], ...]:
    return tuple(t for t in (tuple(tokenize(e)) for e in entries) if t)


_default_lexicon: Lexicon | None = None


def default_lexicon() -> Lexicon:
    global _default_lexicon
    if _default_lexicon is None:
        _default_lexicon = Lexicon.load()
    return _default_lexicon


def tag_greetings(d: Dialogue, lexicon: Lexicon | None = None) -> list[FlowTag]:
    """Tag the maximal greeting prefix Hi and the maximal farewell suffix Bye.

    At least one utterance always stays untagged. When the two runs would
    cover the whole dialogue, the untagged utterance is the one nearest the
    middle that keeps both runs contiguous.
    """
    lexicon = lexicon or default_lexicon()
    texts = [u.text for u in d.utterances]
    n = len(texts)
    if n == 0:
        return []
    p = 0
    while p < n and lexicon.is_greeting(texts[p]):
        p += 1
    q = 0
    while q < n and lexicon.is_farewell(texts[n - 1 - q]):
        q += 1
    if p + q < n:
        hi_end, bye_start = p, n - q
    else:
        lo, hi = max(0, n - q - 1), min(p, n - 1)
        middle = (n - 1) / 2
        m = min(range(lo, hi + 1), key=lambda i: (abs(i - middle), i))
        hi_end, bye_start = m, m + 1
    return [
        FlowTag.HI if i < hi_end else FlowTag.BYE if i >= bye_start else FlowTag.BODY
        for i in range(n)
    ]


def flow_nodes(d: Dialogue, lexicon: Lexicon | None = None) -> tuple[list[str], int]:
    """Flow node labels for ``d`` and the number of excluded (unannotated) body utterances."""
    nodes = []
    excluded = 0
    for u, tag in zip(d.utterances, tag_greetings(d, lexicon)):
        if tag is FlowTag.HI:
            nodes.append(FlowNode.HI.value)
        elif tag is FlowTag.BYE:
            nodes.append(FlowNode.BYE.value)
        else:
            label = eafr_label(u)
            if label is None:
                excluded += 1
            else:
                nodes.append(_EAFR_NODE[label].value)
    return nodes, excluded


def _zero_matrix() -> dict[str, dict[str, int]]:
    return {r: {c: 0 for c in COLUMNS} for r in ROWS}


@dataclass
class TransitionMatrix:
    """Transition counts between flow nodes, with Start and End states."""

    counts: dict[str, dict[str, int]] = field(default_factory=_zero_matrix)
    dialogues: int = 0
    excluded: int = 0

    def __add__(self, other: "TransitionMatrix") -> "TransitionMatrix":
        out = TransitionMatrix(dialogues=self.dialogues + other.dialogues, excluded=self.excluded + other.excluded)
        for r in ROWS:
            for c in COLUMNS:
                out.counts[r][c] = self.counts[r][c] + other.counts[r][c]
        return out

    @property
    def total(self) -> int:
        return sum(sum(row.values()) for row in self.counts.values())

    def proportions(self) -> dict[str, dict[str, float]]:
        out = {}
        for r in ROWS:
            row_total = sum(self.counts[r].values())
            out[r] = {c: (self.counts[r][c] / row_total if row_total else 0.0) for c in COLUMNS}
        return out

    def node_counts(self) -> dict[str, int]:
        return {node: sum(self.counts[node].values()) for node in NODE_ORDER}

    def start_distribution(self) -> dict[str, float]:
        return self.proportions()[START]

    def end_distribution(self) -> dict[str, float]:
        ends = {node: self.counts[node][END] for node in NODE_ORDER}
        total = sum(ends.values())
        return {node: (v / total if total else 0.0) for node, v in ends.items()}

    def label_distribution(self) -> dict[str, float]:
        nc = self.node_counts()
        total = sum(nc.values())
        return {node: (v / total if total else 0.0) for node, v in nc.items()}

    def to_dict(self) -> dict:
        return {
            "dialogues": self.dialogues,
            "excluded_unannotated": self.excluded,
            "states": {"rows": list(ROWS), "columns": list(COLUMNS)},
            "counts": self.counts,
            "proportions": self.proportions(),
            "start": self.start_distribution(),
            "end": self.end_distribution(),
            "labels": self.label_distribution(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """Long format: ``source,target,count,proportion``."""
        props = self.proportions()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source", "target", "count", "proportion"])
        for r in ROWS:
            for c in COLUMNS:
                w.writerow([r, c, self.counts[r][c], repr(props[r][c])])
        return buf.getvalue()

    def to_dot(self) -> str:
        props = self.proportions()
        lines = ["digraph flow {", "  rankdir=LR;"]
        lines.append(f'  "{START}" [shape=circle];')
        lines.append(f'  "{END}" [shape=circle];')
        labels = self.label_distribution()
        for node in NODE_ORDER:
            lines.append(f'  "{node}" [shape=box, label="{node}\\n{labels[node]:.3f}"];')
        for r in ROWS:
            for c in COLUMNS:
                n = self.counts[r][c]
                if n:
                    lines.append(f'  "{r}" -> "{c}" [label="{n} ({props[r][c]:.3f})", weight={n}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def transition_matrix(dialogues: Iterable[Dialogue], lexicon: Lexicon | None = None) -> TransitionMatrix:
    """Count consecutive flow-node transitions, including Start and End edges.

    Body utterances without an initiative annotation are skipped; their
    neighbours are linked directly and the skip is counted.
    """
    tm = TransitionMatrix()
    for d in dialogues:
        nodes, excluded = flow_nodes(d, lexicon)
        if excluded:
            logger.info("dialogue %r: %d unannotated body utterance(s) excluded from flow", d.id, excluded)
        tm.excluded += excluded
        tm.dialogues += 1
        path = [START] + nodes + [END]
        for a, b in zip(path, path[1:]):
            tm.counts[a][b] += 1
    return tm


# -- conversation progress ---------------------------------------------------


def phase_of(body_index: int, n_body: int, n_phases: int = N_PHASES) -> int:
    return min(max(n_phases * body_index // n_body, 0), n_phases - 1)


@dataclass
class PhaseTally:
    """Integer sums for one phase; all fields pool additively."""

    init: int = 0
    non: int = 0
    unlabeled: int = 0
    rel_init_sum: int = 0
    rel_init_n: int = 0
    rel_non_sum: int = 0
    rel_non_n: int = 0
    rel_all_sum: int = 0
    rel_all_n: int = 0

    def __add__(self, other: "PhaseTally") -> "PhaseTally":
        return PhaseTally(**{k: getattr(self, k) + getattr(other, k) for k in self.__dataclass_fields__})


@dataclass
class ProgressProfile:
    phases: list[PhaseTally] = field(default_factory=lambda: [PhaseTally() for _ in range(N_PHASES)])
    dialogues: int = 0

    def __add__(self, other: "ProgressProfile") -> "ProgressProfile":
        return ProgressProfile([a + b for a, b in zip(self.phases, other.phases)], self.dialogues + other.dialogues)

    def summary(self) -> list[dict]:
        out = []
        for i, p in enumerate(self.phases):
            labeled = p.init + p.non
            out.append(
                {
                    "phase": i,
                    "system_init": p.init,
                    "system_non": p.non,
                    "system_unlabeled": p.unlabeled,
                    "init_proportion": p.init / labeled if labeled else None,
                    "non_proportion": p.non / labeled if labeled else None,
                    "intensity_change_init": p.rel_init_sum / p.rel_init_n if p.rel_init_n else None,
                    "intensity_change_non": p.rel_non_sum / p.rel_non_n if p.rel_non_n else None,
                    "intensity_change_all": p.rel_all_sum / p.rel_all_n if p.rel_all_n else None,
                }
            )
        return out

    def to_dict(self) -> dict:
        return {
            "dialogues": self.dialogues,
            "n_phases": len(self.phases),
            "greetings": "Hi/Bye utterances excluded from phase assignment",
            "phases": self.summary(),
            "sums": [vars(p).copy() for p in self.phases],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """Long format: ``phase,series,value`` for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase", "series", "value"])
        for row in self.summary():
            for key, value in row.items():
                if key == "phase":
                    continue
                w.writerow([row["phase"], key, "" if value is None else repr(value)])
        return buf.getvalue()


def dialogue_profile(d: Dialogue, lexicon: Lexicon | None = None) -> ProgressProfile:
    tags = tag_greetings(d, lexicon)
    body = [u for u, tag in zip(d.utterances, tags) if tag is FlowTag.BODY]
    rel = relaxation_terms(d)
    prof = ProgressProfile(dialogues=1)
    for b, u in enumerate(body):
        if not u.is_system:
            continue
        p = prof.phases[phase_of(b, len(body))]
        if u.initiative is None:
            p.unlabeled += 1
        elif u.initiative is InitiativeType.INITIATIVE:
            p.init += 1
        else:
            p.non += 1
        if u.index in rel:
            value = rel[u.index]
            p.rel_all_sum += value
            p.rel_all_n += 1
            if u.initiative is InitiativeType.INITIATIVE:
                p.rel_init_sum += value
                p.rel_init_n += 1
            elif u.initiative is InitiativeType.NON_INITIATIVE:
                p.rel_non_sum += value
                p.rel_non_n += 1
    return prof


def progress_profile(dialogues: Iterable[Dialogue], lexicon: Lexicon | None = None) -> ProgressProfile:
    """Pool per-phase initiative counts and intensity changes over a corpus.

    Body utterance ``b`` of a dialogue with ``n`` body utterances lands in
    phase ``floor(5 * b / n)``.
    """
    prof = ProgressProfile()
    for d in dialogues:
        prof = prof + dialogue_profile(d, lexicon)
    return prof


def phase_assignment(d: Dialogue, lexicon: Lexicon | None = None) -> Sequence[int | None]:
    """Phase of every utterance, None for Hi/Bye utterances."""
    tags = tag_greetings(d, lexicon)
    n_body = sum(1 for t in tags if t is FlowTag.BODY)
    out: list[int | None] = []
    b = 0
    for tag in tags:
        if tag is FlowTag.BODY:
            out.append(phase_of(b, n_body))
            b += 1
        else:
            out.append(None)
    return out
