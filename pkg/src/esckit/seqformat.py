"""Seq2Seq linearization of dialogue context, retrieved knowledge and targets.

Input sequence::

    [CLS] [situ.] <situation> [usr] <u1> [sys] <u2> ... [know.] [xR.] <c> [xI.] <c>
          [xW.] <c> [xN.] <c> [xE.] <c> [Exp.] <t> [Aff.] <t> [Str.] <t> [Resp.] <t> ...

Output sequence::

    [strategy] <label> [response] <text>

Fields are separated by single spaces and payloads are copied verbatim.
A payload substring that looks like a special token (``[usr]``,
``[[usr]]``, ``[[usr]`` ...) gets one extra bracket on each side, so a
bare token in the encoded text is always structural. Absent knowledge
fields are omitted together with their tag; every retrieved subgraph gets
its own ``[know.]`` section, in rank order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from esckit.dialogue import SpeakerRole, Utterance

FORMAT_VERSION = "1"
DEFAULT_BUDGET = 160

CLS = "[CLS]"
SITU = "[situ.]"
USR = "[usr]"
SYS = "[sys]"
KNOW = "[know.]"
STRATEGY = "[strategy]"
RESPONSE = "[response]"

# knowledge field tags in their fixed serialization order
EXPANSION_TAGS = ("[xR.]", "[xI.]", "[xW.]", "[xN.]", "[xE.]")
EXPANSION_KEYS = ("xReact", "xIntent", "xWant", "xNeed", "xEffect")
NODE_TAGS = ("[Exp.]", "[Aff.]", "[Str.]", "[Resp.]")
NODE_KEYS = ("expectation", "affective_state", "stressor", "response")
KNOWLEDGE_TAGS = EXPANSION_TAGS + NODE_TAGS
KNOWLEDGE_KEYS = EXPANSION_KEYS + NODE_KEYS

SPECIAL_TOKENS = (CLS, SITU, USR, SYS, KNOW) + KNOWLEDGE_TAGS + (STRATEGY, RESPONSE)

_NAMES = "|".join(re.escape(t[1:-1]) for t in SPECIAL_TOKENS)
_RUN = re.compile(r"(\[+)(" + _NAMES + r")(\]+)")


class FormatError(ValueError):
    """Malformed linearized text; ``raw`` holds the offending input."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class BudgetError(ValueError):
    pass


def escape(text: str) -> str:
    return _RUN.sub(lambda m: "[" + m.group(0) + "]", text)


def unescape(text: str) -> str:
    def undo(m):
        left, name, right = m.groups()
        if len(left) >= 2 and len(right) >= 2:
            return left[1:] + name + right[1:]
        return m.group(0)

    return _RUN.sub(undo, text)


def _structural(text: str) -> list[tuple[int, int, str]]:
    """Positions of bare special tokens: ``(start, end, token)``."""
    out = []
    for m in _RUN.finditer(text):
        left, name, right = m.groups()
        if len(left) == 1 and len(right) == 1:
            out.append((m.start(), m.end(), m.group(0)))
    return out


@dataclass(frozen=True)
class Knowledge:
    """One knowledge section: commonsense expansions plus one subgraph's node texts.

    Keys are those of :data:`KNOWLEDGE_KEYS`; absent keys are not serialized.
    """

    fields: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.fields) - set(KNOWLEDGE_KEYS)
        if unknown:
            raise ValueError(f"unknown knowledge fields: {sorted(unknown)}")

    def ordered(self) -> list[tuple[str, str]]:
        return [(tag, self.fields[key]) for tag, key in zip(KNOWLEDGE_TAGS, KNOWLEDGE_KEYS) if key in self.fields]

    def __eq__(self, other):
        return isinstance(other, Knowledge) and dict(self.fields) == dict(other.fields)

    def __hash__(self):
        return hash(tuple(sorted(self.fields.items())))


def knowledge_from_retrieval(expansions: Mapping[str, Optional[str]], subgraph_texts: Mapping[str, str]) -> Knowledge:
    """Combine expansion texts and a subgraph's node texts into one section."""
    fields = {k: v for k, v in expansions.items() if v is not None and k in EXPANSION_KEYS}
    fields.update({k: v for k, v in subgraph_texts.items() if k in NODE_KEYS})
    return Knowledge(fields)


@dataclass(frozen=True)
class LinearizedInput:
    situation: str
    context: tuple[tuple[SpeakerRole, str], ...]
    knowledge: tuple[Knowledge, ...] = ()
    dropped: int = 0  # oldest utterances removed to fit the budget

    @property
    def text(self) -> str:
        return _join_input(self.situation, self.context, self.knowledge)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class LinearizedOutput:
    strategy: str
    response: str

    @property
    def text(self) -> str:
        return f"{STRATEGY} {escape(self.strategy)} {RESPONSE} {escape(self.response)}"

    def __str__(self) -> str:
        return self.text


def _join_input(situation, context, knowledge) -> str:
    parts = [CLS, SITU, escape(situation)]
    for role, text in context:
        parts.append(USR if role is SpeakerRole.USER else SYS)
        parts.append(escape(text))
    for section in knowledge:
        parts.append(KNOW)
        for tag, value in section.ordered():
            parts.append(tag)
            parts.append(escape(value))
    return " ".join(parts)


def count_units(text: str) -> int:
    """Budget units: whitespace-delimited chunks."""
    return len(text.split())


def encode_input(
    situation: str,
    context: Sequence[Utterance | tuple[SpeakerRole, str]],
    knowledge: Iterable[Knowledge] = (),
    budget: Optional[int] = DEFAULT_BUDGET,
) -> LinearizedInput:
    """Linearize context and knowledge, dropping the oldest utterances to fit ``budget``.

    ``budget=None`` disables truncation.
    """
    pairs = tuple((u.role, u.text) if isinstance(u, Utterance) else (u[0], u[1]) for u in context)
    if not pairs:
        raise ValueError("context must contain at least one utterance")
    knowledge = tuple(knowledge)
    if budget is None:
        return LinearizedInput(situation, pairs, knowledge)
    # units are additive across fields because fields are space-joined
    fixed = count_units(_join_input(situation, (), knowledge))
    sizes = [1 + count_units(escape(text)) for _, text in pairs]
    total = fixed + sum(sizes)
    start = 0
    while total > budget and start < len(pairs) - 1:
        total -= sizes[start]
        start += 1
    if total > budget:
        raise BudgetError(
            f"budget of {budget} units cannot hold situation, knowledge and the last utterance ({total} units)"
        )
    return LinearizedInput(situation, pairs[start:], knowledge, dropped=start)


def encode_dialogue(dialogue, turn: int, knowledge: Iterable[Knowledge] = (), budget: Optional[int] = DEFAULT_BUDGET) -> LinearizedInput:
    """Linearize ``dialogue.utterances[:turn]`` (the context preceding ``turn``)."""
    return encode_input(dialogue.situation, dialogue.utterances[:turn], knowledge, budget)


def encode_output(strategy: str, response: str) -> LinearizedOutput:
    return LinearizedOutput(strategy, response)


def _payload(text: str, start: int, end: int) -> str:
    # each field is "<tag> <payload>"; drop the single separator space on each side
    chunk = text[start:end]
    if chunk.startswith(" "):
        chunk = chunk[1:]
    return chunk


def parse_input(text: str) -> LinearizedInput:
    """Inverse of :func:`encode_input` (for the retained context)."""
    tokens = _structural(text)
    if not tokens or tokens[0][2] != CLS or tokens[0][0] != 0:
        raise FormatError("input must start with [CLS]", text)
    if len(tokens) < 2 or tokens[1][2] != SITU:
        raise FormatError("missing [situ.] after [CLS]", text)
    fields = []
    for i, (start, end, tok) in enumerate(tokens):
        stop = tokens[i + 1][0] - 1 if i + 1 < len(tokens) else len(text)
        if i + 1 < len(tokens) and text[stop] != " ":
            raise FormatError(f"expected a space before {tokens[i + 1][2]}", text)
        fields.append((tok, unescape(_payload(text, end, stop))))
    if fields[0][1]:
        raise FormatError("unexpected text after [CLS]", text)
    situation = fields[1][1]
    context = []
    knowledge: list[Knowledge] = []
    current: Optional[dict] = None
    last_tag_index = -1
    for tok, payload in fields[2:]:
        if tok in (USR, SYS):
            if knowledge or current is not None:
                raise FormatError("utterance after knowledge section", text)
            context.append((SpeakerRole.USER if tok == USR else SpeakerRole.SYSTEM, payload))
        elif tok == KNOW:
            if payload:
                raise FormatError("unexpected text after [know.]", text)
            if current is not None:
                knowledge.append(Knowledge(current))
            current = {}
            last_tag_index = -1
        elif tok in KNOWLEDGE_TAGS:
            if current is None:
                raise FormatError(f"{tok} outside a knowledge section", text)
            idx = KNOWLEDGE_TAGS.index(tok)
            if idx <= last_tag_index:
                raise FormatError(f"{tok} out of order in knowledge section", text)
            current[KNOWLEDGE_KEYS[idx]] = payload
            last_tag_index = idx
        else:
            raise FormatError(f"unexpected token {tok}", text)
    if current is not None:
        knowledge.append(Knowledge(current))
    return LinearizedInput(situation, tuple(context), tuple(knowledge))


def parse_output(text: str) -> tuple[str, str]:
    """Split a generated sequence into ``(strategy, response)``.

    Uses the first bare ``[strategy]`` and the first bare ``[response]``
    after it. The strategy is whitespace-trimmed; the response loses only
    its leading separator space.
    """
    tokens = _structural(text)
    s_pos = next((t for t in tokens if t[2] == STRATEGY), None)
    if s_pos is None:
        raise FormatError("missing [strategy] marker", text)
    r_pos = next((t for t in tokens if t[2] == RESPONSE and t[0] >= s_pos[1]), None)
    if r_pos is None:
        raise FormatError("missing [response] marker after [strategy]", text)
    strategy = unescape(text[s_pos[1]:r_pos[0]]).strip()
    response = unescape(_payload(text, r_pos[1], len(text)))
    return strategy, response
