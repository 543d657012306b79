"""Annotated dialogue data model and corpus loading.

Native corpus format (one JSON document)::

    {"name": "...",
     "dialogues": [
        {"id": "d1", "situation": "...",
         "utterances": [
            {"text": "hi", "role": "user", "initiative": "init",
             "intensity": 4, "strategy": "Question"}, ...]}]}

A bare top-level array of dialogues is accepted too. ``format="esconv"``
reads the original ESConv release instead; see :func:`from_esconv`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence


class CorpusFormatError(ValueError):
    """A corpus record could not be parsed."""

    def __init__(self, message: str, dialogue_id: str | None = None, index: int | None = None):
        where = []
        if dialogue_id is not None:
            where.append(f"dialogue {dialogue_id!r}")
        if index is not None:
            where.append(f"utterance {index}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.dialogue_id = dialogue_id
        self.index = index


class SpeakerRole(enum.Enum):
    USER = "user"
    SYSTEM = "system"


class InitiativeType(enum.Enum):
    INITIATIVE = "init"
    NON_INITIATIVE = "non"


class EafrLabel(enum.Enum):
    EXPRESSION = "E"
    ACTION = "A"
    FEEDBACK = "F"
    REFLECTION = "R"


_EAFR = {
    (SpeakerRole.USER, InitiativeType.INITIATIVE): EafrLabel.EXPRESSION,
    (SpeakerRole.SYSTEM, InitiativeType.INITIATIVE): EafrLabel.ACTION,
    (SpeakerRole.USER, InitiativeType.NON_INITIATIVE): EafrLabel.FEEDBACK,
    (SpeakerRole.SYSTEM, InitiativeType.NON_INITIATIVE): EafrLabel.REFLECTION,
}

_ROLE_NAMES = {
    "user": SpeakerRole.USER,
    "usr": SpeakerRole.USER,
    "seeker": SpeakerRole.USER,
    "system": SpeakerRole.SYSTEM,
    "sys": SpeakerRole.SYSTEM,
    "supporter": SpeakerRole.SYSTEM,
}

_INITIATIVE_NAMES = {
    "init": InitiativeType.INITIATIVE,
    "i": InitiativeType.INITIATIVE,
    "initiative": InitiativeType.INITIATIVE,
    "non": InitiativeType.NON_INITIATIVE,
    "n": InitiativeType.NON_INITIATIVE,
    "non-initiative": InitiativeType.NON_INITIATIVE,
}


@dataclass(frozen=True)
class Utterance:
    index: int
    text: str
    role: SpeakerRole
    initiative: Optional[InitiativeType] = None
    intensity: Optional[int] = None
    strategy: Optional[str] = None

    def __post_init__(self):
        if self.intensity is not None and not 1 <= self.intensity <= 5:
            raise ValueError(f"intensity must be in [1, 5], got {self.intensity}")

    @property
    def is_user(self) -> bool:
        return self.role is SpeakerRole.USER

    @property
    def is_system(self) -> bool:
        return self.role is SpeakerRole.SYSTEM


@dataclass(frozen=True)
class Dialogue:
    id: str
    utterances: tuple[Utterance, ...]
    situation: str = ""

    def __post_init__(self):
        for pos, utt in enumerate(self.utterances):
            if utt.index != pos:
                raise ValueError(
                    f"dialogue {self.id!r}: utterance indices must be contiguous from 0 "
                    f"(position {pos} has index {utt.index})"
                )

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.utterances)

    @classmethod
    def build(cls, id: str, turns: Sequence[Any], situation: str = "") -> "Dialogue":
        """Build a dialogue from ``(role, text, initiative?, intensity?, strategy?)`` tuples.

        Roles and initiative may be given as enums or their short strings
        (``"user"``/``"system"``, ``"init"``/``"non"``).
        """
        utts = []
        for i, turn in enumerate(turns):
            role, text, *rest = turn
            rest = list(rest) + [None] * (3 - len(rest))
            initiative, intensity, strategy = rest[:3]
            utts.append(
                Utterance(
                    index=i,
                    text=text,
                    role=_coerce_role(role, id, i),
                    initiative=_coerce_initiative(initiative, id, i),
                    intensity=intensity,
                    strategy=strategy,
                )
            )
        return cls(id=id, utterances=tuple(utts), situation=situation)


@dataclass(frozen=True)
class Corpus:
    dialogues: tuple[Dialogue, ...] = ()
    name: str = ""

    def __post_init__(self):
        seen = set()
        for d in self.dialogues:
            if d.id in seen:
                raise CorpusFormatError("duplicate dialogue id", d.id)
            seen.add(d.id)

    def __len__(self) -> int:
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)

    def get(self, dialogue_id: str) -> Dialogue:
        for d in self.dialogues:
            if d.id == dialogue_id:
                return d
        raise KeyError(dialogue_id)

    def __add__(self, other: "Corpus") -> "Corpus":
        return Corpus(self.dialogues + other.dialogues, name=self.name or other.name)


def eafr_label(utt: Utterance) -> Optional[EafrLabel]:
    """EAFR label of ``utt``, or None when its initiative is unannotated."""
    if utt.initiative is None:
        return None
    return _EAFR[(utt.role, utt.initiative)]


def _coerce_role(value, dialogue_id, index) -> SpeakerRole:
    if isinstance(value, SpeakerRole):
        return value
    if not isinstance(value, str) or value.strip().lower() not in _ROLE_NAMES:
        raise CorpusFormatError(f"unknown role {value!r}", dialogue_id, index)
    return _ROLE_NAMES[value.strip().lower()]


def _coerce_initiative(value, dialogue_id, index) -> Optional[InitiativeType]:
    if value is None or isinstance(value, InitiativeType):
        return value
    if not isinstance(value, str) or value.strip().lower() not in _INITIATIVE_NAMES:
        raise CorpusFormatError(f"unknown initiative {value!r}", dialogue_id, index)
    return _INITIATIVE_NAMES[value.strip().lower()]


def _coerce_intensity(value, dialogue_id, index) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, bool):
        raise CorpusFormatError(f"invalid intensity {value!r}", dialogue_id, index)
    try:
        level = int(value)
    except (TypeError, ValueError):
        raise CorpusFormatError(f"invalid intensity {value!r}", dialogue_id, index) from None
    if level != value and str(level) != str(value).strip():
        raise CorpusFormatError(f"intensity must be an integer, got {value!r}", dialogue_id, index)
    if not 1 <= level <= 5:
        raise CorpusFormatError(f"intensity {level} outside [1, 5]", dialogue_id, index)
    return level


def _parse_utterance(rec: Any, dialogue_id: str, index: int) -> Utterance:
    if not isinstance(rec, dict):
        raise CorpusFormatError("utterance record must be an object", dialogue_id, index)
    if "text" not in rec or not isinstance(rec["text"], str):
        raise CorpusFormatError("missing or non-string 'text'", dialogue_id, index)
    if "role" not in rec:
        raise CorpusFormatError("missing 'role'", dialogue_id, index)
    strategy = rec.get("strategy")
    if strategy is not None and not isinstance(strategy, str):
        raise CorpusFormatError("'strategy' must be a string", dialogue_id, index)
    return Utterance(
        index=index,
        text=rec["text"],
        role=_coerce_role(rec["role"], dialogue_id, index),
        initiative=_coerce_initiative(rec.get("initiative"), dialogue_id, index),
        intensity=_coerce_intensity(rec.get("intensity"), dialogue_id, index),
        strategy=strategy,
    )


def _parse_dialogue(rec: Any, position: int) -> Dialogue:
    if not isinstance(rec, dict):
        raise CorpusFormatError(f"dialogue record {position} must be an object")
    dialogue_id = str(rec.get("id", position))
    utts = rec.get("utterances")
    if not isinstance(utts, list):
        raise CorpusFormatError("missing 'utterances' array", dialogue_id)
    if not utts:
        raise CorpusFormatError("dialogue has no utterances", dialogue_id)
    situation = rec.get("situation", "")
    if not isinstance(situation, str):
        raise CorpusFormatError("'situation' must be a string", dialogue_id)
    return Dialogue(
        id=dialogue_id,
        utterances=tuple(_parse_utterance(u, dialogue_id, i) for i, u in enumerate(utts)),
        situation=situation,
    )


def from_native(doc: Any, name: str = "") -> Corpus:
    if isinstance(doc, dict):
        name = doc.get("name", name)
        records = doc.get("dialogues")
        if not isinstance(records, list):
            raise CorpusFormatError("corpus document needs a 'dialogues' array")
    elif isinstance(doc, list):
        records = doc
    else:
        raise CorpusFormatError("corpus document must be an object or an array")
    return Corpus(tuple(_parse_dialogue(r, i) for i, r in enumerate(records)), name=name)


def from_esconv(doc: Any, name: str = "esconv", anchor_survey_intensity: bool = True) -> Corpus:
    """Adapt the original ESConv release to the data model.

    Field mapping: ``speaker`` seeker/supporter -> role user/system,
    ``content`` -> text, ``annotation.strategy`` -> strategy. Optional
    ``annotation.initiative`` / ``annotation.intensity`` keys are honoured
    when present. Dialogue ids are ``esconv-<position>`` unless the record
    carries an ``id``.

    ESConv only records the seeker's initial and final emotion intensity
    (``survey_score.seeker``). With ``anchor_survey_intensity`` these are
    attached to the first user utterance after greetings and the last user
    utterance before farewells, unless per-utterance intensities exist.
    """
    from esckit.flow import FlowTag, tag_greetings

    if not isinstance(doc, list):
        raise CorpusFormatError("ESConv document must be an array of dialogues")
    dialogues = []
    for pos, rec in enumerate(doc):
        if not isinstance(rec, dict):
            raise CorpusFormatError(f"dialogue record {pos} must be an object")
        dialogue_id = str(rec.get("id", f"esconv-{pos}"))
        turns = rec.get("dialog")
        if not isinstance(turns, list) or not turns:
            raise CorpusFormatError("missing or empty 'dialog' array", dialogue_id)
        utts = []
        for i, t in enumerate(turns):
            if not isinstance(t, dict):
                raise CorpusFormatError("turn record must be an object", dialogue_id, i)
            ann = t.get("annotation") or {}
            mapped = {
                "text": t.get("content"),
                "role": t.get("speaker"),
                "strategy": ann.get("strategy"),
                "initiative": ann.get("initiative"),
                "intensity": ann.get("intensity"),
            }
            if mapped["text"] is None:
                raise CorpusFormatError("missing 'content'", dialogue_id, i)
            mapped["text"] = mapped["text"].strip() if isinstance(mapped["text"], str) else mapped["text"]
            utts.append(_parse_utterance(mapped, dialogue_id, i))
        dialogue = Dialogue(dialogue_id, tuple(utts), rec.get("situation", "") or "")

        seeker = (rec.get("survey_score") or {}).get("seeker") or {}
        has_local = any(u.intensity is not None for u in utts)
        if anchor_survey_intensity and not has_local:
            initial = _coerce_intensity(seeker.get("initial_emotion_intensity"), dialogue_id, None)
            final = _coerce_intensity(seeker.get("final_emotion_intensity"), dialogue_id, None)
            tags = tag_greetings(dialogue)
            body_users = [u.index for u in utts if u.is_user and tags[u.index] is FlowTag.BODY]
            updates = {}
            if body_users and initial is not None:
                updates[body_users[0]] = initial
            if len(body_users) > 1 and final is not None:
                updates[body_users[-1]] = final
            if updates:
                utts = [
                    Utterance(u.index, u.text, u.role, u.initiative, updates.get(u.index, u.intensity), u.strategy)
                    for u in utts
                ]
                dialogue = Dialogue(dialogue_id, tuple(utts), dialogue.situation)
        dialogues.append(dialogue)
    return Corpus(tuple(dialogues), name=name)


CORPUS_FORMATS = ("native", "esconv")


def load_corpus(path: str | Path, format: str = "native") -> Corpus:
    """Load a corpus file in one of :data:`CORPUS_FORMATS`."""
    path = Path(path)
    if format not in CORPUS_FORMATS:
        raise ValueError(f"unknown corpus format {format!r}; expected one of {CORPUS_FORMATS}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{path}: invalid JSON ({exc})") from exc
    if format == "esconv":
        return from_esconv(doc)
    return from_native(doc, name=path.stem)


def to_native(corpus: Corpus) -> dict:
    """Serialize ``corpus`` to the native JSON document structure."""
    dialogues = []
    for d in corpus:
        utts = []
        for u in d:
            rec: dict[str, Any] = {"text": u.text, "role": u.role.value}
            if u.initiative is not None:
                rec["initiative"] = u.initiative.value
            if u.intensity is not None:
                rec["intensity"] = u.intensity
            if u.strategy is not None:
                rec["strategy"] = u.strategy
            utts.append(rec)
        dialogues.append({"id": d.id, "situation": d.situation, "utterances": utts})
    return {"name": corpus.name, "dialogues": dialogues}


def dump_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_native(corpus), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
