"""Emotional-support metrics: Proactivity, Information, Repetition, Relaxation.

All class-split values follow the Init./Non./All layout. Denominators
count system utterances, so corpus aggregation is a micro-average over
system utterances; the per-dialogue macro-average is reported alongside.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from esckit.dialogue import Dialogue, InitiativeType, SpeakerRole, Utterance
from esckit.text.pipeline import TextPipeline, build_vocabulary, frequent_terms

logger = logging.getLogger(__name__)

METRICS = ("proactivity", "information", "repetition", "relaxation")
CLASS_COLUMNS = ("init", "non", "all")


class MetricError(ValueError):
    """A metric is undefined for the given dialogue."""


class SimulationError(RuntimeError):
    """An intensity estimator or feedback provider failed."""


@dataclass(frozen=True)
class ClassValues:
    """A metric split by the initiative class of system utterances.

    ``None`` marks an absent value (empty class, or class columns that
    cannot be computed because some system utterance lacks initiative).
    """

    init: Optional[float]
    non: Optional[float]
    all: Optional[float]
    unlabeled: int = 0
    skipped: int = 0

    def as_dict(self) -> dict:
        return {"init": self.init, "non": self.non, "all": self.all}


@dataclass
class Tally:
    """Poolable sums and counts behind a :class:`ClassValues`."""

    init_sum: int = 0
    init_n: int = 0
    non_sum: int = 0
    non_n: int = 0
    all_sum: int = 0
    all_n: int = 0
    unlabeled: int = 0
    skipped: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(*(a + b for a, b in zip(self._fields(), other._fields())))

    def __iadd__(self, other: "Tally") -> "Tally":
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def _fields(self):
        return (self.init_sum, self.init_n, self.non_sum, self.non_n,
                self.all_sum, self.all_n, self.unlabeled, self.skipped)

    def values(self) -> ClassValues:
        return ClassValues(
            init=_ratio(self.init_sum, self.init_n),
            non=_ratio(self.non_sum, self.non_n),
            all=_ratio(self.all_sum, self.all_n),
            unlabeled=self.unlabeled,
            skipped=self.skipped,
        )


def _ratio(num, den) -> Optional[float]:
    return num / den if den else None


def system_utterances(d: Dialogue) -> list[Utterance]:
    return [u for u in d.utterances if u.is_system]


# -- per-utterance terms -----------------------------------------------------


def information_terms(d: Dialogue, pipeline: TextPipeline | None = None) -> dict[int, int]:
    """Number of new frequent terms introduced by each system utterance.

    A frequent term counts for utterance ``i`` when no earlier utterance of
    either role contains it.
    """
    vocab, termsets = build_vocabulary(d, pipeline)
    frequent = frequent_terms(vocab)
    seen: set = set()
    out = {}
    for u, terms in zip(d.utterances, termsets):
        if u.is_system:
            out[u.index] = len((terms & frequent) - seen)
        seen |= terms
    return out


def repetition_terms(d: Dialogue, pipeline: TextPipeline | None = None) -> dict[int, int]:
    """Number of frequent terms in each system utterance already used by the user."""
    vocab, termsets = build_vocabulary(d, pipeline)
    frequent = frequent_terms(vocab)
    user_seen: set = set()
    out = {}
    for u, terms in zip(d.utterances, termsets):
        if u.is_system:
            out[u.index] = len(terms & frequent & user_seen)
        else:
            user_seen |= terms
    return out


def relaxation_terms(d: Dialogue) -> dict[int, int]:
    """Intensity change around each system utterance that has annotated users on both sides.

    The value is the intensity of the nearest intensity-annotated user
    utterance before minus that of the nearest one after. System
    utterances lacking either side are omitted.
    """
    n = len(d.utterances)
    before: list[Optional[int]] = [None] * n
    after: list[Optional[int]] = [None] * n
    last = None
    for u in d.utterances:
        before[u.index] = last
        if u.is_user and u.intensity is not None:
            last = u.intensity
    nxt = None
    for u in reversed(d.utterances):
        after[u.index] = nxt
        if u.is_user and u.intensity is not None:
            nxt = u.intensity
    return {
        u.index: before[u.index] - after[u.index]
        for u in d.utterances
        if u.is_system and before[u.index] is not None and after[u.index] is not None
    }


# -- tallies -----------------------------------------------------------------


def _class_tally(d: Dialogue, per_utt: Mapping[int, int], count_all_system: bool) -> Tally:
    """Pool ``per_utt`` values by class.

    ``count_all_system`` puts every system utterance in the denominator
    (Information, Repetition); otherwise only utterances present in
    ``per_utt`` are counted and the rest are reported as skipped.
    """
    systems = system_utterances(d)
    members = systems if count_all_system else [u for u in systems if u.index in per_utt]
    t = Tally()
    t.skipped = len(systems) - len(members)
    t.unlabeled = sum(1 for u in members if u.initiative is None)
    for u in members:
        value = per_utt.get(u.index, 0)
        t.all_sum += value
        t.all_n += 1
        if t.unlabeled:
            continue
        if u.initiative is InitiativeType.INITIATIVE:
            t.init_sum += value
            t.init_n += 1
        else:
            t.non_sum += value
            t.non_n += 1
    return t


def proactivity_tally(d: Dialogue) -> Tally:
    """Initiative counts over system utterances; raises when undefined."""
    systems = system_utterances(d)
    if not systems:
        raise MetricError(f"dialogue {d.id!r}: no system utterances")
    for u in systems:
        if u.initiative is None:
            raise MetricError(f"dialogue {d.id!r}: system utterance {u.index} lacks initiative")
    init = sum(1 for u in systems if u.initiative is InitiativeType.INITIATIVE)
    n = len(systems)
    return Tally(init_sum=init, init_n=n, non_sum=n - init, non_n=n, all_sum=init, all_n=n)


def information_tally(d: Dialogue, pipeline: TextPipeline | None = None) -> Tally:
    return _class_tally(d, information_terms(d, pipeline), count_all_system=True)


def repetition_tally(d: Dialogue, pipeline: TextPipeline | None = None) -> Tally:
    return _class_tally(d, repetition_terms(d, pipeline), count_all_system=True)


def relaxation_tally(d: Dialogue) -> Tally:
    return _class_tally(d, relaxation_terms(d), count_all_system=False)


def _dialogue_values(t: Tally) -> ClassValues:
    v = t.values()
    if t.unlabeled:
        return ClassValues(None, None, v.all, t.unlabeled, t.skipped)
    return v


# -- per-dialogue metrics ----------------------------------------------------


def proactivity(d: Dialogue) -> float:
    """Fraction of system utterances that take the initiative."""
    t = proactivity_tally(d)
    return t.init_sum / t.init_n


def information(d: Dialogue, pipeline: TextPipeline | None = None) -> ClassValues:
    return _dialogue_values(information_tally(d, pipeline))


def repetition(d: Dialogue, pipeline: TextPipeline | None = None) -> ClassValues:
    return _dialogue_values(repetition_tally(d, pipeline))


def relaxation(d: Dialogue) -> ClassValues:
    return _dialogue_values(relaxation_tally(d))


# -- simulated feedback ------------------------------------------------------


class IntensityEstimator(Protocol):
    """Maps a user utterance (and what preceded it) to an intensity level 1-5.

    Returning None means the intensity is not available for that text.
    """

    thread_safe: bool

    def __call__(self, text: str, context: Sequence[Utterance]) -> Optional[int]: ...


class FeedbackProvider(Protocol):
    """Produces the user's reply to a system response."""

    thread_safe: bool

    def __call__(self, situation: str, context: Sequence[Utterance], response: str) -> str: ...


class ConstantIntensityEstimator:
    thread_safe = True

    def __init__(self, level: int):
        if not 1 <= level <= 5:
            raise ValueError("level must be in [1, 5]")
        self.level = level

    def __call__(self, text, context):
        return self.level


class AnnotationIntensityEstimator:
    """Reads intensities from a dialogue's user-utterance annotations.

    Lookup is by text. When several annotated user utterances share the
    text, the first one at or after ``len(context)`` wins, falling back to
    the last one before it.
    """

    thread_safe = True

    def __init__(self, dialogue: Dialogue):
        self._by_text: dict[str, list[tuple[int, int]]] = {}
        for u in dialogue.utterances:
            if u.is_user and u.intensity is not None:
                self._by_text.setdefault(u.text, []).append((u.index, u.intensity))

    def __call__(self, text, context):
        hits = self._by_text.get(text)
        if not hits:
            return None
        pos = len(context)
        for index, level in hits:
            if index >= pos:
                return level
        return hits[-1][1]


class ReplayFeedbackProvider:
    """Replays the recorded user reply that follows the response position.

    The position is ``len(context)``; the reply is the first later user
    utterance (with an intensity annotation, when ``annotated_only``).
    """

    thread_safe = True

    def __init__(self, dialogue: Dialogue, annotated_only: bool = True):
        self.dialogue = dialogue
        self.annotated_only = annotated_only

    def __call__(self, situation, context, response):
        pos = len(context)
        for u in self.dialogue.utterances[pos + 1:]:
            if u.is_user and (u.intensity is not None or not self.annotated_only):
                return u.text
        raise LookupError(f"no recorded user reply after position {pos}")


def _checked_level(value, what: str) -> Optional[int]:
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
        raise SimulationError(f"{what}: estimator returned {value!r}, expected an integer in [1, 5]")
    return value


def simulated_relaxation(
    d: Dialogue,
    position: int,
    response: str,
    estimator: IntensityEstimator,
    feedback: FeedbackProvider,
) -> float:
    """Relaxation for a (generated) response placed at ``position``.

    The intensity before is estimated on the nearest earlier user utterance
    for which the estimator yields a value; the intensity after is
    estimated on the simulated user feedback to ``response``.
    """
    if not 0 <= position <= len(d.utterances):
        raise IndexError(f"position {position} outside dialogue {d.id!r}")
    context = d.utterances[:position]
    where = f"dialogue {d.id!r} position {position}"
    before = None
    for u in reversed(context):
        if not u.is_user:
            continue
        try:
            before = estimator(u.text, d.utterances[: u.index])
        except Exception as exc:
            raise SimulationError(f"{where}: estimator failed on utterance {u.index}: {exc}") from exc
        before = _checked_level(before, where)
        if before is not None:
            break
    if before is None:
        raise MetricError(f"{where}: no user utterance with estimable intensity before it")
    try:
        reply = feedback(d.situation, context, response)
    except Exception as exc:
        raise SimulationError(f"{where}: feedback provider failed: {exc}") from exc
    try:
        after = estimator(reply, tuple(context) + (Utterance(position, response, SpeakerRole.SYSTEM),))
    except Exception as exc:
        raise SimulationError(f"{where}: estimator failed on feedback: {exc}") from exc
    after = _checked_level(after, where)
    if after is None:
        raise SimulationError(f"{where}: feedback intensity not estimable")
    return float(before - after)


def simulated_relaxation_batch(
    d: Dialogue,
    responses: Mapping[int, str],
    estimator: IntensityEstimator,
    feedback: FeedbackProvider,
    workers: int = 1,
) -> dict[int, float]:
    """Run :func:`simulated_relaxation` for many positions.

    Runs in a thread pool only when ``workers > 1`` and both collaborators
    declare ``thread_safe``; results are keyed by position either way.
    """
    positions = sorted(responses)
    parallel = workers > 1 and getattr(estimator, "thread_safe", False) and getattr(feedback, "thread_safe", False)

    def run(pos):
        return simulated_relaxation(d, pos, responses[pos], estimator, feedback)

    if parallel:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(run, positions))
    else:
        values = [run(p) for p in positions]
    return dict(zip(positions, values))


# -- corpus report -----------------------------------------------------------


@dataclass
class MetricsReport:
    name: str
    dialogues: int
    proactivity: ClassValues
    information: ClassValues
    repetition: ClassValues
    relaxation: ClassValues
    macro: dict[str, ClassValues]
    counts: dict[str, int]
    errors: list[str] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return self.relaxation.skipped

    def metric(self, name: str) -> ClassValues:
        return getattr(self, name)

    def to_dict(self) -> dict:
        def block(values: Mapping[str, ClassValues]) -> dict:
            out = {}
            for m in METRICS:
                v = values[m]
                if m == "proactivity":
                    out[m] = {"init": v.init, "non": v.non}
                else:
                    out[m] = v.as_dict()
            return out

        return {
            "corpus": self.name,
            "dialogues": self.dialogues,
            "micro": block({m: self.metric(m) for m in METRICS}),
            "macro": block(self.macro),
            "counts": dict(self.counts),
            "relaxation_skipped": self.skipped,
            "errors": list(self.errors),
            "notes": {
                "micro": "pooled over system utterances",
                "macro": "mean of per-dialogue values",
                "greetings": "greeting/farewell utterances are included in these metrics",
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def rows(self) -> list[tuple[str, str, str, Optional[float]]]:
        """Long-format rows ``(averaging, metric, column, value)``."""
        d = self.to_dict()
        rows = []
        for averaging in ("micro", "macro"):
            for metric, cols in d[averaging].items():
                for col, value in cols.items():
                    rows.append((averaging, metric, col, value))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["averaging", "metric", "column", "value"])
        for averaging, metric, col, value in self.rows():
            w.writerow([averaging, metric, col, "" if value is None else repr(value)])
        for key, value in self.counts.items():
            w.writerow(["count", "system_utterances", key, value])
        w.writerow(["count", "relaxation", "skipped", self.skipped])
        return buf.getvalue()


def _macro(values: Iterable[ClassValues], columns=CLASS_COLUMNS) -> ClassValues:
    values = list(values)
    out = {}
    for col in columns:
        present = [getattr(v, col) for v in values if getattr(v, col) is not None]
        out[col] = statistics.fmean(present) if present else None
    return ClassValues(out["init"], out["non"], out["all"])


def corpus_report(
    dialogues: Iterable[Dialogue], pipeline: TextPipeline | None = None, name: str | None = None
) -> MetricsReport:
    """Aggregate all four metrics over a corpus.

    Dialogues whose proactivity is undefined are left out of Proactivity
    and listed in ``errors``; dialogues with unlabeled system utterances
    contribute only to the "all" columns.
    """
    if name is None:
        name = getattr(dialogues, "name", "")
    dialogues = list(dialogues)
    pro, inf, rep, rel = Tally(), Tally(), Tally(), Tally()
    macro: dict[str, list[ClassValues]] = {m: [] for m in METRICS}
    errors: list[str] = []
    n_init = n_non = n_unlabeled = n_all = 0
    for d in dialogues:
        for u in system_utterances(d):
            n_all += 1
            if u.initiative is None:
                n_unlabeled += 1
            elif u.initiative is InitiativeType.INITIATIVE:
                n_init += 1
            else:
                n_non += 1
        try:
            t = proactivity_tally(d)
        except MetricError as exc:
            errors.append(f"proactivity: {exc}")
        else:
            pro += t
            p = t.init_sum / t.init_n
            macro["proactivity"].append(ClassValues(p, t.non_sum / t.non_n, p))
        for metric, tally_fn, acc in (
            ("information", information_tally, inf),
            ("repetition", repetition_tally, rep),
        ):
            t = tally_fn(d, pipeline)
            acc += t
            macro[metric].append(_dialogue_values(t))
            if t.unlabeled:
                errors.append(
                    f"{metric}: dialogue {d.id!r}: {t.unlabeled} system utterance(s) lack initiative; "
                    "class columns omitted"
                )
        t = relaxation_tally(d)
        rel += t
        macro["relaxation"].append(_dialogue_values(t))
        if t.unlabeled:
            errors.append(
                f"relaxation: dialogue {d.id!r}: {t.unlabeled} system utterance(s) lack initiative; "
                "class columns omitted"
            )

    pro_values = pro.values()
    report = MetricsReport(
        name=name,
        dialogues=len(dialogues),
        proactivity=ClassValues(pro_values.init, pro_values.non, pro_values.init),
        information=inf.values(),
        repetition=rep.values(),
        relaxation=rel.values(),
        macro={m: _macro(v) for m, v in macro.items()},
        counts={"init": n_init, "non": n_non, "unlabeled": n_unlabeled, "all": n_all},
        errors=sorted(errors),
    )
    for e in errors:
        logger.info(e)
    return report
