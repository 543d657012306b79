"""Regenerate the hand-written fixture inputs (corpus, toy graph, query).

Goldens are not produced here; see tests/make_goldens.py.
"""

import json
from pathlib import Path

from esckit.dialogue import Corpus, Dialogue, dump_corpus
from esckit.kg import KgNode, KnowledgeGraph, NodeType, write_graph

HERE = Path(__file__).parent


def corpus3() -> Corpus:
    d1 = Dialogue.build("job-loss", [
        ("user", "Hello!", "init", 4),
        ("system", "Hi there, how are you feeling today?", "init", None, "Question"),
        ("user", "I lost my job last week and I feel awful about the job search.", "init", 4),
        ("system", "I am sorry you lost your job. Losing a job is really hard.", "non", None, "Reflection of feelings"),
        ("user", "Yes, the job search makes me anxious.", "non", 4),
        ("system", "Have you tried talking to a career counselor about the search?", "init", None, "Providing Suggestions"),
        ("user", "No, but a counselor sounds helpful. Thanks.", "non", 2),
        ("system", "A counselor can help with the search. You will find a new job.", "non", None, "Affirmation and Reassurance"),
        ("user", "Thank you, bye!", "non", 1),
    ], situation="I was laid off and I am worried about money.")
    d2 = Dialogue.build("exam-stress", [
        ("user", "hi", "init", 5),
        ("user", "My exams are next week and I cannot sleep.", "init", 5),
        ("system", "Exams can be stressful. What subject worries you most?", "init", None, "Question"),
        ("user", "Math. I keep failing math practice exams.", "non", 4),
        ("system", "Deep breaths can help people calm down.", "init", None, "Providing Suggestions"),
        ("system", "Maybe a study group for math practice would help too.", "init", None, "Providing Suggestions"),
        ("user", "A study group might work.", "non", 3),
        ("system", "It sounds like you are already planning your practice.", "non", None, "Reflection of feelings"),
        ("user", "I feel a bit better about the exams now.", "non", 2),
        ("system", "Good luck, take care!", "non", None, "Others"),
    ], situation="Final exams are causing insomnia.")
    d3 = Dialogue.build("lonely", [
        ("user", "I moved to a new city and I feel lonely.", "init", 3),
        ("system", "Moving to a new city can feel lonely at first.", "non", None, "Restatement or Paraphrasing"),
        ("user", "I do not know anyone in the city.", "non"),
        ("system", "Have you looked for clubs or volunteer groups?", "init", None, "Question"),
        ("user", "Volunteer groups could be nice.", "non", 2),
    ], situation="Relocated for work and feels isolated.")
    return Corpus((d1, d2, d3), name="fixture3")


def toy_graph() -> KnowledgeGraph:
    E, S, A, R = NodeType.EXPECTATION, NodeType.STRESSOR, NodeType.AFFECTIVE_STATE, NodeType.RESPONSE
    nodes = [
        KgNode("e1", E, "I lost my job and need help"),
        KgNode("e2", E, "how do I stop worrying about exams"),
        KgNode("e3", E, "I want to make friends in a new city"),
        KgNode("s1", S, "job loss"),
        KgNode("s2", S, "money problems after losing work"),
        KgNode("s3", S, "exam pressure"),
        KgNode("s4", S, "moving away from family"),
        KgNode("a1", A, "sad"),
        KgNode("a2", A, "anxious"),
        KgNode("a3", A, "lonely"),
        KgNode("r1", R, "I am sorry you lost your job"),
        KgNode("r2", R, "you will find a new job soon"),
        KgNode("r3", R, "take deep breaths before the exam"),
        KgNode("r4", R, "joining a club can help you meet people"),
        KgNode("r5", R, "talk to someone you trust"),
    ]
    edges = [
        ("s1", "e1"), ("s2", "e1"), ("e1", "a1"), ("e1", "a2"), ("e1", "r1"), ("e1", "r2"), ("e1", "r5"),
        ("s3", "e2"), ("e2", "a2"), ("e2", "r3"), ("e2", "r5"),
        ("s4", "e3"), ("e3", "a3"), ("e3", "a1"), ("e3", "r4"), ("e3", "r5"),
        ("s1", "s2"), ("e1", "e2"), ("r1", "r2"),
    ]
    return KnowledgeGraph(nodes, edges)


QUERY = {
    "utterance": "I lost my job last week",
    "xReact": "sad",
    "xIntent": "to keep working",
    "xWant": "to find a new job",
    "xNeed": "to apply for jobs",
    "xEffect": "feels anxious",
}


def main() -> None:
    dump_corpus(corpus3(), HERE / "corpus3.json")
    write_graph(toy_graph(), HERE / "toy_nodes.jsonl", HERE / "toy_edges.tsv")
    (HERE / "toy_query.json").write_text(json.dumps(QUERY, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
