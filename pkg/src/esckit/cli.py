"""Command-line entry point.

Subcommands::

    esckit analyze  --corpus C.json --out DIR [--format json|csv]
    esckit index    --nodes N.jsonl --edges E.tsv [--out DIR]
    esckit retrieve --query Q.json --nodes N.jsonl --edges E.tsv [--k 10] [--n 1] [--oracle]
    esckit format   --corpus C.json --dialogue ID --out DIR [--retrieval R.json] [--query Q.json]

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
Errors go to stderr as a JSON object ``{"errors": [...]}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import Sequence

from esckit import flow, kg, metrics, retrieval, seqformat
from esckit.dialogue import CORPUS_FORMATS, CorpusFormatError, load_corpus
from esckit.text.pipeline import TextPipeline

logger = logging.getLogger("esckit")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


class InputError(Exception):
    pass


class InvariantViolation(Exception):
    pass


def _require(*paths: Path | None) -> None:
    missing = [str(p) for p in paths if p is not None and not p.is_file()]
    if missing:
        raise InputError("missing input file(s): " + ", ".join(missing))


def _write_outputs(outputs: dict[Path, str], force: bool) -> None:
    clobber = [str(p) for p in outputs if p.exists()]
    if clobber and not force:
        raise InputError("refusing to overwrite existing output(s) without --force: " + ", ".join(clobber))
    for path, content in outputs.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")


def _pipeline(args) -> TextPipeline:
    if getattr(args, "stopwords", None):
        _require(args.stopwords)
        return TextPipeline.from_file(args.stopwords)
    return TextPipeline()


# -- analyze -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    _require(args.corpus, args.greetings, args.farewells)
    pipeline = _pipeline(args)
    lexicon = flow.Lexicon.load(args.greetings, args.farewells)
    corpus = load_corpus(args.corpus, args.corpus_format)

    report = metrics.corpus_report(corpus, pipeline, name=corpus.name)
    tm = flow.transition_matrix(corpus, lexicon)
    profile = flow.progress_profile(corpus, lexicon)

    out = Path(args.out)
    outputs: dict[Path, str] = {}
    if args.format == "json":
        outputs[out / "metrics.json"] = report.to_json()
        outputs[out / "flow.json"] = tm.to_json()
        outputs[out / "progress.json"] = profile.to_json()
    else:
        outputs[out / "metrics.csv"] = report.to_csv()
    outputs[out / "transitions.csv"] = tm.to_csv()
    outputs[out / "progress.csv"] = profile.to_csv()
    outputs[out / "flow.dot"] = tm.to_dot()
    _write_outputs(outputs, args.force)

    warnings = list(report.errors)
    if tm.excluded:
        warnings.append(f"flow: {tm.excluded} unannotated body utterance(s) excluded")
    if warnings:
        print(f"{len(warnings)} warning(s):", file=sys.stderr)
        for w in warnings:
            print(f"  {w}", file=sys.stderr)
    return EXIT_OK


# -- index -------------------------------------------------------------------


def cmd_index(args) -> int:
    _require(args.nodes, args.edges)
    g = kg.load_graph(args.nodes, args.edges)
    stats = kg.graph_stats(g)
    if args.out is None:
        sys.stdout.write(stats.to_csv())
        return EXIT_OK
    out = Path(args.out)
    _write_outputs({out / "stats.csv": stats.to_csv(), out / "stats.json": stats.to_json()}, args.force)
    return EXIT_OK


# -- retrieve ----------------------------------------------------------------


def _provider(args, g: kg.KnowledgeGraph) -> retrieval.SimilarityProvider:
    name = args.provider or ("embedding" if args.query_embeddings else "lexical")
    if name == "embedding":
        if not args.query_embeddings:
            raise InputError("--provider embedding needs --query-embeddings")
        _require(args.query_embeddings)
        if g.embedding_dim is None:
            raise InputError("the graph has no node embeddings")
        return retrieval.EmbeddingSimilarity(g, retrieval.load_query_embeddings(args.query_embeddings))
    return retrieval.LexicalSimilarity(_pipeline(args))


def _check_results(result, g, q, f) -> None:
    for s in result:
        if not g.is_case(s.subgraph):
            raise InvariantViolation(f"result {s.subgraph} violates the hub pattern")
        if abs(s.score - sum(c for c in s.components if c is not None)) > 1e-9:
            raise InvariantViolation(f"result {s.subgraph} score differs from its component sum")
    keys = [s.sort_key() for s in result]
    if keys != sorted(keys):
        raise InvariantViolation("results are not in ranking order")


def cmd_retrieve(args) -> int:
    _require(args.query, args.nodes, args.edges)
    q = retrieval.load_query(args.query)
    g = kg.load_graph(args.nodes, args.edges)
    f = _provider(args, g)
    if args.oracle:
        result = retrieval.brute_force_retrieve(q, g, f, n=args.n, cap=args.cap)
    else:
        cfg = retrieval.RetrievalConfig(k_per_type=args.k, n_subgraphs=args.n)
        result = retrieval.retrieve(q, g, f, cfg)
    _check_results(result, g, q, f)
    text = json.dumps(result.to_list(g), indent=2, ensure_ascii=False) + "\n"
    if result.diagnostic:
        print(f"note: {result.diagnostic}", file=sys.stderr)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_outputs({Path(args.out): text}, args.force)
    return EXIT_OK


# -- format ------------------------------------------------------------------


def _flat(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def _knowledge(args) -> list[seqformat.Knowledge]:
    expansions = {}
    if args.query:
        _require(args.query)
        q = retrieval.load_query(args.query)
        expansions = {r.value: _flat(v) for r, v in q.expansions.items() if v}
    sections = []
    if args.retrieval:
        _require(args.retrieval)
        results = json.loads(Path(args.retrieval).read_text(encoding="utf-8"))
        if not isinstance(results, list):
            raise InputError(f"{args.retrieval}: expected a JSON array of scored subgraphs")
        for item in results:
            try:
                texts = {key: _flat(item["nodes"][key]["text"]) for key in seqformat.NODE_KEYS}
            except (KeyError, TypeError):
                raise InputError(f"{args.retrieval}: result without node texts (rank {item.get('rank')})") from None
            sections.append(seqformat.knowledge_from_retrieval(expansions, texts))
    elif expansions:
        sections.append(seqformat.knowledge_from_retrieval(expansions, {}))
    return sections


def cmd_format(args) -> int:
    _require(args.corpus)
    corpus = load_corpus(args.corpus, args.corpus_format)
    try:
        d = corpus.get(args.dialogue)
    except KeyError:
        raise InputError(f"dialogue {args.dialogue!r} not found in {args.corpus}") from None
    know = _knowledge(args)
    flat = [seqformat.Utterance(u.index, _flat(u.text), u.role) for u in d.utterances]
    if args.turn is not None:
        if not 1 <= args.turn < len(flat):
            raise InputError(f"--turn must be in [1, {len(flat) - 1}]")
        turns = [args.turn]
    else:
        turns = [u.index for u in d.utterances if u.is_system and u.index >= 1]
    xs, ys = [], []
    for t in turns:
        x = seqformat.encode_input(_flat(d.situation), flat[:t], know, args.budget)
        target = d.utterances[t]
        y = seqformat.encode_output(_flat(target.strategy or ""), flat[t].text)
        xs.append(x.text)
        ys.append(y.text)
    out = Path(args.out)
    _write_outputs(
        {out / "x.txt": "".join(s + "\n" for s in xs), out / "y.txt": "".join(s + "\n" for s in ys)},
        args.force,
    )
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esckit", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common_text(p):
        p.add_argument("--stopwords", type=Path, help="stopword list, one token per line")

    p = sub.add_parser("analyze", help="metrics, dialogue flow and progress reports")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--corpus-format", choices=CORPUS_FORMATS, default="native")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    common_text(p)
    p.add_argument("--greetings", type=Path)
    p.add_argument("--farewells", type=Path)
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("index", help="validate a knowledge graph and write its statistics")
    p.add_argument("--nodes", type=Path, required=True)
    p.add_argument("--edges", type=Path, required=True)
    p.add_argument("--out", type=Path, help="output directory (default: CSV to stdout)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("retrieve", help="rank case subgraphs for a query")
    p.add_argument("--query", type=Path, required=True)
    p.add_argument("--nodes", type=Path, required=True)
    p.add_argument("--edges", type=Path, required=True)
    p.add_argument("--query-embeddings", type=Path)
    p.add_argument("--provider", choices=("lexical", "embedding"))
    p.add_argument("--k", type=int, default=retrieval.DEFAULT_K)
    p.add_argument("--n", type=int, default=retrieval.DEFAULT_N)
    p.add_argument("--oracle", action="store_true", help="score every subgraph exhaustively")
    p.add_argument("--cap", type=int, default=retrieval.DEFAULT_ORACLE_CAP)
    common_text(p)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("format", help="write linearized X/Y sequences for one dialogue")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--corpus-format", choices=CORPUS_FORMATS, default="native")
    p.add_argument("--dialogue", required=True)
    p.add_argument("--turn", type=int, help="index of the target utterance (default: every system turn)")
    p.add_argument("--retrieval", type=Path, help="retrieve output (JSON array)")
    p.add_argument("--query", type=Path, help="query file supplying commonsense expansions")
    p.add_argument("--budget", type=int, default=seqformat.DEFAULT_BUDGET)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_format)
    return ap


def _fail(code: int, *messages: str) -> int:
    print(json.dumps({"errors": list(messages)}), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvariantViolation, AssertionError) as exc:
        return _fail(EXIT_INTERNAL, f"internal invariant violation: {exc}")
    except retrieval.OracleCapExceeded as exc:
        return _fail(EXIT_INPUT, str(exc))
    except (InputError, CorpusFormatError, kg.GraphFormatError, seqformat.BudgetError, OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
