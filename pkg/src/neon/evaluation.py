"""LLM-as-judge scoring: one prompt per attribute, 0-2 Likert ratings.

Judge templates are transcribed word for word; only line breaks between the
``##`` sections were chosen here. Ratings outside {0, 1, 2} are kept (``raw``)
but flagged and left out of every mean unless clamping is requested.
"""

from __future__ import annotations

import json
import re
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MissingPassages, ParseFailure
from .providers import LlmClient

HELPFULNESS = "Helpfulness"
RELEVANCE = "Relevance"
FAITHFULNESS = "Faithfulness"
ATTRIBUTES = (HELPFULNESS, RELEVANCE, FAITHFULNESS)
VALID = (0, 1, 2)

_CENT = Decimal("0.01")
_ALIASES = {"h": HELPFULNESS, "r": RELEVANCE, "f": FAITHFULNESS}


def resolve_attributes(spec: str) -> tuple[str, ...]:
    """``all``, a single letter (h/r/f) or a full attribute name."""
    spec = spec.strip()
    if spec.lower() == "all":
        return ATTRIBUTES
    if spec.lower() in _ALIASES:
        return (_ALIASES[spec.lower()],)
    for attr in ATTRIBUTES:
        if spec.lower() == attr.lower():
            return (attr,)
    raise ValueError(f"unknown attribute {spec!r}")


_TASK = (
    "## Task Description\n"
    "You are presented with a user query and an AI assistant's response. The query is focused on a "
    "specific entity, pertains to the news domain, and is date-stamped. Your task is to evaluate the "
    "AI assistant's response for its {quality}, using a 3-point Likert scale. The criteria for rating "
    "are detailed below.\n"
)
_OUTPUT = (
    "## Output format\n"
    'The output should be the following JSON format: {"rating": <numerical_rating>, '
    '"reason": <short_reasoning>}, mentioning the numerical rating, as well as a short and concise '
    "reasoning for the helpfulness rating.\n"
)
_CRITERIA = {
    HELPFULNESS: (
        "## Helpfulness Criterion\n"
        "Rating 2: The response is very helpful and provides the information expected for the user query. "
        "It includes mentions of additional named entities (such as people, locations, events, etc.) beyond "
        "the primary entity in the query and aligns completely with user's intent.\n"
        "Rating 1: The response is somewhat helpful but fails to fully provide the information expected for "
        "the user's query. It can nevertheless serve to continue the conversation with the user or provides "
        "pointers to where the information can be found.\n"
        "Rating 0: The response is not helpful and provides no information for the query.\n"
    ),
    RELEVANCE: (
        "## Relevance Criterion\n"
        "Rating 2: The response is completely relevant with accurate details and provides the information "
        "for the query date.\n"
        "Rating 1: The response contains a mix of relevant and irrelevant details. The response contains "
        "some relevant information upto the specified date, and is more or less aligned with the user's "
        "intent.\n"
        "Rating 0: The response is incorrect and provides no information for the query date.\n"
    ),
    FAITHFULNESS: (
        "## Faithfulness Criterion\n"
        "Rating 2: The response is perfectly reliable and grounded based on the supporting passages given "
        "below. All the information from the supporting passages is used in the response to answer the "
        "user query.\n"
        "Rating 1: The response partially uses the supporting passages given below but has additional "
        "information which may be incorrect or unreliable.\n"
        "Rating 0: The response is completely unreliable and does not depend on the supporting passages.\n"
    ),
}
_QUALITY = {HELPFULNESS: "usefulness", RELEVANCE: "relevance", FAITHFULNESS: "reliability"}
_INPUT = {
    HELPFULNESS: "## Input to be rated\nUser query: {question}\nAI assistant’s response: {response}",
    RELEVANCE: "## Input to be rated\nUser query: {question}\nAI assistant’s response: {response}",
    FAITHFULNESS: (
        "## Input to be rated\nUser query: {question}\nSupporting passages: {passages}\n"
        "AI assistant’s response: {response}"
    ),
}
_SLOT = re.compile(r"\{(examples|question|response|passages)\}")


def judge_template(attribute: str) -> str:
    """The raw template with ``{examples}``, ``{question}``, ``{response}`` (and ``{passages}``) slots."""
    return (
        _TASK.replace("{quality}", _QUALITY[attribute])
        + _CRITERIA[attribute]
        + _OUTPUT
        + "## Examples\n{examples}\n"
        + _INPUT[attribute]
        + "\n"
    )


def format_passages(passages: Sequence[str]) -> str:
    return " ".join(f"[{i}] {p}" for i, p in enumerate(passages, 1))


@dataclass(frozen=True)
class JudgeExample:
    question: str
    response: str
    rating: int
    reason: str
    passages: tuple[str, ...] = ()


def load_examples(attribute: str, directory: str | Path | None = None) -> list[JudgeExample]:
    """In-context examples for few-shot judging, one JSON file per attribute."""
    name = f"{attribute.lower()}.json"
    if directory is None:
        text = resources.files("neon").joinpath(f"data/judge_examples/{name}").read_text("utf-8")
    else:
        text = (Path(directory) / name).read_text("utf-8")
    return [
        JudgeExample(e["question"], e["response"], int(e["rating"]), e["reason"], tuple(e.get("passages", ())))
        for e in json.loads(text)
    ]


def render_examples(examples: Sequence[JudgeExample], attribute: str) -> str:
    blocks = []
    for i, ex in enumerate(examples, 1):
        lines = [f"Example {i}", f"User query: {ex.question}"]
        if attribute == FAITHFULNESS:
            lines.append(f"Supporting passages: {format_passages(ex.passages)}")
        lines.append(f"AI assistant’s response: {ex.response}")
        lines.append("Output: " + json.dumps({"rating": ex.rating, "reason": ex.reason}, ensure_ascii=False))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def build_judge_prompt(
    attribute: str,
    mode: str,
    question: str,
    response: str,
    passages: Sequence[str] | None = None,
    examples: Sequence[JudgeExample] | None = None,
) -> str:
    """Render the judge prompt for one attribute.

    ``mode`` is ``"zero"`` (empty examples slot) or ``"few"`` (examples
    spliced in; defaults to the packaged ones). Faithfulness needs passages.
    """
    if attribute not in ATTRIBUTES:
        raise ValueError(f"unknown attribute {attribute!r}")
    if mode not in ("zero", "few"):
        raise ValueError(f"mode must be 'zero' or 'few', got {mode!r}")
    if attribute == FAITHFULNESS and passages is None:
        raise MissingPassages("faithfulness judging needs the supporting passages")
    block = ""
    if mode == "few":
        block = render_examples(examples if examples is not None else load_examples(attribute), attribute)
    values = {
        "examples": block,
        "question": question,
        "response": response,
        "passages": format_passages(passages or ()),
    }
    return _SLOT.sub(lambda m: values[m.group(1)], judge_template(attribute))


@dataclass(frozen=True)
class Rating:
    attribute: str
    rating: int
    reason: str
    flagged: bool
    raw: int


_RATING_RE = re.compile(r'"rating"\s*:\s*"?(-?\d+)"?')
_REASON_RE = re.compile(r'"reason"\s*:\s*"((?:[^"\\]|\\.)*)"', re.S)


def _first_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def _as_int(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and re.fullmatch(r"\s*-?\d+\s*", value):
        return int(value)
    return None


def parse_rating(judge_output: str, attribute: str) -> Rating:
    """Pull ``rating`` and ``reason`` from the first JSON object in the output.

    Falls back to key-level regexes when the object is not valid JSON (judges
    sometimes emit ``"...". "rating": 5}``). Out-of-range ratings are flagged,
    with ``rating`` clamped into 0..2 and ``raw`` preserved.

    Raises:
        ParseFailure: no object, or ``rating``/``reason`` missing or mistyped.
    """
    obj = _first_object(judge_output)
    if obj is not None and "rating" in obj and "reason" in obj:
        raw = _as_int(obj["rating"])
        reason = obj["reason"]
        if raw is None or not isinstance(reason, str):
            raise ParseFailure(f"bad rating/reason types in {obj!r}")
    else:
        rm, sm = _RATING_RE.search(judge_output), _REASON_RE.search(judge_output)
        if "{" not in judge_output or rm is None or sm is None:
            raise ParseFailure("no rating object found")
        raw = int(rm.group(1))
        reason = json.loads(f'"{sm.group(1)}"')
    flagged = raw not in VALID
    return Rating(attribute, min(max(raw, 0), 2), reason, flagged, raw)


@dataclass
class JudgeRecord:
    item_id: str
    method: str
    strategy: str
    attribute: str
    response_chars: int
    rating: Rating | None = None
    error: str | None = None

    def to_json(self) -> dict:
        rec = {
            "item_id": self.item_id,
            "method": self.method,
            "strategy": self.strategy,
            "attribute": self.attribute,
            "response_chars": self.response_chars,
            "parse_failed": self.rating is None,
            "error": self.error,
        }
        if self.rating is not None:
            rec.update(rating=self.rating.rating, raw=self.rating.raw,
                       flagged=self.rating.flagged, reason=self.rating.reason)
        return rec

    @classmethod
    def from_json(cls, obj: dict) -> "JudgeRecord":
        rating = None
        if not obj.get("parse_failed"):
            rating = Rating(obj["attribute"], obj["rating"], obj["reason"], obj["flagged"], obj["raw"])
        return cls(obj["item_id"], obj["method"], obj["strategy"], obj["attribute"],
                   obj["response_chars"], rating, obj.get("error"))


def judge_items(
    items: Sequence[dict],
    llm: LlmClient,
    mode: str = "zero",
    attributes: Sequence[str] = ATTRIBUTES,
    examples_dir: str | Path | None = None,
    parallelism: int = 1,
) -> list[JudgeRecord]:
    """Judge QA responses, one call per (item, attribute).

    Each item is a response record: ``answer``, ``query`` (or ``reformulated``),
    ``support`` (list of ``{date, text}``), plus ``method``/``strategy`` labels.
    """
    examples = {a: load_examples(a, examples_dir) for a in attributes} if mode == "few" else {}
    units = []
    for n, item in enumerate(items):
        question = item.get("reformulated") or item["query"]
        passages = [f"({s['date']}) {s['text']}" for s in item.get("support", [])]
        for attr in attributes:
            prompt = build_judge_prompt(attr, mode, question, item["answer"],
                                        passages if attr == FAITHFULNESS else None, examples.get(attr))
            units.append((n, item, attr, prompt))

    def call(unit):
        try:
            return llm.complete(unit[3], temperature=0.0)
        except Exception as exc:
            return exc

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outputs = list(pool.map(call, units))
    else:
        outputs = [call(u) for u in units]

    records = []
    for (n, item, attr, _), out in zip(units, outputs):
        rec = JudgeRecord(str(item.get("id", n)), item.get("method", ""), item.get("strategy", ""),
                          attr, len(item["answer"]))
        if isinstance(out, Exception):
            rec.error = f"{type(out).__name__}: {out}"
        else:
            try:
                rec.rating = parse_rating(out, attr)
            except ParseFailure as exc:
                rec.error = str(exc)
        records.append(rec)
    return records


@dataclass
class Cell:
    mean: float | None
    n: int


@dataclass
class ReportRow:
    method: str
    strategy: str
    cells: dict[str, Cell]
    total: int = 0
    flagged: int = 0
    parse_failed: int = 0

    @property
    def average(self) -> float | None:
        means = [self.cells[a].mean for a in ATTRIBUTES if a in self.cells]
        if len(means) != len(ATTRIBUTES) or any(m is None for m in means):
            return None
        return statistics.fmean(means)


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)

    def row(self, method: str, strategy: str) -> ReportRow:
        for r in self.rows:
            if (r.method, r.strategy) == (method, strategy):
                return r
        raise KeyError((method, strategy))

    def to_json(self) -> dict:
        out = []
        for r in self.rows:
            out.append({
                "method": r.method,
                "strategy": r.strategy,
                "means": {a: _round(r.cells[a].mean) for a in ATTRIBUTES if a in r.cells},
                "n": {a: r.cells[a].n for a in ATTRIBUTES if a in r.cells},
                "average": _round(r.average),
                "total": r.total,
                "flagged": r.flagged,
                "parse_failed": r.parse_failed,
            })
        return {"rows": out}

    def to_table(self) -> str:
        header = ["Strategy", "Method", "Helpful", "Relevant", "Faithful", "Avg."]
        body = []
        for r in self.rows:
            cells = [_fmt(r.cells[a].mean if a in r.cells else None) for a in ATTRIBUTES]
            body.append([r.strategy, r.method, *cells, _fmt(r.average)])
        return _align([header, *body])


def _round(x: float | None) -> float | None:
    """Two decimals, halves away from zero (spreadsheet ROUND, not banker's rounding)."""
    if x is None:
        return None
    return float(Decimal(repr(x)).quantize(_CENT, rounding=ROUND_HALF_UP))


def _fmt(x: float | None) -> str:
    return "-" if x is None else f"{_round(x):.2f}"


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def aggregate(records: Iterable[JudgeRecord], clamp: bool = False) -> EvalReport:
    """Per (method, strategy, attribute) means over valid ratings.

    Flagged ratings count only when ``clamp`` is set (using the clamped
    value); parse failures never count. Rows are sorted by (strategy, method).
    """
    groups: dict[tuple[str, str], dict[str, list[int]]] = {}
    counts: dict[tuple[str, str], list[int]] = {}
    for rec in records:
        key = (rec.method, rec.strategy)
        bucket = groups.setdefault(key, {})
        c = counts.setdefault(key, [0, 0, 0])
        c[0] += 1
        if rec.rating is None:
            c[2] += 1
            bucket.setdefault(rec.attribute, [])
            continue
        if rec.rating.flagged:
            c[1] += 1
            if not clamp:
                bucket.setdefault(rec.attribute, [])
                continue
        bucket.setdefault(rec.attribute, []).append(rec.rating.rating)
    report = EvalReport()
    for key in sorted(groups, key=lambda k: (k[1], k[0])):
        cells = {
            attr: Cell(statistics.fmean(vals) if vals else None, len(vals))
            for attr, vals in groups[key].items()
        }
        total, flagged, failed = counts[key]
        report.rows.append(ReportRow(key[0], key[1], cells, total, flagged, failed))
    return report


@dataclass(frozen=True)
class LengthCell:
    mean: float
    median: float
    n: int


def length_stats(records: Iterable[JudgeRecord]) -> dict[tuple[str, str, int], LengthCell]:
    """Mean and median response length (chars) per (method, attribute, rating).

    Flagged and unparsed ratings are skipped.
    """
    groups: dict[tuple[str, str, int], list[int]] = {}
    for rec in records:
        if rec.rating is None or rec.rating.flagged:
            continue
        groups.setdefault((rec.method, rec.attribute, rec.rating.rating), []).append(rec.response_chars)
    return {
        key: LengthCell(statistics.fmean(v), float(statistics.median(v)), len(v))
        for key, v in sorted(groups.items())
    }


def length_table(stats: dict[tuple[str, str, int], LengthCell]) -> str:
    methods = sorted({m for m, _, _ in stats})
    header = ["Method", "Score"] + [f"{a} {s}" for a in ATTRIBUTES for s in ("Mean", "Median")]
    rows = [header]
    for method in methods:
        for score in VALID:
            row = [method, str(score)]
            for attr in ATTRIBUTES:
                cell = stats.get((method, attr, score))
                row += ["-", "-"] if cell is None else [f"{cell.mean:.1f}", f"{cell.median:.1f}"]
            rows.append(row)
    return _align(rows)
