"""CoNLL-U ingestion, category schemas, and corpus statistics.

Everything here is a pure function over immutable inputs and is safe to
call concurrently. Input files are UD v2 CoNLL-U: ten tab-separated columns
per token line (ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC),
``#`` comment lines, blank-line sentence separators, UTF-8 with LF or CRLF.
"""

from __future__ import annotations

from dataclasses import dataclass, field

NONE_LABEL = "NONE"

# HEAD/DEPREL are kept on words as raw strings but are not part of the
# default tagging schema set: they are tree-structured, not word classes.
DEPENDENCY_CATEGORIES = ("head", "deprel")

_NUM_COLUMNS = 10


class ConlluError(ValueError):
    """Malformed CoNLL-U input; the message names the offending line."""


@dataclass
class Word:
    """A syntactic word: its FORM plus a category-name -> label map.

    An absent morphological feature simply has no entry here; downstream
    consumers normalize absence to the reserved label ``NONE``.
    """

    surface: str
    labels: dict[str, str] = field(default_factory=dict)

    def label_or_none(self, category: str) -> str:
        return self.labels.get(category, NONE_LABEL)


@dataclass
class Sentence:
    words: list[Word]
    id: str = ""


@dataclass(frozen=True)
class CategorySchema:
    """Deterministic label inventory for one category.

    Labels are unique, lexicographically sorted and always contain ``NONE``
    exactly once, so the label <-> index mapping is reproducible.
    """

    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"schema {self.name}: duplicate labels")
        if self.labels.count(NONE_LABEL) != 1:
            raise ValueError(f"schema {self.name}: {NONE_LABEL} must appear exactly once")

    @property
    def none_index(self) -> int:
        return self.labels.index(NONE_LABEL)

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


@dataclass
class CorpusStats:
    sentence_count: int
    word_count: int
    mean_sentence_length: float


def parse_conllu(text: str) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    Multiword-token ranges (ID ``4-5``) and empty nodes (ID ``5.1``) are
    skipped; only syntactic-word lines enter the corpus. The UPOS column
    becomes category ``upos``; FEATS is exploded into one label per
    category; ``_`` anywhere yields no entry. HEAD and DEPREL are retained
    verbatim under categories ``head`` and ``deprel``.
    """
    sentences: list[Sentence] = []
    words: list[Word] = []
    sent_id: str | None = None

    def flush():
        nonlocal words, sent_id
        if words:
            sentences.append(Sentence(words, sent_id if sent_id is not None else str(len(sentences) + 1)))
        words = []
        sent_id = None

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("sent_id") and "=" in body:
                sent_id = body.split("=", 1)[1].strip()
            continue
        cols = line.split("\t")
        if len(cols) != _NUM_COLUMNS:
            raise ConlluError(
                f"line {lineno}: expected {_NUM_COLUMNS} tab-separated columns, got {len(cols)}"
            )
        tok_id, form, _lemma, upos, _xpos, feats, head, deprel = cols[:8]
        if "-" in tok_id or "." in tok_id:
            continue  # surface range or empty node
        if not form:
            raise ConlluError(f"line {lineno}: empty FORM column")
        labels: dict[str, str] = {}
        if upos != "_":
            labels["upos"] = upos
        if feats != "_":
            for pair in feats.split("|"):
                if "=" not in pair:
                    raise ConlluError(f"line {lineno}: malformed FEATS entry {pair!r}")
                cat, value = pair.split("=", 1)
                labels[cat] = value
        if head != "_":
            labels["head"] = head
        if deprel != "_":
            labels["deprel"] = deprel
        words.append(Word(form, labels))
    flush()
    return sentences


def build_schemas(sentences: list[Sentence], include_dependency: bool = False) -> list[CategorySchema]:
    """Derive one schema per category observed anywhere in the corpus.

    Each schema's label set is the union of observed labels plus ``NONE``;
    labels and schemas are sorted so repeated runs over the same corpus
    (in any iteration order) produce identical inventories.
    """
    if not sentences:
        raise ValueError("build_schemas requires a non-empty corpus")
    observed: dict[str, set[str]] = {}
    for sentence in sentences:
        for word in sentence.words:
            for cat, label in word.labels.items():
                if not include_dependency and cat in DEPENDENCY_CATEGORIES:
                    continue
                observed.setdefault(cat, set()).add(label)
    schemas = []
    for name in sorted(observed):
        labels = tuple(sorted(observed[name] | {NONE_LABEL}))
        schemas.append(CategorySchema(name, labels))
    return schemas


def corpus_stats(sentences: list[Sentence]) -> CorpusStats:
    n_sent = len(sentences)
    n_words = sum(len(s.words) for s in sentences)
    mean = n_words / n_sent if n_sent else 0.0
    return CorpusStats(n_sent, n_words, mean)


def format_conllu(sentences: list[Sentence]) -> str:
    """Render sentences back to CoNLL-U.

    FORM, UPOS, FEATS, HEAD and DEPREL round-trip through ``parse_conllu``;
    LEMMA/XPOS/DEPS/MISC are written as ``_``. Feature labels are joined
    alphabetically as ``A=x|B=y``.
    """
    blocks = []
    for sentence in sentences:
        lines = [f"# sent_id = {sentence.id}"] if sentence.id else []
        for i, word in enumerate(sentence.words, start=1):
            upos = word.labels.get("upos", "_")
            feats = "|".join(
                f"{cat}={value}"
                for cat, value in sorted(word.labels.items())
                if cat not in ("upos", "head", "deprel") and value != NONE_LABEL
            )
            head = word.labels.get("head", "_")
            deprel = word.labels.get("deprel", "_")
            lines.append(
                "\t".join([str(i), word.surface, "_", upos, "_", feats or "_", head, deprel, "_", "_"])
            )
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n" if blocks else ""
