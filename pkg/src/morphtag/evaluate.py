"""The evaluation battery: per-category metrics and joint accuracies.

All functions are pure and operate on aligned prediction/gold structures:
a corpus is a list of sentences, a sentence a list of words, a word a
``category -> label`` dict. Absent entries mean the reserved NONE label.

The joint "core" accuracy is computed over the thirteen-category set of
grammatical categories used for cross-system comparison; the "full"
variants cover every category in the schema inventory (the numbers are
strongly sensitive to that choice of set, which is why both exist).
"""

from __future__ import annotations

from dataclasses import dataclass

from .bpe import BpeModel
from .conllu import CategorySchema, Sentence, NONE_LABEL
from .model import TaggerModel, forward
from .train import make_batches

JOINT_CORE_CATEGORIES = (
    "upos",
    "Mood",
    "VerbForm",
    "Person",
    "Animacy",
    "Degree",
    "Variant",
    "Number",
    "Gender",
    "NumForm",
    "Case",
    "Tense",
    "Voice",
)


@dataclass
class CategoryMetrics:
    accuracy: float
    sentence_accuracy: float
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    categories: dict[str, CategoryMetrics]
    mean_accuracy: float
    mean_feature_accuracy: float  # same mean with the upos row excluded
    joint_word_accuracy_13: float
    joint_word_accuracy_full: float
    joint_sentence_accuracy_full: float


def _get(word: dict[str, str], category: str) -> str:
    return word.get(category, NONE_LABEL)


def _check_aligned(pred, gold) -> None:
    if len(pred) != len(gold) or any(len(p) != len(g) for p, g in zip(pred, gold)):
        raise ValueError("prediction and gold corpora are not aligned")


def category_accuracy(pred, gold, category: str) -> float:
    """Correct words / all words; NONE counts like any other label."""
    _check_aligned(pred, gold)
    correct = total = 0
    for psent, gsent in zip(pred, gold):
        for pword, gword in zip(psent, gsent):
            correct += _get(pword, category) == _get(gword, category)
            total += 1
    return correct / total if total else 0.0


def sentence_accuracy(pred, gold, category: str) -> float:
    """Fraction of sentences with the category correct on every word."""
    _check_aligned(pred, gold)
    good = 0
    for psent, gsent in zip(pred, gold):
        good += all(_get(p, category) == _get(g, category) for p, g in zip(psent, gsent))
    return good / len(gold) if gold else 0.0


def macro_prf(pred, gold, category: str, include_none: bool = True) -> tuple[float, float, float]:
    """Macro-averaged precision/recall/F1 over labels occurring in gold.

    Per label: precision = TP/(TP+FP), recall = TP/(TP+FN), both 0 on an
    empty denominator; F1 is the harmonic mean (0 when p + r = 0). With
    ``include_none`` false the NONE label still participates in the
    confusion counts but is dropped from the macro average.
    """
    _check_aligned(pred, gold)
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    gold_labels: set[str] = set()
    for psent, gsent in zip(pred, gold):
        for pword, gword in zip(psent, gsent):
            p, g = _get(pword, category), _get(gword, category)
            gold_labels.add(g)
            if p == g:
                tp[g] = tp.get(g, 0) + 1
            else:
                fp[p] = fp.get(p, 0) + 1
                fn[g] = fn.get(g, 0) + 1
    labels = sorted(gold_labels if include_none else gold_labels - {NONE_LABEL})
    if not labels:
        return (0.0, 0.0, 0.0)
    precisions, recalls, f1s = [], [], []
    for label in labels:
        t, p_, n_ = tp.get(label, 0), fp.get(label, 0), fn.get(label, 0)
        prec = t / (t + p_) if t + p_ else 0.0
        rec = t / (t + n_) if t + n_ else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    k = len(labels)
    return (sum(precisions) / k, sum(recalls) / k, sum(f1s) / k)


def joint_accuracies(pred, gold, schemas: list[CategorySchema]) -> tuple[float, float, float]:
    """(core-13 word joint, full word joint, full sentence joint) accuracies.

    A word counts for a joint metric only when every category in the set is
    predicted correctly; a sentence only when all its words are.
    """
    _check_aligned(pred, gold)
    all_cats = [s.name for s in schemas]
    core = [c for c in JOINT_CORE_CATEGORIES if c in set(all_cats)]
    words_total = 0
    word13 = 0
    word_full = 0
    sent_full = 0
    for psent, gsent in zip(pred, gold):
        sentence_ok = True
        for pword, gword in zip(psent, gsent):
            words_total += 1
            full_ok = all(_get(pword, c) == _get(gword, c) for c in all_cats)
            word_full += full_ok
            word13 += all(_get(pword, c) == _get(gword, c) for c in core)
            sentence_ok &= full_ok
        sent_full += sentence_ok
    n_sent = len(gold)
    return (
        word13 / words_total if words_total else 0.0,
        word_full / words_total if words_total else 0.0,
        sent_full / n_sent if n_sent else 0.0,
    )


def mean_accuracy(report: MetricsReport) -> float:
    """Unweighted mean of per-category accuracy over all reported categories."""
    values = [m.accuracy for m in report.categories.values()]
    return sum(values) / len(values) if values else 0.0


def compute_report(pred, gold, schemas: list[CategorySchema], include_none: bool = True) -> MetricsReport:
    _check_aligned(pred, gold)
    categories: dict[str, CategoryMetrics] = {}
    for schema in sorted(schemas, key=lambda s: s.name):
        name = schema.name
        p, r, f1 = macro_prf(pred, gold, name, include_none=include_none)
        categories[name] = CategoryMetrics(
            accuracy=category_accuracy(pred, gold, name),
            sentence_accuracy=sentence_accuracy(pred, gold, name),
            precision=p,
            recall=r,
            f1=f1,
        )
    accs = [m.accuracy for m in categories.values()]
    feature_accs = [m.accuracy for name, m in categories.items() if name != "upos"]
    word13, word_full, sent_full = joint_accuracies(pred, gold, schemas)
    return MetricsReport(
        categories=categories,
        mean_accuracy=sum(accs) / len(accs) if accs else 0.0,
        mean_feature_accuracy=sum(feature_accs) / len(feature_accs) if feature_accs else 0.0,
        joint_word_accuracy_13=word13,
        joint_word_accuracy_full=word_full,
        joint_sentence_accuracy_full=sent_full,
    )


def format_report_table(report: MetricsReport) -> str:
    """Aligned plain-text table, one row per category, plus the joint block."""
    headers = ("Feature", "Accuracy", "Sentence accuracy", "Precision", "Recall", "F1")
    rows = [
        (
            name,
            f"{m.accuracy:.5f}",
            f"{m.sentence_accuracy:.5f}",
            f"{m.precision:.5f}",
            f"{m.recall:.5f}",
            f"{m.f1:.5f}",
        )
        for name, m in report.categories.items()
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(widths[i]) for i, h in enumerate(headers))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)))
    lines.append("")
    lines.append(f"mean accuracy (all categories):     {report.mean_accuracy:.5f}")
    lines.append(f"mean accuracy (features, no upos):  {report.mean_feature_accuracy:.5f}")
    lines.append(f"joint word accuracy (core 13):      {report.joint_word_accuracy_13:.5f}")
    lines.append(f"joint word accuracy (all):          {report.joint_word_accuracy_full:.5f}")
    lines.append(f"joint sentence accuracy (all):      {report.joint_sentence_accuracy_full:.5f}")
    return "\n".join(lines) + "\n"


def format_report_kv(report: MetricsReport) -> str:
    """Machine-readable key=value block."""
    lines = []
    for name, m in report.categories.items():
        lines.append(f"accuracy.{name}={m.accuracy:.10g}")
        lines.append(f"sentence_accuracy.{name}={m.sentence_accuracy:.10g}")
        lines.append(f"precision.{name}={m.precision:.10g}")
        lines.append(f"recall.{name}={m.recall:.10g}")
        lines.append(f"f1.{name}={m.f1:.10g}")
    lines.append(f"mean_accuracy={report.mean_accuracy:.10g}")
    lines.append(f"mean_feature_accuracy={report.mean_feature_accuracy:.10g}")
    lines.append(f"joint_word_accuracy_13={report.joint_word_accuracy_13:.10g}")
    lines.append(f"joint_word_accuracy_full={report.joint_word_accuracy_full:.10g}")
    lines.append(f"joint_sentence_accuracy_full={report.joint_sentence_accuracy_full:.10g}")
    return "\n".join(lines) + "\n"


def predict_labels(
    model: TaggerModel,
    sentences: list[Sentence],
    bpe: BpeModel,
    batch_size: int = 64,
) -> list[list[dict[str, str]]]:
    """Predicted label per schema category for every word.

    Argmax ties break to the lowest label index. Sentences longer than the
    model's word cap are predicted in consecutive chunks so that every word
    receives a prediction.
    """
    max_words = model.config.max_words
    pieces: list[Sentence] = []
    owners: list[int] = []
    for i, sentence in enumerate(sentences):
        words = sentence.words
        for start in range(0, len(words), max_words):
            pieces.append(Sentence(words[start : start + max_words], sentence.id))
            owners.append(i)

    predictions: list[list[dict[str, str]]] = [[] for _ in sentences]
    done = 0
    for batch in make_batches(
        pieces,
        bpe,
        model.config.schemas,
        batch_size,
        shuffle_seed=None,
        max_words=max_words,
        max_subtokens=model.config.max_subtokens,
        strict_labels=False,
    ):
        logits = forward(model, batch)
        argmaxes = {name: head.data.argmax(axis=-1) for name, head in logits.items()}
        b = batch.word_mask.shape[0]
        for bi in range(b):
            owner = owners[done + bi]
            n_words = int(batch.word_mask[bi].sum())
            for wi in range(n_words):
                labels = {}
                for schema in model.config.schemas:
                    labels[schema.name] = schema.labels[int(argmaxes[schema.name][bi, wi])]
                predictions[owner].append(labels)
        done += b
    return predictions


def gold_labels(sentences: list[Sentence], schemas: list[CategorySchema]) -> list[list[dict[str, str]]]:
    """Gold structure aligned with predict_labels output (NONE normalized)."""
    names = [s.name for s in schemas]
    return [
        [{name: word.label_or_none(name) for name in names} for word in sentence.words]
        for sentence in sentences
    ]


def evaluate_model(
    model: TaggerModel,
    sentences: list[Sentence],
    bpe: BpeModel,
    batch_size: int = 64,
    include_none: bool = True,
) -> MetricsReport:
    """Predict and score a labeled corpus against the model's schemas."""
    data_categories = {cat for s in sentences for w in s.words for cat in w.labels}
    data_categories -= {"head", "deprel"}
    known = {s.name for s in model.config.schemas}
    missing = sorted(data_categories - known)
    if missing:
        raise ValueError(
            f"data contains categories absent from the model checkpoint: {', '.join(missing)}"
        )
    pred = predict_labels(model, sentences, bpe, batch_size)
    gold = gold_labels(sentences, model.config.schemas)
    return compute_report(pred, gold, model.config.schemas, include_none=include_none)
