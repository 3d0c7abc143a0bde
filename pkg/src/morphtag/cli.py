"""Command-line surface: tokenizer training, model training, evaluation, tagging.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure during training. Every output file is written atomically
(temp file in the target directory, then rename), so an interrupted run
never leaves a truncated vocabulary, checkpoint, or report behind.

Run configs are ``key = value`` files; ``#`` starts a full-line comment and
unknown keys are rejected. Any key can be overridden with ``--set key=value``.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import tempfile

from .bpe import BpeFormatError, load_bpe, save_bpe, train_bpe
from .conllu import (
    ConlluError,
    NONE_LABEL,
    Sentence,
    Word,
    build_schemas,
    format_conllu,
    parse_conllu,
)
from .evaluate import evaluate_model, format_report_kv, format_report_table, predict_labels
from .model import (
    CheckpointError,
    ModelConfig,
    TaggerModel,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)
from .train import NumericError, TrainConfig, train_loop

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


class DataError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".out-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None


def _parse_sentences(path: str) -> list[Sentence]:
    try:
        return parse_conllu(_read_text(path))
    except ConlluError as e:
        raise DataError(f"{path}: {e}") from None


# --- run configuration -------------------------------------------------------

_MODEL_KEYS = {
    "d_model": int,
    "n_heads_word": int,
    "n_heads_sent": int,
    "n_layers": int,
    "d_ff": int,
    "max_subtokens": int,
    "max_words": int,
    "score_hidden": int,
    "cls_hidden": int,
    "rope_base": float,
    "init_seed": int,
}
_TRAIN_KEYS = {
    "batch_size": int,
    "epochs": int,
    "weight_decay": float,
    "beta1": float,
    "beta2": float,
    "eps": float,
    "seed": int,
    "lr_stages": str,
}
_PATH_KEYS = {"train": str, "dev": str, "vocab": str, "checkpoint": str, "log": str}
_ALL_KEYS = {**_MODEL_KEYS, **_TRAIN_KEYS, **_PATH_KEYS}

_MODEL_DEFAULTS = {
    "d_model": 128,
    "n_heads_word": 4,
    "n_heads_sent": 4,
    "n_layers": 4,
    "d_ff": 512,
    "max_subtokens": 6,
    "max_words": 256,
    "score_hidden": 64,
    "cls_hidden": 128,
    "rope_base": 10000.0,
    "init_seed": 0,
}


def parse_config_file(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise UsageError(f"{source}: line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


def parse_lr_stages(text: str) -> tuple[tuple[int, float], ...]:
    """Stages written as 'epochs:lr' pairs separated by commas."""
    stages = []
    for piece in text.split(","):
        piece = piece.strip()
        if not re.fullmatch(r"[^:]+:[^:]+", piece):
            raise UsageError(f"malformed lr stage {piece!r}, expected epochs:lr")
        count, lr = piece.split(":")
        try:
            stages.append((int(count), float(lr)))
        except ValueError:
            raise UsageError(f"malformed lr stage {piece!r}, expected epochs:lr") from None
    return tuple(stages)


def _typed(values: dict[str, str]) -> dict:
    out = {}
    for key, raw in values.items():
        caster = _ALL_KEYS[key]
        try:
            out[key] = caster(raw)
        except ValueError:
            raise UsageError(f"config key {key!r}: cannot parse {raw!r} as {caster.__name__}") from None
    return out


# --- subcommands -------------------------------------------------------------

def _cmd_tokenizer_train(args) -> int:
    if args.threshold < 1:
        raise UsageError("--threshold must be >= 1")
    sentences: list[Sentence] = []
    for path in args.input:
        sentences.extend(_parse_sentences(path))
    if not sentences:
        raise DataError("no sentences found in the input files")
    model = train_bpe(sentences, args.threshold, args.max_vocab)
    save_bpe(model, args.out)
    print(f"vocab size: {model.vocab_size}")
    print(f"merges: {len(model.merges)}")
    return EXIT_OK


def _load_run_config(args) -> dict:
    values: dict[str, str] = {}
    if args.config:
        values.update(parse_config_file(_read_text(args.config), args.config))
    for override in args.set or []:
        if "=" not in override:
            raise UsageError(f"--set expects key=value, got {override!r}")
        key, value = override.split("=", 1)
        key = key.strip()
        if key not in _ALL_KEYS:
            raise UsageError(f"--set: unknown key {key!r}")
        values[key] = value.strip()
    return _typed(values)


def _cmd_train(args) -> int:
    cfg = _load_run_config(args)
    for required in ("train", "dev", "vocab", "checkpoint"):
        if required not in cfg:
            raise UsageError(f"missing required config key {required!r}")
    for path_key in ("train", "dev", "vocab"):
        if not os.path.exists(cfg[path_key]):
            raise DataError(f"config key {path_key!r}: no such file {cfg[path_key]!r}")

    try:
        bpe = load_bpe(cfg["vocab"])
    except BpeFormatError as e:
        raise DataError(str(e)) from None
    train_sentences = _parse_sentences(cfg["train"])
    dev_sentences = _parse_sentences(cfg["dev"])
    if not train_sentences:
        raise DataError(f"{cfg['train']}: empty training corpus")
    if not dev_sentences:
        raise DataError(f"{cfg['dev']}: empty dev corpus")
    schemas = build_schemas(train_sentences)

    model_kwargs = {key: cfg.get(key, default) for key, default in _MODEL_DEFAULTS.items()}
    seed_init = model_kwargs.pop("init_seed")
    model_config = ModelConfig(
        vocab_size=bpe.vocab_size, schemas=schemas, seed=seed_init, **model_kwargs
    )
    train_kwargs = {k: cfg[k] for k in _TRAIN_KEYS if k in cfg and k != "lr_stages"}
    if "lr_stages" in cfg:
        train_kwargs["lr_stages"] = parse_lr_stages(cfg["lr_stages"])
    train_kwargs.setdefault("max_words", model_config.max_words)
    try:
        train_config = TrainConfig(**train_kwargs)
    except ValueError as e:
        raise UsageError(str(e)) from None

    model = TaggerModel(model_config)
    print(f"parameters: {parameter_count(model_config)}")
    log_handle = open(cfg["log"], "w", encoding="utf-8") if "log" in cfg else None
    try:
        model, logs = train_loop(
            model,
            train_sentences,
            dev_sentences,
            train_config,
            bpe,
            log_file=log_handle,
            on_best=lambda m: save_checkpoint(m, cfg["checkpoint"]),
        )
    finally:
        if log_handle is not None:
            log_handle.close()
    for entry in logs:
        print(entry.line())
    print(f"checkpoint: {cfg['checkpoint']}")
    return EXIT_OK


def _load_model_and_vocab(model_path: str, vocab_path: str):
    try:
        model = load_checkpoint(model_path)
    except (CheckpointError, OSError) as e:
        raise DataError(f"cannot load checkpoint {model_path}: {e}") from None
    try:
        bpe = load_bpe(vocab_path)
    except (BpeFormatError, OSError) as e:
        raise DataError(f"cannot load vocabulary {vocab_path}: {e}") from None
    if model.config.vocab_size != bpe.vocab_size:
        raise DataError(
            f"vocabulary size mismatch: checkpoint expects {model.config.vocab_size}, "
            f"file has {bpe.vocab_size}"
        )
    return model, bpe


def _cmd_eval(args) -> int:
    model, bpe = _load_model_and_vocab(args.model, args.vocab)
    sentences = _parse_sentences(args.test)
    if not sentences:
        raise DataError(f"{args.test}: empty test corpus")
    try:
        report = evaluate_model(model, sentences, bpe, include_none=not args.exclude_none)
    except ValueError as e:
        raise DataError(str(e)) from None
    table = format_report_table(report)
    _atomic_write_text(args.report, table)
    kv_path = args.kv_report or args.report + ".kv"
    _atomic_write_text(kv_path, format_report_kv(report))
    print(table, end="")
    return EXIT_OK


_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def _sentences_from_plain_text(text: str) -> list[Sentence]:
    """One sentence per line; words split on whitespace and punctuation."""
    sentences = []
    for line in text.split("\n"):
        tokens = _TOKEN_RE.findall(line)
        if tokens:
            sentences.append(Sentence([Word(tok) for tok in tokens], str(len(sentences) + 1)))
    return sentences


def _looks_like_conllu(path: str, text: str) -> bool:
    if path.endswith((".conllu", ".conll")):
        return True
    for line in text.split("\n")[:50]:
        if line.count("\t") == 9:
            return True
    return False


def _cmd_tag(args) -> int:
    model, bpe = _load_model_and_vocab(args.model, args.vocab)
    text = _read_text(args.input)
    fmt = args.format
    if fmt == "auto":
        fmt = "conllu" if _looks_like_conllu(args.input, text) else "text"
    if fmt == "conllu":
        try:
            sentences = parse_conllu(text)
        except ConlluError as e:
            raise DataError(f"{args.input}: {e}") from None
    else:
        sentences = _sentences_from_plain_text(text)
    if not sentences:
        _atomic_write_text(args.out, "")
        return EXIT_OK

    predictions = predict_labels(model, sentences, bpe)
    tagged = []
    for sentence, preds in zip(sentences, predictions):
        words = []
        for word, labels in zip(sentence.words, preds):
            kept = {cat: lab for cat, lab in labels.items() if lab != NONE_LABEL}
            words.append(Word(word.surface, kept))
        tagged.append(Sentence(words, sentence.id))
    _atomic_write_text(args.out, format_conllu(tagged))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="morphtag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenizer-train", help="train a subword vocabulary on CoNLL-U corpora")
    p.add_argument("--input", nargs="+", required=True, metavar="CONLLU")
    p.add_argument("--threshold", type=int, required=True, help="minimum pair count to merge")
    p.add_argument("--max-vocab", type=int, default=None, help="hard vocabulary size cap")
    p.add_argument("--out", required=True, help="vocabulary file to write")
    p.set_defaults(func=_cmd_tokenizer_train)

    p = sub.add_parser("train", help="train a tagger from a run config")
    p.add_argument("--config", help="key = value run config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a labeled CoNLL-U file")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report", required=True, help="plain-text report path")
    p.add_argument("--kv-report", help="key=value report path (default: <report>.kv)")
    p.add_argument("--exclude-none", action="store_true",
                   help="drop the NONE label from macro precision/recall/F1 averages")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tag", help="tag plain text or CoNLL-U and write CoNLL-U")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("auto", "text", "conllu"), default="auto")
    p.set_defaults(func=_cmd_tag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConlluError, BpeFormatError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
