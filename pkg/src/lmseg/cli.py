"""Command-line interface: train, predict, evaluate, tune and synth."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from collections import Counter
from pathlib import Path

from . import baselines
from .baselines import (
    CONTINUE,
    EMPTY_TAG,
    MaxEntClassifier,
    MaxEntConfig,
    char_predict,
    fit_char_crf,
    maxent_predict,
    maxent_train,
    tag_targets,
)
from .corpus_io import (
    CorpusError,
    Dataset,
    load_corpus,
    load_dictionary,
    load_gazetteer,
    load_wordlist,
    save_corpus,
    split_dataset,
    split_folds,
)
from .evaluation import (
    EvalReport,
    inflection_bundle,
    macro_f1,
    matrix_tsv,
    stem_and_root_accuracy,
    tag_classification_metrics,
    undersegmentation_matrix,
)
from .features import FeatureConfig, Resources, build_lsv
from .modelfile import ModelFormatError, load_model, save_model
from .morphotags import GranularityError, TagError, derive_views, inflectional_view
from .semicrf import InferenceError, Model, SegmentTooLong, viterbi
from .synth import GrammarError, default_grammar, dump_grammar, generate, load_grammar
from .training import NumericError, TrainConfig, TuneGrid, fit_detailed, tune

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
VIEWS = ("lms", "ums", "stem", "root", "tag")
TASKS = ("seg", "stem", "root", "tag")
SYSTEMS = ("semicrf", "char-crf", "maxent", "maxent-split")
log = logging.getLogger("lmseg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# shared helpers

def load_resources(args) -> Resources:
    gaz = load_gazetteer(args.affix) if getattr(args, "affix", None) else None
    dct = load_dictionary(args.dict) if getattr(args, "dict", None) else None
    lsv = build_lsv(load_wordlist(args.lsv)) if getattr(args, "lsv", None) else None
    return Resources(gazetteer=gaz, dictionary=dct, lsv=lsv)


def _check_resources(model: Model) -> None:
    cfg, res = model.config, model.resources
    for flag, used, present in (("--affix", cfg.use_affix, res.gazetteer),
                                ("--dict", cfg.use_dict, res.dictionary),
                                ("--lsv", cfg.use_lsv, res.lsv)):
        if used and present is None:
            raise CorpusError(f"model was trained with {flag}; pass the same file")


def is_char_model(model) -> bool:
    return isinstance(model, Model) and any(l.endswith(CONTINUE) for l in model.labels)


def analyze(model: Model, word: str):
    if is_char_model(model):
        return char_predict(model, word)
    return viterbi(model, word).analysis


def predicted_tag(model, word: str) -> str:
    if isinstance(model, MaxEntClassifier):
        return maxent_predict(model, word)
    bundle = inflection_bundle(analyze(model, word))
    return ":".join(bundle) if bundle else EMPTY_TAG


def _require_level(model, need: int, what: str) -> None:
    if isinstance(model, MaxEntClassifier):
        if what != "tag":
            raise GranularityError(f"a MaxEnt model only supports tag output, not {what!r}")
        return
    if model.level is None or model.level < need:
        raise GranularityError(
            f"{what} needs level >= {need} labels; the model has level {model.level}")


def format_view(model, word: str, view: str) -> str:
    if view == "tag":
        return f"{word}\t{predicted_tag(model, word)}"
    ls = analyze(model, word)
    if view == "lms":
        return f"{word}\t{ls.serialize()}"
    views = derive_views(ls)
    if view == "ums":
        return f"{word}\t{' '.join(views.ums)}"
    if view == "root":
        return f"{word}\t{' '.join(views.require('roots'))}"
    return f"{word}\t{views.require('stem')}"


VIEW_LEVEL = {"lms": 0, "ums": 0, "root": 2, "stem": 2, "tag": 4}
TASK_LEVEL = {"seg": 0, "root": 2, "stem": 2, "tag": 4}


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


# commands

def cmd_train(args) -> int:
    resources = load_resources(args)
    train = load_corpus(args.train)
    feats = FeatureConfig(max_context_ngram=args.ngram, use_affix=bool(args.affix),
                          use_dict=bool(args.dict), use_lsv=bool(args.lsv))
    cfg = TrainConfig(l2=args.l2, level=args.level, features=feats, seed=args.seed,
                      max_segment_length=args.max_seg, max_iterations=args.max_iter,
                      threads=args.threads, multi_gold=args.multi_gold)
    t0 = time.perf_counter()
    if args.system in ("maxent", "maxent-split"):
        mcfg = MaxEntConfig(max_ngram=args.ngram, regularizer=args.maxent_reg,
                            coefficient=args.maxent_coef,
                            split_mode=args.system == "maxent-split", level=args.level,
                            seed=args.seed)
        model = maxent_train(tag_targets(train, args.level), mcfg)
        objective = baselines.maxent_objective(model, tag_targets(train, args.level))
    else:
        if args.inflectional:
            train = train.map(lambda ls: inflectional_view(ls, args.level))
        if args.system == "char-crf":
            model = fit_char_crf(train, cfg, resources)
            objective = float("nan")
        else:
            result = fit_detailed(train, cfg, resources)
            model, objective = result.model, result.objective
    save_model(model, args.out)
    print(f"objective\t{objective:.6f}")
    print(f"seconds\t{time.perf_counter() - t0:.2f}")
    print(f"model\t{args.out}")
    return EXIT_OK


def _load(args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = load_model(args.model, load_resources(args))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if isinstance(model, Model):
        _check_resources(model)
    return model


def cmd_predict(args) -> int:
    model = _load(args)
    _require_level(model, VIEW_LEVEL[args.view], args.view)
    words = load_wordlist(args.input)
    out = _open_out(args.output)
    try:
        for w in words:
            out.write(format_view(model, w, args.view) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def evaluate_model(model, gold: Dataset, task: str, underseg_level: int | None = None
                   ) -> EvalReport:
    """Metrics for one task, plus the undersegmentation table for segmenters."""
    _require_level(model, TASK_LEVEL[task], task)
    if task == "tag":
        level = model.config.level if isinstance(model, MaxEntClassifier) else model.level
        view = gold.map(lambda ls: inflectional_view(ls, level))
        preds = [predicted_tag(model, w) for w in gold.words]
        acc, f1 = tag_classification_metrics(preds, view)
        return EvalReport(metrics={"accuracy": acc, "macro_f1": f1})
    preds = [analyze(model, w) for w in gold.words]
    report = macro_f1(preds, gold)
    if task in ("stem", "root"):
        root_acc, stem_acc = stem_and_root_accuracy(preds, gold)
        report = EvalReport(metrics={"root_acc": root_acc, "stem_acc": stem_acc},
                            per_word=report.per_word)
    level = underseg_level if underseg_level is not None else (model.level or 0)
    report.tables["undersegmentation"] = dict(undersegmentation_matrix(preds, gold, level))
    return report


def format_table(report: EvalReport, task: str) -> str:
    """Human-readable summary with percentages, one header and one value row."""
    if task == "seg":
        cols = [("P", "precision"), ("R", "recall"), ("F1", "f1")]
    elif task == "tag":
        cols = [("Acc.", "accuracy"), ("F1", "macro_f1")]
    else:
        cols = [("Root Detection", "root_acc"), ("Stemming", "stem_acc")]
    head = "\t".join(c for c, _ in cols)
    row = "\t".join(f"{100 * report.metrics[k]:.2f}" for _, k in cols)
    return f"{head}\n{row}\n"


def cmd_evaluate(args) -> int:
    model = _load(args)
    gold = load_corpus(args.gold, "TEST")
    report = evaluate_model(model, gold, args.task, args.underseg_level)
    sys.stdout.write(format_table(report, args.task))
    if args.report:
        Path(args.report).write_text(report.to_tsv(), encoding="utf-8")
        if "undersegmentation" in report.tables:
            matrix = args.matrix or f"{args.report}.underseg.tsv"
            Path(matrix).write_text(matrix_tsv(Counter(report.tables["undersegmentation"])),
                                    encoding="utf-8")
    if args.json:
        Path(args.json).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def load_grid(path) -> TuneGrid:
    """TSV of ``axis<TAB>v1,v2,...`` rows over l2, ngram, level, affix, dict, lsv."""
    casts = {"l2": float, "ngram": int, "level": int,
             "affix": lambda s: s.strip().lower() in ("1", "true", "yes"),
             "dict": lambda s: s.strip().lower() in ("1", "true", "yes"),
             "lsv": lambda s: s.strip().lower() in ("1", "true", "yes")}
    axes = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        name, _, values = line.partition("\t")
        name = name.strip()
        if name not in casts:
            raise CorpusError(f"unknown grid axis {name!r}", lineno)
        try:
            axes[name] = tuple(casts[name](v) for v in values.split(",") if v.strip())
        except ValueError as exc:
            raise CorpusError(f"bad value on axis {name!r}: {exc}", lineno) from exc
    if not axes or any(not v for v in axes.values()):
        raise CorpusError("tuning grid is empty")
    return TuneGrid(**axes)


def metric_fn(name: str):
    def seg_f1(model, data):
        return macro_f1([analyze(model, w) for w in data.words], data).metrics["f1"]

    def stem_acc(model, data):
        return stem_and_root_accuracy([analyze(model, w) for w in data.words], data)[1]

    def tag_acc(model, data):
        return evaluate_model(model, data, "tag").metrics["accuracy"]

    return {"seg_f1": seg_f1, "stem_acc": stem_acc, "tag_acc": tag_acc}[name]


def cmd_tune(args) -> int:
    grid = load_grid(args.grid)
    resources = load_resources(args)
    data = load_corpus(args.train)
    folds = split_folds(data, args.folds, args.seed)
    base = TrainConfig(seed=args.seed, max_segment_length=args.max_seg,
                       max_iterations=args.max_iter, threads=args.threads)
    report = tune(folds, grid, metric_fn(args.metric), base, resources)
    grid_out = args.out_grid or "tune_grid.tsv"
    Path(grid_out).write_text(report.to_tsv(), encoding="utf-8")
    best = json.dumps(report.best.to_dict(), sort_keys=True, indent=2)
    Path(args.out_config or "tune_best.json").write_text(best + "\n", encoding="utf-8")
    sys.stdout.write(report.to_tsv())
    f = report.best.features
    print(f"best\tlevel={report.best.level}\tl2={report.best.l2!r}\tngram={f.max_context_ngram}")
    return EXIT_OK


def cmd_synth(args) -> int:
    g = load_grammar(args.grammar, args.seed) if args.grammar else default_grammar(args.seed)
    try:
        proportions = [int(p) for p in args.split.split(":")]
    except ValueError:
        raise UsageError(f"--split must look like 8:1:1:2, got {args.split!r}") from None
    if len(proportions) != 4 or any(p < 0 for p in proportions) or not sum(proportions):
        raise UsageError("--split needs four non-negative integers")
    data = generate(g, args.n, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = split_dataset(data, proportions, args.seed)
    for name, part in zip(("train", "tune", "dev", "test"), parts):
        save_corpus(part, out / f"{name}.tsv")
        print(f"{name}\t{len(part)}")
    gaz = g.gazetteer()
    (out / "gazetteer.txt").write_text(
        "".join(f"{p}-\n" for p in sorted(gaz.prefixes))
        + "".join(f"-{s}\n" for s in sorted(gaz.suffixes)), encoding="utf-8")
    (out / "dict.txt").write_text("".join(f"{w}\n" for w in sorted(g.dictionary().words)),
                                  encoding="utf-8")
    (out / "grammar.tsv").write_text(dump_grammar(g), encoding="utf-8")
    return EXIT_OK


def _add_resources(p) -> None:
    p.add_argument("--affix", metavar="PATH", help="affix gazetteer (-suf / pre- per line)")
    p.add_argument("--dict", metavar="PATH", help="dictionary word list")
    p.add_argument("--lsv", metavar="PATH", help="unlabeled word list for letter successor variety")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lmseg", description="Labeled morphological segmentation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    threads = os.cpu_count() or 1

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--train", required=True, metavar="PATH")
    p.add_argument("--level", type=int, choices=range(6), default=2)
    p.add_argument("--l2", type=float, default=0.1)
    p.add_argument("--ngram", type=int, default=3)
    p.add_argument("--max-seg", type=int, default=12)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=threads)
    p.add_argument("--multi-gold", choices=("first", "marginalize"), default="first")
    p.add_argument("--system", choices=SYSTEMS, default="semicrf")
    p.add_argument("--inflectional", action="store_true",
                   help="relabel non-inflectional segments as SEGMENT (tag classification)")
    p.add_argument("--maxent-reg", choices=("L1", "L2"), default="L1")
    p.add_argument("--maxent-coef", type=float, default=0.1)
    p.add_argument("--out", required=True, metavar="PATH")
    _add_resources(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="analyze a word list")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--view", choices=VIEWS, default="lms")
    p.add_argument("--output", default="-")
    _add_resources(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model against a gold corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--task", choices=TASKS, default="seg")
    p.add_argument("--underseg-level", type=int, choices=range(6))
    p.add_argument("--report", metavar="PATH", help="metric TSV")
    p.add_argument("--matrix", metavar="PATH", help="undersegmentation TSV")
    p.add_argument("--json", metavar="PATH")
    _add_resources(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="grid search over rotating folds")
    p.add_argument("--train", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid", required=True)
    p.add_argument("--metric", choices=("seg_f1", "stem_acc", "tag_acc"), default="seg_f1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-seg", type=int, default=12)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--threads", type=int, default=threads)
    p.add_argument("--out-grid", metavar="PATH")
    p.add_argument("--out-config", metavar="PATH")
    _add_resources(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--grammar", metavar="PATH", help="grammar TSV (default: built-in)")
    p.add_argument("--n", type=int, default=1200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", default="8:1:1:2")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, ModelFormatError, GranularityError, TagError, GrammarError,
            InferenceError, SegmentTooLong, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
