"""Command line entry point: ``interprompt <command>``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
import time
from pathlib import Path

from . import kernels
from .backend import (
    BackendConfig,
    BackendError,
    HTTPBackend,
    MockBackend,
    ResponseCache,
    batch_predict,
    build_prompt,
    file_sha256,
)
from .config import ConfigError, load_settings
from .corpus import (
    DatasetSplit,
    IngestionError,
    UndefinedRatioError,
    all_posts,
    contingency,
    delta_ratios,
    load_dataset,
)
from .losslab import (
    MEMORIZE_POSTS,
    GradientCheckError,
    LossConfig,
    gradient_check,
    label_accuracy,
    objective,
    random_toy_problem,
    toy_problem,
    train_toy,
)
from .parser import parse_or_default
from .prompts import PromptError, build_finetune_records, count_exemplar_blocks, write_finetune_jsonl
from .report import (
    MissingIdsError,
    EvaluationReport,
    append_manifest,
    evaluate,
    read_predictions,
    render_markdown,
    write_csv,
    write_predictions,
)
from .significance import FLAVORS, SampleVector, pairwise_matrix, render_matrix

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

logger = logging.getLogger("interprompt")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out(text: str = "") -> None:
    print(text)


def _load(path, split: str | None = None):
    try:
        data = load_dataset(path)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None
    except IngestionError as exc:
        raise DataError(str(exc)) from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if isinstance(data, DatasetSplit) and split:
        posts = list(getattr(data, split))
    else:
        posts = all_posts(data)
    if not posts:
        raise DataError(f"{path}: no posts" + (f" in the {split} split" if split else ""))
    return posts


def _input_hashes(*paths) -> dict:
    hashes = {}
    for path in paths:
        if path is None:
            continue
        path = Path(path)
        if path.is_dir():
            for child in sorted(path.iterdir()):
                if child.is_file():
                    hashes[str(child)] = file_sha256(child)
        elif path.is_file():
            hashes[str(path)] = file_sha256(path)
    return hashes


def _manifest_path(args, out: Path) -> Path:
    return Path(args.manifest) if args.manifest else out.parent / "manifest.jsonl"


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------


def cmd_prepare(args, settings) -> int:
    template = settings.template
    posts = _load(args.dataset, args.split)
    try:
        records = build_finetune_records(posts, template)
    except PromptError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_finetune_jsonl(records, out)

    table = contingency(posts)
    try:
        ratios = tuple(float(r) for r in delta_ratios(table))
    except UndefinedRatioError:
        ratios = None
    _out(f"records: {n}")
    _out("contingency (rows TBe, columns PBu):")
    _out(f"  TBe=0  {table.n00:>6} {table.n01:>6}")
    _out(f"  TBe=1  {table.n10:>6} {table.n11:>6}")
    if ratios:
        _out(f"delta ratios: PBu=0 {ratios[0]:.6f}  PBu=1 {ratios[1]:.6f}")
    else:
        _out("delta ratios: undefined (empty TBe=0 cell)")

    payload = {
        "inputs": _input_hashes(args.dataset),
        "template_sha256": template.digest(),
        "records": n,
        "output": str(out),
        "contingency": [table.n00, table.n01, table.n10, table.n11],
        "delta_ratios": list(ratios) if ratios else None,
    }
    if args.submit:
        backend = _backend(args, settings, posts=(), shots=None)
        job = backend.submit_finetune(out)
        _out(f"fine-tune job: {job.job_id} ({job.status})")
        if args.wait:
            while not job.terminal:
                time.sleep(args.poll_interval)
                job = backend.poll_finetune(job)
            _out(f"fine-tune job {job.job_id}: {job.status} {job.result_model_id or ''}".rstrip())
        payload["backend"] = backend.config.public_dict()
        payload["job_ids"] = [job.job_id]
        payload["job_status"] = job.status
        payload["result_model_id"] = job.result_model_id
    entry = append_manifest(_manifest_path(args, out), "prepare", payload)
    if args.summary:
        Path(args.summary).write_text(json.dumps({**payload, "run_id": entry["run_id"]}, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def _backend_config(args, settings) -> BackendConfig:
    values = dict(settings.backend)
    for key in ("base_url", "model_id", "max_tokens", "temperature", "max_parallel", "retry_budget"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    values.setdefault("stop", (settings.template.stop_sequence,))
    return BackendConfig.from_env(**values)


def _backend(args, settings, posts, shots):
    config = _backend_config(args, settings)
    mock = getattr(args, "mock", None)
    if not mock:
        return HTTPBackend(config)
    template = settings.template
    fixtures = {}
    if mock == "gold":
        pool = _exemplar_pool(args, posts)
        for post, record in zip(posts, build_finetune_records(posts, template)):
            fixtures[build_prompt(post, template, shots, pool)] = record.completion
    elif mock != "neither":
        with open(mock, encoding="utf-8") as fh:
            fixtures = json.load(fh)
        if not isinstance(fixtures, dict):
            raise DataError(f"{mock}: mock fixture must be a JSON object mapping prompt to completion")
    if config.base_url == BackendConfig().base_url:
        config = config.with_(base_url="mock://")
    return MockBackend(config, fixtures=fixtures, template=template)


def _exemplar_pool(args, posts):
    if getattr(args, "exemplars", None):
        return _load(args.exemplars, "train")
    return posts


def cmd_predict(args, settings) -> int:
    template = settings.template
    posts = _load(args.dataset, args.split)
    shots = args.shots
    pool = _exemplar_pool(args, posts) if shots is not None else ()
    backend = _backend(args, settings, posts, shots)
    cache = ResponseCache(args.cache_dir) if args.cache_dir else None

    if shots is not None:
        for post in posts:
            prompt = build_prompt(post, template, shots, pool)
            found = count_exemplar_blocks(prompt, template)
            if found != shots:
                raise DataError(f"post {post.id}: prompt has {found} exemplar blocks, expected {shots}")
        _out(f"verified {len(posts)} prompts with {shots} exemplar block(s) each")

    predictions = batch_predict(posts, template, backend, shots=shots, exemplar_pool=pool, cache=cache)
    rows = []
    for pred in predictions:
        parsed = parse_or_default(pred.completion, template)
        rows.append({
            "id": pred.post_id,
            "prompt_sha256": pred.prompt_sha256,
            "completion": pred.completion,
            "error": pred.error,
            "cached": pred.cached,
            "parse": parsed.to_dict(),
        })
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_predictions(out, rows)

    ok = sum(p.error is None for p in predictions)
    status = [r["parse"]["status"] for r in rows]
    counts = {k: status.count(k) for k in ("exact", "repaired", "unparseable")}
    _out(f"predictions: {len(rows)} ok: {ok} failed: {len(rows) - ok} "
         f"exact: {counts['exact']} repaired: {counts['repaired']} unparseable: {counts['unparseable']}")
    append_manifest(_manifest_path(args, out), "predict", {
        "inputs": _input_hashes(args.dataset, getattr(args, "exemplars", None)),
        "template_sha256": template.digest(),
        "backend": backend.config.public_dict(),
        "model_id": backend.config.model_id,
        "mock": args.mock,
        "shots": shots,
        "counts": {**counts, "failed": len(rows) - ok},
        "output": str(out),
    })
    if ok == 0:
        print("error: every request failed", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate / report / significance
# ---------------------------------------------------------------------------


def _write_report(report: EvaluationReport, prefix: Path) -> None:
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.md").write_text(render_markdown(report), encoding="utf-8")
    write_csv(report, f"{prefix}.csv")
    Path(f"{prefix}.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_evaluate(args, settings) -> int:
    template = settings.template
    gold = _load(args.gold)
    try:
        predictions = read_predictions(args.predictions)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    prefix = Path(args.out)
    payload = {
        "inputs": _input_hashes(args.predictions, args.gold),
        "template_sha256": template.digest(),
    }
    try:
        report = evaluate(predictions, gold, template)
    except MissingIdsError as exc:
        raise DataError(str(exc)) from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    payload["counts"] = report.counts
    entry = append_manifest(_manifest_path(args, prefix), "evaluate", payload)
    report.run_id = entry["run_id"]
    if args.significance:
        report.significance_markdown = Path(args.significance).read_text(encoding="utf-8")
    _write_report(report, prefix)
    _out(render_markdown(report))
    return EXIT_OK


def cmd_report(args, settings) -> int:
    try:
        data = json.loads(Path(args.evaluation).read_text(encoding="utf-8"))
        report = EvaluationReport.from_dict(data)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"{args.evaluation}: {exc}") from None
    if args.significance:
        report.significance_markdown = Path(args.significance).read_text(encoding="utf-8")
    text = render_markdown(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    _out(text)
    return EXIT_OK


def read_scores(spec: str) -> SampleVector:
    """``path`` or ``label=path``; numbers separated by commas, whitespace or newlines."""
    label, sep, path = spec.partition("=")
    if not sep:
        path, label = spec, Path(spec).stem
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None
    try:
        values = [float(tok) for tok in re.split(r"[,\s]+", text) if tok]
        return SampleVector(label, values)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_significance(args, settings) -> int:
    if len(args.scores) < 2:
        raise UsageError("need at least two score files")
    vectors = [read_scores(spec) for spec in args.scores]
    if args.flavor == "pooled":
        args.flavor = "two_sample_pooled"
    try:
        results = pairwise_matrix(vectors, args.flavor)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    table = render_matrix(vectors, results)
    header = f"Student's t-test ({args.flavor}, two-sided)\n\n"
    _out(header + table)
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.md").write_text(header + table, encoding="utf-8")
        with open(f"{prefix}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["a", "b", "flavor", "t", "p", "df"])
            for (a, b), res in results.items():
                writer.writerow([a, b, res.flavor, res.t_statistic, res.p_value, res.degrees_of_freedom])
    return EXIT_OK


# ---------------------------------------------------------------------------
# losslab
# ---------------------------------------------------------------------------


def cmd_losslab(args, settings) -> int:
    from .synthetic import synthetic_posts

    config = settings.loss
    lambdas = {k: getattr(args, k) for k in ("lambda1", "lambda2", "lambda3") if getattr(args, k) is not None}
    if lambdas:
        try:
            config = LossConfig(**{**{"lambda1": config.lambda1, "lambda2": config.lambda2,
                                      "lambda3": config.lambda3}, **lambdas})
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    posts = list(MEMORIZE_POSTS) if args.fixture == "memorize" else synthetic_posts()[:50]

    check_model, check_records = toy_problem(MEMORIZE_POSTS, settings.template, seed=args.seed)
    try:
        errors = [gradient_check(check_model, check_records, config)]
        errors += [gradient_check(*random_toy_problem(seed), config) for seed in range(args.check_seeds)]
    except GradientCheckError as exc:
        raise DataError(f"gradient check aborted: {exc}") from None
    max_err = max(errors)

    model, records = toy_problem(posts, settings.template, seed=args.seed, learning_rate=args.lr)
    result = train_toy(model, records, args.epochs, config)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "combined_loss"])
            for epoch, loss in enumerate(result.trajectory):
                writer.writerow([epoch, repr(loss)])
    _out(f"kernels: {kernels.backend_name()}")
    _out(f"fixture: {args.fixture} ({len(records)} records, vocab {model.vocab_size})")
    _out(f"lambda: {config.weights}")
    _out(f"gradient check: max relative error {max_err:.3e} over {len(errors)} models")
    if result.trajectory:
        final = objective(model, records, config) if not result.diverged else result.trajectory[-1]
        _out(f"loss: initial {result.trajectory[0]:.6f} final {final:.6f} after {len(result.trajectory)} epochs")
        if not result.diverged:
            _out(f"label accuracy (training set): {label_accuracy(model, posts, settings.template):.4f}")
    if result.diverged:
        print(f"error: {result.message}", file=sys.stderr)
        return EXIT_DATA
    if max_err > 1e-4:
        print("error: gradient check exceeds 1e-4", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_backend_flags(p):
    p.add_argument("--mock", help="use the in-process mock: 'gold', 'neither', or a JSON prompt->completion file")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model", dest="model_id")
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-parallel", dest="max_parallel", type=int)
    p.add_argument("--retry-budget", dest="retry_budget", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="interprompt", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI file with [template], [backend] and [loss] sections")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="write fine-tuning JSONL and dataset statistics")
    p.add_argument("--dataset", required=True, help="dataset file or split directory")
    p.add_argument("--split", default="train", choices=("train", "validation", "test"))
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--summary", help="also write the summary as JSON")
    p.add_argument("--submit", action="store_true", help="submit a fine-tune job with the written file")
    p.add_argument("--wait", action="store_true", help="poll the job until it finishes")
    p.add_argument("--poll-interval", type=float, default=30.0)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_prepare)

    for name, help_text in (("predict", "generate completions"), ("nshot", "alias of predict --shots N")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--dataset", required=True)
        p.add_argument("--split", default="test", choices=("train", "validation", "test"))
        p.add_argument("--out", required=True)
        p.add_argument("--shots", type=int, required=name == "nshot",
                       help="N-shot prompting with N exemplars; omit for fine-tuned-model prompts")
        p.add_argument("--exemplars", help="dataset supplying exemplars (train split if a directory)")
        p.add_argument("--cache-dir")
        p.add_argument("--manifest")
        _add_backend_flags(p)
        p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold labels and cues")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True, help="output prefix; writes .md, .csv and .json")
    p.add_argument("--significance", help="Markdown significance table to embed")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("significance", help="pairwise t-tests over score files")
    p.add_argument("scores", nargs="+", help="score file, or label=path")
    p.add_argument("--flavor", default="welch", choices=(*FLAVORS, "pooled"),
                   help="t-test flavor; 'pooled' is short for two_sample_pooled")
    p.add_argument("--out", help="output prefix; writes .md and .csv")
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("losslab", help="gradient check and toy training of the combined loss")
    p.add_argument("--fixture", default="irf", choices=("irf", "memorize"))
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lambda3", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check-seeds", type=int, default=20)
    p.add_argument("--out", help="trajectory CSV")
    p.set_defaults(func=cmd_losslab)

    p = sub.add_parser("report", help="render an evaluation JSON as Markdown")
    p.add_argument("--evaluation", required=True)
    p.add_argument("--significance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = load_settings(args.config)
        if getattr(args, "epochs", 0) is not None and getattr(args, "epochs", 0) < 0:
            raise UsageError("--epochs must be non-negative")
        if getattr(args, "shots", None) is not None and args.shots < 0:
            raise UsageError("--shots must be non-negative")
        return args.func(args, settings)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BackendError, ValueError) as exc:
        code = EXIT_BACKEND if isinstance(exc, BackendError) else EXIT_DATA
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
