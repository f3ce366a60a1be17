"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 user error, 2 backend/system error.  Every command
supports ``--dry-run``, which prints the planned actions (including record
counts for fine-tunes) and performs no network I/O.  Commands never
overwrite completed artifacts in the state directory unless ``--force``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .backend import RemoteBackend
from .config import load_config
from .corpus import Corpus, Split, SplitSpec, ingest_corpus, load_unseen, split_corpus
from .errors import BackendError, NudgecastError
from .evalkit import evaluate_model, parse_prediction
from .mockbackend import MockBackend
from .promptgen import (
    FeatureMask,
    build_training_dataset,
    export_training_file,
    get_template,
    render_prompt,
)
from .service import ScenarioRequest, ServiceConfig, create_app
from .sweeps import (
    CampaignRunner,
    ExperimentPlan,
    enumerate_cells,
    render_campaign_table,
    run_unseen_validation,
    save_report,
    _training_entries,
)


class UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser):
        self.parser = parser
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - exit 1 instead of argparse's 2
        raise UsageError(message, self)


def _counts(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("counts must be train,validation,test")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="config file (default ./nudgecast.toml)")
    common.add_argument("--state-dir", help="state directory (default .nudgecast)")
    common.add_argument("--backend", choices=["mock", "remote"], help="model provider")
    common.add_argument("--dry-run", action="store_true",
                        help="print planned actions; no writes, no network")
    common.add_argument("--force", action="store_true",
                        help="allow overwriting completed artifacts")

    parser = _Parser(prog="nudgecast", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nudgecast {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("ingest", parents=[common], help="validate a corpus file")
    p.add_argument("--corpus")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", parents=[common], help="write a deterministic split")
    p.add_argument("--corpus")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--counts", type=_counts, default=None, metavar="T,V,E")
    p.add_argument("--out", help="split file (default under state dir)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("gen-prompts", parents=[common], help="export a training file")
    p.add_argument("--corpus")
    p.add_argument("--split", dest="split_file")
    p.add_argument("--subset", choices=["train", "validation"], default="train")
    p.add_argument("--variant", default=None)
    p.add_argument("--mask", default="baseline")
    p.add_argument("--out", help="output JSONL (default: digest-named under state dir)")
    p.set_defaults(func=cmd_gen_prompts)

    p = sub.add_parser("finetune", parents=[common], help="submit a fine-tune job")
    p.add_argument("--training", required=True)
    p.add_argument("--validation")
    p.add_argument("--base-model", default=None)
    p.add_argument("--wait", action="store_true")
    p.add_argument("--poll-interval", type=float, default=2.0)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("infer", parents=[common], help="predict one scenario")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", help="JSON file with scenario fields")
    p.add_argument("--corpus")
    p.add_argument("--split", dest="split_file")
    p.add_argument("--study-id", help="predict a study from the corpus instead")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--temperature", type=float, default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate on the test split")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus")
    p.add_argument("--split", dest="split_file")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--variant", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="run a campaign plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--corpus")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("unseen", parents=[common], help="validate on unseen holdout")
    p.add_argument("--model", required=True)
    p.add_argument("--unseen", dest="unseen_file")
    p.add_argument("--corpus")
    p.add_argument("--split", dest="split_file")
    p.add_argument("--exclude-category", default="monetary")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.set_defaults(func=cmd_unseen)

    p = sub.add_parser("serve", parents=[common], help="run the scenario API + UI")
    p.add_argument("--corpus")
    p.add_argument("--split", dest="split_file")
    p.add_argument("--model", help="default model id (remote backend)")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def _load_cfg(args) -> dict:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "state_dir", None):
        cfg["state_dir"] = args.state_dir
    if getattr(args, "backend", None):
        cfg["backend"] = args.backend
    return cfg


def _make_backend(cfg: dict):
    if cfg["backend"] == "remote":
        return RemoteBackend(
            base_url=cfg["api_base"] or None,
            api_key=cfg["api_key"] or None,
            state_dir=cfg["state_dir"],
        )
    return MockBackend()


def _corpus_path(args, cfg: dict) -> str:
    path = getattr(args, "corpus", None) or cfg["corpus"]
    if not path:
        raise NudgecastError("no corpus given: pass --corpus or set it in the config")
    return path


def _split_for(args, cfg: dict, corpus: Corpus) -> Split:
    """Use the given split file, or derive the configured default split."""
    if getattr(args, "split_file", None):
        return _load_split(args.split_file, corpus)
    return split_corpus(corpus, SplitSpec(seed=cfg["seed"], counts=tuple(cfg["counts"])))


def _load_split(path: str, corpus: Corpus) -> Split:
    data = json.loads(Path(path).read_text("utf-8"))
    if data.get("corpus_digest") and data["corpus_digest"] != corpus.provenance:
        raise NudgecastError(
            f"split file {path} was made for a different corpus "
            f"(digest {data['corpus_digest'][:12]} != {corpus.provenance[:12]})"
        )
    return Split.from_dict(data)


def _refuse_overwrite(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise NudgecastError(f"{path} already exists (use --force to overwrite)")


def _resolve_mock_model(backend: MockBackend, model_id: str, corpus: Corpus,
                        split: Split, target_entries, variant: str):
    """Build the requested mock oracle on the fly.

    mock:replay is built over the evaluated entries themselves (identity
    oracle); mock:nearest is built from the training slice.
    """
    template = get_template(variant)
    mask = FeatureMask.all_features()
    if model_id == "mock:replay":
        records = build_training_dataset(target_entries, template, mask)
        studies = [s for s, _ in target_entries]
        return backend.build_mock_model(records, mode="replay", studies=studies)
    if model_id == "mock:nearest":
        train_entries = corpus.subset(split.train)
        records = build_training_dataset(train_entries, template, mask)
        studies = [s for s, _ in train_entries]
        return backend.build_mock_model(records, mode="nearest", studies=studies)
    raise NudgecastError(
        f"unknown mock model {model_id!r}; expected mock:replay or mock:nearest"
    )


# -- commands ----------------------------------------------------------------


def cmd_ingest(args) -> int:
    cfg = _load_cfg(args)
    corpus = ingest_corpus(_corpus_path(args, cfg))
    n_holdout = sum(1 for s, _ in corpus if s.holdout)
    print(f"ok: {len(corpus)} entries, digest {corpus.provenance[:12]}, "
          f"{n_holdout} holdout")
    return 0


def cmd_split(args) -> int:
    cfg = _load_cfg(args)
    corpus = ingest_corpus(_corpus_path(args, cfg))
    seed = args.seed if args.seed is not None else cfg["seed"]
    counts = args.counts if args.counts is not None else tuple(cfg["counts"])
    out = Path(args.out) if args.out else (
        Path(cfg["state_dir"]) / "splits" /
        f"seed{seed}-{counts[0]}-{counts[1]}-{counts[2]}.json"
    )
    if args.dry_run:
        print(f"would split {len(corpus)} entries as {counts} (seed {seed}) -> {out}")
        return 0
    split = split_corpus(corpus, SplitSpec(seed=seed, counts=counts))
    _refuse_overwrite(out, args.force)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {"seed": seed, "counts": list(counts),
               "corpus_digest": corpus.provenance, **split.to_dict()}
    out.write_text(json.dumps(payload, indent=1), "utf-8")
    print(f"split written: {out} (train {counts[0]}, validation {counts[1]}, "
          f"test {counts[2]})")
    return 0


def cmd_gen_prompts(args) -> int:
    cfg = _load_cfg(args)
    corpus = ingest_corpus(_corpus_path(args, cfg))
    split = _split_for(args, cfg, corpus)
    variant = args.variant or cfg["variant"]
    entries = corpus.subset(getattr(split, args.subset))
    template = get_template(variant)
    mask = FeatureMask.preset(args.mask)
    records = build_training_dataset(entries, template, mask)
    if args.dry_run:
        print(f"would export {len(records)} {args.subset} records "
              f"(variant {variant}, mask {args.mask})")
        return 0
    if args.out:
        out = Path(args.out)
        _refuse_overwrite(out, args.force)
        out.parent.mkdir(parents=True, exist_ok=True)
        digest = export_training_file(records, out)
    else:
        from .sweeps import _export_training
        digest, out = _export_training(records, Path(cfg["state_dir"]) / "training")
    print(f"wrote {len(records)} records to {out} (digest {digest[:16]})")
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_cfg(args)
    base_model = args.base_model or cfg["base_model"]
    training = Path(args.training)
    if not training.exists():
        raise NudgecastError(f"training file not found: {training}")
    n_records = sum(1 for line in training.read_text("utf-8").splitlines() if line.strip())
    if args.dry_run:
        digest = hashlib.sha256(training.read_bytes()).hexdigest()[:16]
        print(f"would submit fine-tune: {n_records} records (digest {digest}), "
              f"base model {base_model}, validation "
              f"{args.validation or '(none)'}, backend {cfg['backend']}")
        return 0
    backend = _make_backend(cfg)
    job = backend.create_finetune(training, validation_file=args.validation,
                                  base_model=base_model)
    if args.wait:
        job = backend.wait_for_job(job, poll_interval=args.poll_interval)
    print(json.dumps(job.to_dict(), indent=1))
    return 0


def cmd_infer(args) -> int:
    cfg = _load_cfg(args)
    temperature = args.temperature if args.temperature is not None else cfg["temperature"]
    if bool(args.scenario) == bool(args.study_id):
        raise NudgecastError("give exactly one of --scenario or --study-id")
    corpus = split = None
    if args.corpus:
        corpus = ingest_corpus(args.corpus)
        if args.split_file:
            split = _load_split(args.split_file, corpus)
    if args.study_id:
        if corpus is None:
            raise NudgecastError("--study-id needs --corpus")
        matches = [e for e in corpus if e[0].study_id == args.study_id]
        if not matches:
            raise NudgecastError(f"study {args.study_id!r} not in corpus")
        study = matches[0][0]
    else:
        data = json.loads(Path(args.scenario).read_text("utf-8"))
        study = ScenarioRequest(**data).to_study()
    template = get_template(cfg["variant"])
    prompt = render_prompt(template, study, FeatureMask.all_features())
    if args.dry_run:
        print(f"would run {args.runs} completion(s) against {args.model} "
              f"at temperature {temperature}; prompt:")
        print(prompt.user_text)
        return 0
    backend = _make_backend(cfg)
    model = args.model
    if cfg["backend"] == "mock":
        if corpus is None or split is None:
            raise NudgecastError("mock models need --corpus and --split to build from")
        target = matches if args.study_id else list(corpus)
        model = _resolve_mock_model(backend, args.model, corpus, split,
                                    target, cfg["variant"])
    for run_idx in range(args.runs):
        text = backend.complete(model, prompt, temperature=temperature, run_seed=run_idx)
        record = parse_prediction(text, study_id=study.study_id)
        print(json.dumps({
            "run": run_idx,
            "direction": record.direction.value if record.direction else None,
            "r_pred": record.r_pred,
            "d_pred": record.d_pred,
            "raw_text": record.raw_text,
        }))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    corpus = ingest_corpus(_corpus_path(args, cfg))
    split = _split_for(args, cfg, corpus)
    n_runs = args.runs if args.runs is not None else cfg["n_runs"]
    temperature = args.temperature if args.temperature is not None else cfg["temperature"]
    variant = args.variant or cfg["variant"]
    test_entries = corpus.subset(split.test)
    report_id = "eval-" + hashlib.sha256(
        f"{args.model}|{corpus.provenance}|{split.test}|{n_runs}|{temperature!r}|{variant}"
        .encode()
    ).hexdigest()[:12]
    report_path = Path(cfg["state_dir"]) / "reports" / f"{report_id}.json"
    if args.dry_run:
        print(f"would evaluate {args.model} on {len(test_entries)} test entries, "
              f"{n_runs} runs at temperature {temperature} -> {report_path}")
        return 0
    _refuse_overwrite(report_path, args.force)
    backend = _make_backend(cfg)
    model = args.model
    if cfg["backend"] == "mock":
        model = _resolve_mock_model(backend, args.model, corpus, split,
                                    test_entries, variant)
    report = evaluate_model(
        backend, model, test_entries,
        template=get_template(variant),
        n_runs=n_runs, temperature=temperature,
    )
    save_report(cfg["state_dir"], report_id, report.to_json_dict())
    print(f"report {report_id} written")
    print(report.summary_csv(), end="")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    corpus = ingest_corpus(_corpus_path(args, cfg))
    plan = ExperimentPlan.from_dict(json.loads(Path(args.plan).read_text("utf-8")))
    if plan.kind == "unseen_validation":
        raise NudgecastError("unseen_validation plans run via the 'unseen' command")
    runner = CampaignRunner(plan, corpus, None, cfg["state_dir"])
    if args.dry_run:
        print(f"campaign {runner.plan_digest} ({plan.kind}): "
              f"{len(enumerate_cells(plan))} cells")
        for spec in enumerate_cells(plan):
            train, val = _training_entries(plan, spec, corpus, runner.split)
            print(f"  {spec.key}: variant {spec.variant}, mask {spec.mask}, "
                  f"{len(train)} training records"
                  + (f", {len(val)} validation records" if val else ""))
        return 0
    runner.backend = _make_backend(cfg)
    result = runner.run(resume=args.resume)
    print(render_campaign_table(result), end="")
    return 1 if result.failed_cells() else 0


def cmd_unseen(args) -> int:
    cfg = _load_cfg(args)
    corpus = ingest_corpus(_corpus_path(args, cfg))
    split = _split_for(args, cfg, corpus)
    unseen_path = args.unseen_file or cfg["unseen"]
    if not unseen_path:
        raise NudgecastError("no unseen file given: pass --unseen or set it in the config")
    unseen = load_unseen(unseen_path)
    n_runs = args.runs if args.runs is not None else cfg["n_runs"]
    temperature = args.temperature if args.temperature is not None else cfg["temperature"]
    if args.dry_run:
        kept = unseen.without_category(args.exclude_category)
        print(f"would evaluate {args.model} on {len(unseen)} unseen entries "
              f"({len(kept)} after excluding {args.exclude_category!r}), "
              f"{n_runs} runs")
        return 0
    backend = _make_backend(cfg)
    model = args.model
    if cfg["backend"] == "mock":
        if args.model == "mock:replay":
            raise NudgecastError(
                "mock:replay cannot be built from holdout entries; use mock:nearest"
            )
        model = _resolve_mock_model(backend, args.model, corpus, split,
                                    list(unseen), cfg["variant"])
    result = run_unseen_validation(
        backend, model, unseen, corpus.subset(split.train),
        exclusion_category=args.exclude_category,
        n_runs=n_runs, temperature=temperature,
    )
    report_id = f"unseen-{unseen.provenance[:12]}"
    save_report(cfg["state_dir"], report_id, result.to_json_dict())
    print(f"report {report_id} written")

    def line(label, rep):
        acc = "-" if rep.direction_accuracy is None else f"{rep.direction_accuracy:.3f}"
        r_err = "-" if rep.r_error_mean is None else f"{rep.r_error_mean:.3f}"
        d_err = "-" if rep.d_error_mean is None else f"{rep.d_error_mean:.3f}"
        print(f"{label}: accuracy {acc}, r err {r_err}, d err {d_err}")

    line("full set", result.full)
    line(f"excl. {args.exclude_category}", result.filtered)
    line("naive (full)", result.naive_full)
    line(f"naive (excl. {args.exclude_category})", result.naive_filtered)
    return 0


def cmd_serve(args) -> int:
    cfg = _load_cfg(args)
    port = args.port if args.port is not None else cfg["port"]
    frontend = cfg["frontend_dist"]
    if frontend is None and Path("frontend/dist").is_dir():
        frontend = "frontend/dist"
    baseline_entries = None
    default_model = args.model or ""
    backend = _make_backend(cfg)
    if cfg["backend"] == "mock":
        corpus_path = args.corpus or cfg["corpus"]
        if not corpus_path:
            raise NudgecastError("mock serving needs --corpus to build the model from")
        corpus = ingest_corpus(corpus_path)
        if args.split_file:
            split = _load_split(args.split_file, corpus)
            train_entries = corpus.subset(split.train)
        else:
            train_entries = list(corpus)
        records = build_training_dataset(
            train_entries, get_template(cfg["variant"]), FeatureMask.all_features()
        )
        ref = backend.build_mock_model(
            records, mode="nearest", studies=[s for s, _ in train_entries]
        )
        default_model = ref.model_id
        baseline_entries = train_entries
    if args.dry_run:
        print(f"would serve on {args.host}:{port} with model {default_model or '(remote)'}, "
              f"frontend {frontend or '(none)'}")
        return 0
    app = create_app(backend, ServiceConfig(
        state_dir=Path(cfg["state_dir"]),
        default_model=default_model,
        template_variant=cfg["variant"],
        frontend_dist=Path(frontend) if frontend else None,
        baseline_entries=baseline_entries,
    ))
    import uvicorn
    uvicorn.run(app, host=args.host, port=port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc.parser.format_usage(), file=sys.stderr, end="")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not getattr(args, "command", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except NudgecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
