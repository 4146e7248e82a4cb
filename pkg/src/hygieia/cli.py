"""Operator entry points: one-shot runs, router training, benchmarks, serving.

Exit codes are stable: 0 success, 2 pipeline error, 64 usage error,
78 config error. Every command runs fully offline with --script fixtures.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import build_pipeline, load_config, load_report_synonyms
from .errors import ConfigError, HygieiaError, PipelineError
from .evaluation import load_dataset, run_benchmark
from .model import GeneFinding, PatientCase, PipelineConfig, TaskKind, TaskRequest
from .router import HashingEmbedder, Metric, classify, fit_router, load_router, save_router

EXIT_OK = 0
EXIT_PIPELINE = 2
EXIT_USAGE = 64
EXIT_CONFIG = 78


@click.group()
def cli() -> None:
    """Disease-diagnosis pipeline: route, retrieve, summarize, verify."""


def _parse_genes(raw: str | None) -> tuple[GeneFinding, ...]:
    if not raw:
        return ()
    out = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        symbol, _, note = chunk.partition(":")
        out.append(GeneFinding(symbol=symbol.strip(), note=note.strip() or None))
    return tuple(out)


def _one_shot(kind: TaskKind, phenotypes: str, genes: str | None, config_path: str | None,
              script: str | None, show_trace: bool, top: int) -> None:
    cfg = load_config(config_path)
    pipeline = build_pipeline(cfg, script_override=script)
    case = PatientCase(
        id="cli",
        phenotypes=tuple(p.strip() for p in phenotypes.split(";") if p.strip()),
        genes=_parse_genes(genes),
    )
    run_config = PipelineConfig(
        max_verify_iters=cfg.pipeline.max_verify_iters,
        confidence_samples=cfg.pipeline.confidence_samples,
        retrieval_top_k=cfg.pipeline.retrieval_top_k,
        knn_k=cfg.pipeline.knn_k,
        answer_top_k=top,
        sampling_temperature=cfg.pipeline.sampling_temperature,
    )
    outcome = pipeline.run(TaskRequest(kind=kind, case=case, config=run_config))
    click.echo(f"route: {outcome.route.value}")
    click.echo(f"converged: {str(outcome.converged).lower()} "
               f"(verify iterations: {outcome.verify_iterations_used})")
    click.echo(f"c_f: {outcome.final_confidence:g}")
    for rank, answer in enumerate(outcome.answers, 1):
        click.echo(f"{rank}. {answer.label} (confidence {answer.confidence:g})")
    if show_trace:
        click.echo("trace:")
        for ev in outcome.trace.events:
            preview = ev.raw_response.replace("\n", " ")[:80]
            click.echo(f"  [{ev.stage.value}] {ev.agent_role}: {preview}")
        for warning in outcome.trace.warnings:
            click.echo(f"  warning: {warning}")


@cli.command()
@click.option("--phenotypes", required=True, help="Semicolon-separated phenotype list.")
@click.option("--genes", default=None, help="Semicolon-separated SYMBOL[:note] entries.")
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--script", default=None, type=click.Path(exists=True), help="Scripted backend file.")
@click.option("--trace", "show_trace", is_flag=True, help="Print the full reasoning path.")
@click.option("--top", default=1, show_default=True, help="Number of ranked answers.")
def diagnose(phenotypes, genes, config_path, script, show_trace, top) -> None:
    """Diagnose one case from the command line."""
    _one_shot(TaskKind.DIAGNOSE, phenotypes, genes, config_path, script, show_trace, top)


@cli.command()
@click.option("--phenotypes", required=True, help="Semicolon-separated phenotype list.")
@click.option("--genes", "gene_list", default=None, help="Semicolon-separated SYMBOL[:note] entries.")
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--script", default=None, type=click.Path(exists=True))
@click.option("--trace", "show_trace", is_flag=True)
@click.option("--top", default=1, show_default=True, help="Number of ranked genes.")
def genes(phenotypes, gene_list, config_path, script, show_trace, top) -> None:
    """Rank risk genes for one case."""
    _one_shot(TaskKind.PRIORITIZE_GENES, phenotypes, gene_list, config_path, script, show_trace, top)


@cli.group()
def router() -> None:
    """Train and evaluate the common-vs-rare case router."""


def _load_router_examples(path: str, embedder: HashingEmbedder):
    examples = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        doc = json.loads(line)
        phenotypes = doc.get("phenotypes")
        if not phenotypes or "label" not in doc:
            raise ConfigError(f"{path}:{line_no}: expected {{phenotypes:[...], label}}")
        examples.append((embedder.embed_text(" ".join(phenotypes)), str(doc["label"])))
    if not examples:
        raise ConfigError(f"{path}: no training examples")
    return examples


@router.command("fit")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--k", "knn_k", default=5, show_default=True)
@click.option("--metric", default="Cosine", type=click.Choice([m.value for m in Metric]))
@click.option("--dim", default=256, show_default=True)
def router_fit(train_path, out_path, knn_k, metric, dim) -> None:
    """Fit the KNN router on labeled phenotype lines and write the model file."""
    embedder = HashingEmbedder(dim)
    examples = _load_router_examples(train_path, embedder)
    model = fit_router(examples, knn_k=knn_k, metric=Metric(metric))
    save_router(model, out_path)
    click.echo(f"model written: {out_path} ({len(examples)} reference points)")


@router.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
def router_eval(model_path, test_path) -> None:
    """Print held-out accuracy and a per-label confusion table."""
    model = load_router(model_path)
    embedder = HashingEmbedder(model.dim)
    examples = _load_router_examples(test_path, embedder)
    labels = list(model.label_set)
    for _, label in examples:
        if label not in labels:
            labels.append(label)
    confusion = {t: {p: 0 for p in labels} for t in labels}
    correct = 0
    for vec, label in examples:
        predicted = classify(model, vec).label
        confusion[label][predicted] += 1
        correct += int(predicted == label)
    click.echo(f"accuracy: {correct / len(examples):.4f} ({correct}/{len(examples)})")
    header = "true\\pred\t" + "\t".join(labels)
    click.echo(header)
    for t in labels:
        click.echo(t + "\t" + "\t".join(str(confusion[t][p]) for p in labels))


_TASKS = {"diagnose": TaskKind.DIAGNOSE, "genes": TaskKind.PRIORITIZE_GENES}


@cli.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--task", required=True, type=click.Choice(sorted(_TASKS)))
@click.option("--k", "ks_text", default="1,5,10", show_default=True)
@click.option("--script", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--parallel", default=1, show_default=True)
def bench(dataset_path, task, ks_text, script, config_path, report_path, seed, parallel) -> None:
    """Run the benchmark and write the report JSON, TSV table, and figure."""
    from .reporting import summary_table, write_report

    try:
        ks = tuple(sorted({int(x) for x in ks_text.split(",") if x.strip()}))
    except ValueError as exc:
        raise click.UsageError(f"bad --k list: {ks_text!r}") from exc
    if not ks or any(k < 1 for k in ks):
        raise click.UsageError(f"bad --k list: {ks_text!r}")
    cfg = load_config(config_path)
    pipeline = build_pipeline(cfg, script_override=script)
    records = load_dataset(dataset_path)
    report = run_benchmark(
        records,
        _TASKS[task],
        cfg.pipeline,
        pipeline,
        ks=ks,
        dataset_name=Path(dataset_path).stem,
        seed=seed,
        synonyms=load_report_synonyms(cfg),
        parallel=parallel,
    )
    paths = write_report(report, report_path)
    click.echo(summary_table(report), nl=False)
    click.echo(f"report: {paths['json']}  table: {paths['tsv']}  figure: {paths['figure']}")


@cli.command()
@click.option("--config", "config_path", default=None, type=click.Path())
def serve(config_path) -> None:
    """Run the HTTP service until signaled."""
    import uvicorn

    from .service import create_app

    cfg = load_config(config_path)
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")


def main(argv: list[str] | None = None) -> int:
    """Invoke the CLI with stable exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except PipelineError as exc:
        click.echo(f"pipeline error: {exc}", err=True)
        return EXIT_PIPELINE
    except HygieiaError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
