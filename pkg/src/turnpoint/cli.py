"""Command-line front end: thin client over the batch pipeline and service.

Every subcommand maps to one pipeline stage (plus ``reproduce`` and
``serve``). Exit codes: 0 success, 2 configuration error, 3 data error,
4 skipped because a conditional input is absent.
"""

from __future__ import annotations

import sys
from dataclasses import replace

import click

from . import __version__
from .ingest import IntegrityError, SchemaError
from .pipeline import (
    ConfigError,
    DataError,
    PipelineResult,
    SkippedError,
    load_config,
    reproduce_paper,
    run_pipeline,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SKIPPED = 4


def _die(code: int, message: object) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _fmt(value: float | None, digits: int = 2) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Pipeline configuration file (JSON).",
)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Output directory for artifacts [default: runs/latest].",
)
@click.option(
    "--paper-protocol",
    is_flag=True,
    default=False,
    help="Resample the whole training set before cross-validation folds"
    " (matches the published evaluation order; optimistic).",
)
@click.option(
    "--threads",
    type=int,
    default=None,
    help="Worker threads for fitting and evaluation (results never change).",
)
@click.pass_context
def main(ctx, config_path, seed, out_dir, paper_protocol, threads) -> None:
    """Competition momentum analytics: quantify, label, train, serve."""
    ctx.obj = {
        "config_path": config_path,
        "seed": seed,
        "out_dir": out_dir,
        "paper_protocol": paper_protocol,
        "threads": threads,
    }


def _run_stage(ctx, upto: str) -> PipelineResult:
    obj = ctx.obj
    if not obj["config_path"]:
        _die(EXIT_CONFIG, "this command needs --config pointing at a pipeline config")
    try:
        config = load_config(obj["config_path"])
        if obj["seed"] is not None:
            config = replace(config, seed=obj["seed"])
        if obj["paper_protocol"]:
            config = replace(config, paper_protocol=True)
        return run_pipeline(
            config,
            obj["out_dir"] or "runs/latest",
            upto=upto,
            threads=obj["threads"],
        )
    except ConfigError as exc:
        _die(EXIT_CONFIG, exc)
    except (DataError, SchemaError, IntegrityError) as exc:
        _die(EXIT_DATA, exc)
    raise AssertionError("unreachable")


@main.command()
@click.pass_context
def ingest(ctx) -> None:
    """Parse the input files into point records."""
    result = _run_stage(ctx, "ingest")
    doc = result.artifact("ingest")
    click.echo(
        f"ingested {doc['n_records']} points across {len(doc['matches'])} matches"
        f" ({len(doc['row_issues'])} rows skipped)"
    )
    click.echo(f"artifact: {result.path('ingest')}")


@main.command()
@click.pass_context
def weigh(ctx) -> None:
    """Resolve per-match indicator weights."""
    result = _run_stage(ctx, "weigh")
    doc = result.artifact("weigh")
    click.echo(f"weight source: {doc['source']}")
    for mid, ws in doc["per_match"].items():
        click.echo(f"  {mid}: stage boundary at unit {ws['boundary']}")
    click.echo(f"artifact: {result.path('weigh')}")


@main.command()
@click.pass_context
def quantify(ctx) -> None:
    """Accumulate both players' potential over each match."""
    result = _run_stage(ctx, "quantify")
    doc = result.artifact("quantify")
    for mid, series in doc["per_match"].items():
        click.echo(
            f"  {mid}: {len(series['p_a'])} units,"
            f" final P_A={series['p_a'][-1]:.4f} P_B={series['p_b'][-1]:.4f}"
        )
    click.echo(f"artifact: {result.path('quantify')}")


@main.command()
@click.pass_context
def label(ctx) -> None:
    """Mark situation turning points and build the feature table."""
    result = _run_stage(ctx, "label")
    doc = result.artifact("label")
    for mid, entry in doc["per_match"].items():
        click.echo(f"  {mid}: {entry['count_turns']} turns")
    click.echo(
        f"dataset: {doc['n_positive']} turns / {doc['n_negative']} non-turns"
        f" (imbalance {_fmt(doc['imbalance_pct'])}%)"
    )
    click.echo(f"artifact: {result.path('label')}")


@main.command()
@click.pass_context
def rebalance(ctx) -> None:
    """Split chronologically and rebalance the training classes."""
    result = _run_stage(ctx, "rebalance")
    doc = result.artifact("rebalance")
    report = doc["report"]
    if report is None:
        click.echo("no resample plan configured; training set left as is")
    else:
        b, a = report["before"], report["after"]
        click.echo(
            f"{report['method']}: {b['minority']}/{b['majority']} ->"
            f" {a['minority']}/{a['majority']}"
            f" (+{report['synthetic_count']} synthetic, -{report['removed_count']} removed)"
        )
    click.echo(f"artifact: {result.path('rebalance')}")


@main.command()
@click.pass_context
def train(ctx) -> None:
    """Fit the classifier (running the grid search when configured)."""
    result = _run_stage(ctx, "train")
    doc = result.artifact("train")
    spec = doc["spec"]
    if doc["grid"] is not None:
        click.echo(
            f"grid chose n_trees={doc['grid']['n_trees']}"
            f" max_splits={doc['grid']['max_splits']}"
            f" (mean fold AUC {doc['grid']['auc']:.4f})"
        )
    click.echo(f"fitted {spec['kind']} (digest {doc['model_digest'][:12]})")
    click.echo(f"artifact: {result.path('train')}")


@main.command()
@click.pass_context
def evaluate(ctx) -> None:
    """Cross-validate on the training split and score the held-out test."""
    result = _run_stage(ctx, "evaluate")
    doc = result.artifact("evaluate")
    cv = doc["cv"]
    click.echo(f"cv ({doc['cv_protocol']}):")
    click.echo(
        f"  accuracy {_fmt(cv['accuracy'])}%  recall {_fmt(cv['recall'])}%"
        f"  g-mean {_fmt(cv['g_mean'])}%  auc {cv['auc']:.4f}"
    )
    if doc["test"] is None:
        click.echo(f"test: {doc['test_note']}")
    else:
        t = doc["test"]
        click.echo(
            f"test: accuracy {_fmt(t['accuracy'])}%  recall {_fmt(t['recall'])}%"
            f"  g-mean {_fmt(t['g_mean'])}%  auc {t['auc']:.4f}"
        )
    click.echo(f"artifact: {result.path('evaluate')}")


@main.command()
@click.pass_context
def importance(ctx) -> None:
    """Permutation importance on out-of-bag rows."""
    result = _run_stage(ctx, "importance")
    doc = result.artifact("importance")
    if doc["importance"] is None:
        click.echo(f"skipped: {doc['skipped']}")
    else:
        for name in doc["ranking"][:5]:
            click.echo(f"  {name}: {doc['importance'][name]:+.4f}")
    click.echo(f"artifact: {result.path('importance')}")


_EXPORT_CHOICES = ("all", "potential", "roc", "importance", "game-winners")


@main.command()
@click.option(
    "--which",
    type=click.Choice(_EXPORT_CHOICES),
    default="all",
    show_default=True,
    help="Which plot-ready tables to list.",
)
@click.pass_context
def export(ctx, which: str) -> None:
    """Write plot-ready CSV tables (potential curves, ROC, importance)."""
    result = _run_stage(ctx, "export")
    doc = result.artifact("export")
    plots = result.out_dir / "plots"

    def wanted(name: str) -> bool:
        if which == "all":
            return True
        if which == "potential":
            return name.startswith("potential_")
        return name == {"roc": "roc.csv", "importance": "importance.csv", "game-winners": "game_winners.csv"}[which]

    selected = [name for name in sorted(doc["files"]) if wanted(name)]
    for name in selected:
        click.echo(f"  {plots / name}")
    for note in doc["notes"]:
        if which == "all" or which.replace("-", "_") in note:
            click.echo(f"note: {note}")
    if not selected:
        click.echo("nothing to export for this selection")


@main.command()
@click.argument("dataset", required=False, type=click.Path(dir_okay=False))
@click.option(
    "--checksum",
    default=None,
    help="Expected sha256 of the dataset (also read from TURNPOINT_MCM_SHA256"
    " or a <file>.sha256 sidecar).",
)
@click.pass_context
def reproduce(ctx, dataset: str | None, checksum: str | None) -> None:
    """Rerun the published recipe against the reference dataset.

    DATASET is the point-by-point CSV; when omitted, the
    TURNPOINT_MCM_DATA environment variable is consulted. Exits with
    code 4 when the dataset is not available.
    """
    obj = ctx.obj
    try:
        doc = reproduce_paper(
            dataset,
            obj["out_dir"] or "runs/reproduce",
            seed=obj["seed"] if obj["seed"] is not None else 0,
            threads=obj["threads"],
            checksum=checksum,
        )
    except SkippedError as exc:
        click.echo(f"skipped: {exc}", err=True)
        sys.exit(EXIT_SKIPPED)
    except ConfigError as exc:
        _die(EXIT_CONFIG, exc)
    except (DataError, SchemaError, IntegrityError) as exc:
        _die(EXIT_DATA, exc)
    else:
        width = max(len(r["quantity"]) for r in doc["rows"])
        click.echo(f"{'quantity'.ljust(width)}  {'ours':>10}  {'reference':>10}  {'delta':>8}")
        for row in doc["rows"]:
            ours = "n/a" if row["ours"] is None else f"{row['ours']:.2f}"
            delta = "n/a" if row["delta"] is None else f"{row['delta']:+.2f}"
            click.echo(
                f"{row['quantity'].ljust(width)}  {ours:>10}  {row['reference']:>10}  {delta:>8}"
            )
        auc = doc["auc"]
        click.echo(
            f"train CV AUC {auc['train_cv']:.4f} (floor {auc['train_cv_floor']}),"
            f" test AUC {_fmt(auc['test'], 4)} (floor {auc['test_floor']})"
        )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option(
    "--model-dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Directory of extra model bundles to serve.",
)
@click.option(
    "--console-dir",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="Browser console build to mount at /console"
    " (also read from TURNPOINT_CONSOLE).",
)
def serve(host: str, port: int, model_dir: str | None, console_dir: str | None) -> None:
    """Run the live scoring service (HTTP API plus the browser console)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(model_dir=model_dir, console_dir=console_dir), host=host, port=port)


if __name__ == "__main__":
    main()
