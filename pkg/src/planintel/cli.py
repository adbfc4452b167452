"""Command line over the same store the service uses.

Every mutating subcommand takes --operator and writes audit events under that
identity, so a CLI session and an HTTP session are indistinguishable in the
log. --mock-provider swaps the remote model for scripted fixtures everywhere.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .audit import AuditLog
from .docmodel import BundleError, content_hash, load_bundle
from .evalharness import (
    generate_synthetic_corpus,
    make_fixtures,
    run_comparison,
    save_corpus,
    write_report,
)
from .pipeline import TASK_KINDS, TaskFailed, load_provider_paths, load_task_config
from .providers import MockProvider, RemoteProvider
from .redaction import CommitRejected, ScrubFailed, UnresolvableLocation
from .review import IllegalTransition, prioritize, transition
from .roi import compute_roi, load_scenario
from .service.runner import NothingToCommit, UnresolvedItems, commit_confirmed, execute_task
from .service.store import (
    DuplicateDocument,
    ServiceStore,
    UnknownDocument,
    UnknownItem,
    item_kind,
    review_item_payload,
)

_FRIENDLY = (
    BundleError,
    CommitRejected,
    DuplicateDocument,
    FileNotFoundError,
    IllegalTransition,
    NothingToCommit,
    ScrubFailed,
    TaskFailed,
    UnknownDocument,
    UnknownItem,
    UnresolvableLocation,
    UnresolvedItems,
    ValueError,
)


def friendly(fn):
    """Domain failures become exit-code-1 messages instead of tracebacks."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _FRIENDLY as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _store(ctx: click.Context) -> ServiceStore:
    return ServiceStore(ctx.obj["data_dir"])


def _provider(ctx: click.Context):
    fixtures = ctx.obj.get("mock_provider")
    if fixtures:
        return MockProvider(fixtures)
    return RemoteProvider()


def _configs() -> dict:
    paths = load_provider_paths()
    return {kind: load_task_config(kind, paths) for kind in TASK_KINDS}


@click.group()
@click.option(
    "--data-dir",
    default="planintel-data",
    show_default=True,
    envvar="PLANINTEL_DATA",
    help="Directory holding documents, review state, and the audit log.",
)
@click.option(
    "--mock-provider",
    "mock_provider",
    type=click.Path(file_okay=False),
    default=None,
    help="Fixtures directory; replay scripted provider responses instead of calling out.",
)
@click.pass_context
def main(ctx, data_dir, mock_provider):
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir
    ctx.obj["mock_provider"] = mock_provider


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, file_okay=False))
@click.option("--operator", required=True)
@click.pass_context
@friendly
def ingest(ctx, bundle_path, operator):
    """Load a bundle directory into the store."""
    store = _store(ctx)
    bundle = load_bundle(bundle_path)
    bundle.validate()
    store.save_document(bundle)
    digest = content_hash(bundle)
    store.audit.append(
        operator, "Ingested", {"doc_id": bundle.doc_id, "content_hash": digest, "pages": len(bundle.pages)}
    )
    click.echo(f"{bundle.doc_id}: {len(bundle.pages)} page(s), hash {digest}")


@main.command()
@click.option("--doc", "doc_id", required=True)
@click.option("--task", "task_kind", required=True, type=click.Choice(list(TASK_KINDS)))
@click.option("--operator", required=True)
@click.pass_context
@friendly
def run(ctx, doc_id, task_kind, operator):
    """Run one suggestion task against a document."""
    store = _store(ctx)
    store.audit.append(operator, "task_started", {"doc_id": doc_id, "task_kind": task_kind})
    summary = execute_task(store, _configs(), _provider(ctx), doc_id, task_kind)
    click.echo(json.dumps(summary, indent=2))


@main.group()
def review():
    """Inspect and act on the review queue."""


def _item_line(item) -> str:
    body = review_item_payload(item)
    if body["kind"] == "pii":
        p = body["payload"]
        desc = f"{p['category']:<10} {p['value']!r} verifier={p['verifier_status']}"
        conf = p["confidence"]
    else:
        p = body["payload"]
        desc = f"{p['field_name']:<10} {p['raw_value']!r} -> {p['value']!r} [{p['status']}]"
        conf = p["confidence"]
    return f"{body['item_id']:<28} {body['state']:<9} conf={conf:.2f} {desc}"


@review.command("list")
@click.option("--doc", "doc_id", required=True)
@click.pass_context
@friendly
def review_list(ctx, doc_id):
    """Print the queue in review priority order."""
    store = _store(ctx)
    if not store.has_document(doc_id):
        raise UnknownDocument(doc_id)
    items = store.items_for_doc(doc_id)
    if not items:
        click.echo("(queue empty)")
        return
    by_id = {item.item_id: item for item in items}
    for item_id in prioritize(items).item_ids:
        click.echo(_item_line(by_id[item_id]))


def _transition_command(ctx, item_id, action, operator, value=None):
    store = _store(ctx)
    item = store.get_item(item_id)
    with store.doc_lock(item.doc_id):
        item = store.get_item(item_id)
        updated = transition(item, action, operator, value, audit=store.audit)
        store.update_item(updated)
    click.echo(f"{item_id} -> {updated.state}")


@review.command()
@click.argument("item_id")
@click.option("--operator", required=True)
@click.pass_context
@friendly
def confirm(ctx, item_id, operator):
    _transition_command(ctx, item_id, "confirm", operator)


@review.command()
@click.argument("item_id")
@click.option("--operator", required=True)
@click.pass_context
@friendly
def reject(ctx, item_id, operator):
    _transition_command(ctx, item_id, "reject", operator)


@review.command()
@click.argument("item_id")
@click.argument("value")
@click.option("--operator", required=True)
@click.pass_context
@friendly
def edit(ctx, item_id, value, operator):
    _transition_command(ctx, item_id, "edit", operator, value)


@main.command()
@click.option("--doc", "doc_id", required=True)
@click.option("--operator", required=True)
@click.pass_context
@friendly
def commit(ctx, doc_id, operator):
    """Redact every Confirmed PII item and finalize the document."""
    store = _store(ctx)
    if not store.has_document(doc_id):
        raise UnknownDocument(doc_id)
    result = commit_confirmed(store, doc_id, operator)
    click.echo(f"committed {len(result.committed_items)} item(s), removed {len(result.removed_texts)} text run(s)")
    click.echo(f"final hash {result.final_hash}")


@main.group()
def audit():
    """Audit log operations."""


@audit.command("verify")
@click.pass_context
def audit_verify(ctx):
    """Re-hash the chain; exit nonzero naming the first bad record on tamper."""
    store = _store(ctx)
    report = store.audit.verify_chain()
    if report.ok:
        anchor = store.audit.head_anchor()
        head = "empty" if anchor is None else f"head seq {anchor[0]} hash {anchor[1][:16]}…"
        click.echo(f"audit chain OK: {report.checked} event(s), {head}")
        return
    for problem in report.problems:
        click.echo(problem, err=True)
    if report.truncated:
        click.echo("audit chain TRUNCATED against the recorded head anchor", err=True)
    else:
        click.echo(f"audit chain INVALID at seq {report.first_invalid_seq}", err=True)
    sys.exit(1)


@main.group()
def eval():
    """Evaluation harness."""


@eval.command("run")
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--n", "n_docs", default=50, show_default=True, type=int)
@click.option("--corruption", default=0.08, show_default=True, type=float, help="Fraction of documents whose scripted responses are degraded.")
@click.option("--out", "out_dir", default="eval-out", show_default=True, type=click.Path(file_okay=False))
@click.pass_context
@friendly
def eval_run(ctx, seed, n_docs, corruption, out_dir):
    """Score baseline vs. suggestion pipeline on a synthetic corpus."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundles, golds = generate_synthetic_corpus(seed=seed, n_docs=n_docs)
    save_corpus(out / "corpus", bundles, golds)
    fixtures = ctx.obj.get("mock_provider")
    if fixtures:
        corrupted: list[str] = []
    else:
        fixtures = out / "fixtures"
        corrupted = sorted(make_fixtures(fixtures, golds, corruption_rate=corruption, seed=seed))
    provider = MockProvider(fixtures)
    audit_log = AuditLog(out / "audit")
    report = run_comparison(bundles, golds, provider, _configs(), audit_log)
    manifest = {
        "seed": seed,
        "n_docs": n_docs,
        "corruption_rate": corruption,
        "corrupted_doc_ids": corrupted,
        "total_cost_micro": report.total_cost_micro,
    }
    paths = write_report(report, out, manifest=manifest)
    width = max(len(r.metric) for r in report.rows) + 2
    click.echo(f"{'metric':<{width}} {'baseline':>10} {'proposed':>10}")
    for row in report.rows:
        base = "n/a" if row.baseline is None else f"{row.baseline:.4f}"
        prop = "n/a" if row.proposed is None else f"{row.proposed:.4f}"
        click.echo(f"{row.metric:<{width}} {base:>10} {prop:>10}")
    click.echo(f"provider cost: {report.total_cost_micro} micro-dollars over {report.n_docs} document(s)")
    for name, path in sorted(paths.items()):
        click.echo(f"{name}: {path}")


@main.command()
@click.option("--scenario", required=True, help="Scenario name under the packaged data, or a path to a JSON file.")
@friendly
def roi(scenario):
    """Hours, FTE, benefit, and payback for a deployment scenario."""
    outputs = compute_roi(load_scenario(scenario))
    for key, value in outputs.to_payload().items():
        click.echo(f"{key}: {value}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--direct", is_flag=True, help="Run tasks inline instead of queueing them.")
@click.pass_context
@friendly
def serve(ctx, host, port, direct):
    """Start the HTTP service over this data directory."""
    import uvicorn

    from .service import create_app

    app = create_app(ctx.obj["data_dir"], _provider(ctx), direct_mode=direct)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
