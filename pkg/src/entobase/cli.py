"""Operator CLI: serve, import, evaluate, export.

Talks straight to the store (no running service needed); a store held by a
live service is refused for writing. Exit codes are a stable scripting
contract: 0 success, 1 validation failure, 2 I/O failure.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click

from . import demography
from .backends import backend_from_config
from .classifier import evaluate_topk
from .config import AppConfig, load_config
from .errors import EntobaseError, StoreLocked, TaxonomyViolation
from .images import decode_image
from .platform import Platform
from .store import Store
from .taxonomy import Rank, load_taxonomy_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

MANIFEST_HEADER = ["image_path", "species_taxon_id", "lat", "lon", "captured_at"]


class Ctx:
    def __init__(self, config: AppConfig, verbose: bool):
        self.config = config
        self.verbose = verbose

    def open_platform(self, read_only: bool = False) -> Platform:
        store = Store(
            self.config.storage_root,
            read_only=read_only,
            snapshot_every=self.config.snapshot_every,
        )
        return Platform(store, self.config)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file; ENTOBASE_* env vars override it.")
@click.option("--store", "store_path", type=click.Path(), default=None,
              help="Storage root (overrides config).")
@click.option("--verbose", is_flag=True, default=False)
@click.pass_context
def main(ctx, config_path, store_path, verbose):
    """entobase operator tooling."""
    try:
        config = load_config(config_path)
    except (OSError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    if store_path:
        config.storage_root = store_path
    ctx.obj = Ctx(config, verbose)


def _fail(exc: Exception, exit_code: int):
    click.echo(f"error: {exc}", err=True)
    sys.exit(exit_code)


@main.command()
@click.pass_obj
def serve(ctx: Ctx):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        platform = ctx.open_platform()
    except StoreLocked as exc:
        _fail(exc, EXIT_IO)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    app = create_app(platform)
    click.echo(f"listening on {ctx.config.listen_host}:{ctx.config.listen_port}")
    try:
        uvicorn.run(app, host=ctx.config.listen_host, port=ctx.config.listen_port,
                    log_level="info" if ctx.verbose else "warning")
    finally:
        platform.close()


@main.command("import-taxonomy")
@click.argument("csv_path", type=click.Path())
@click.pass_obj
def import_taxonomy(ctx: Ctx, csv_path):
    """Validate and install a taxonomy table."""
    try:
        text = Path(csv_path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(exc, EXIT_IO)
    # Validate before opening the store so a bad file never takes the lock.
    try:
        load_taxonomy_csv(text)
    except TaxonomyViolation as exc:
        for violation in exc.violations:
            click.echo(f"violation: {violation}", err=True)
        sys.exit(EXIT_VALIDATION)

    try:
        store = Store(ctx.config.storage_root, snapshot_every=ctx.config.snapshot_every)
    except StoreLocked as exc:
        _fail(exc, EXIT_IO)
    fresh = store.state.taxonomy_ref is None
    if fresh:
        # A fresh store bootstraps straight from the file being imported.
        ctx.config.taxonomy_csv = csv_path
    try:
        platform = Platform(store, ctx.config)
        if not fresh:
            platform.import_taxonomy(text)
        taxonomy = platform.taxonomy
        click.echo(
            f"taxonomy version {taxonomy.version}: "
            f"{len(taxonomy.species_ids)} species, {len(taxonomy.nodes) - 1} taxa"
        )
        platform.close()
    except TaxonomyViolation as exc:
        store.close()
        for violation in exc.violations:
            click.echo(f"violation: {violation}", err=True)
        sys.exit(EXIT_VALIDATION)


@main.command("import-dataset")
@click.argument("manifest", type=click.Path(exists=True))
@click.pass_obj
def import_dataset(ctx: Ctx, manifest):
    """Import a labeled dataset manifest (CSV: image_path,species_taxon_id,lat,lon,captured_at)."""
    manifest_path = Path(manifest)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != MANIFEST_HEADER:
                click.echo(f"bad manifest header: {reader.fieldnames}", err=True)
                sys.exit(EXIT_VALIDATION)
            rows = list(reader)
    except OSError as exc:
        _fail(exc, EXIT_IO)

    try:
        platform = ctx.open_platform()
    except StoreLocked as exc:
        _fail(exc, EXIT_IO)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    try:
        report = platform.import_labeled_dataset(rows, base_dir=manifest_path.parent)
    finally:
        platform.close()

    click.echo(f"accepted {report['accepted']}")
    click.echo(f"skipped {report['skipped']}")
    click.echo(f"failed {report['failed']}")
    if ctx.verbose:
        for row in report["rows"]:
            click.echo(f"  {row}")
    if report["failed"]:
        click.echo("completed with warnings (failed rows listed in report)", err=True)
        for row in report["rows"]:
            if row["outcome"] == "failed":
                click.echo(f"  row {row['row']}: {row['error']}", err=True)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("-k", "top_k", type=int, default=5, show_default=True)
@click.pass_obj
def evaluate(ctx: Ctx, manifest, top_k):
    """Top-k accuracy of the configured backend on a labeled manifest."""
    from .classifier import classify_image

    manifest_path = Path(manifest)
    try:
        platform = ctx.open_platform(read_only=True)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    taxonomy = platform.taxonomy
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
        items = []
        for row in rows:
            species = row["species_taxon_id"].strip()
            node = taxonomy.nodes.get(species)
            if node is None or node.rank != Rank.SPECIES:
                click.echo(f"label {species!r} is not a species", err=True)
                sys.exit(EXIT_VALIDATION)
            items.append((decode_image((manifest_path.parent / row["image_path"]).read_bytes()), species))
    except OSError as exc:
        _fail(exc, EXIT_IO)
    if not items:
        click.echo("empty manifest", err=True)
        sys.exit(EXIT_VALIDATION)

    backend = backend_from_config(ctx.config.backend, taxonomy)
    click.echo(f"{len(items)} labeled images")
    for k in range(1, top_k + 1):
        click.echo(f"top-{k} accuracy: {evaluate_topk(backend, items, k):.4f}")

    per_rank: dict[str, list[int]] = {}
    hits = 0
    for img, truth in items:
        _, result = classify_image(img, backend, taxonomy, ctx.config.thresholds)
        bucket = per_rank.setdefault(result.chosen_rank.label, [0, 0])
        bucket[1] += 1
        if taxonomy.is_ancestor_or_self(result.chosen, truth):
            bucket[0] += 1
            hits += 1
    click.echo(f"hierarchical accuracy: {hits / len(items):.4f}")
    for rank_label in ("species", "genus", "family", "order", "root"):
        if rank_label in per_rank:
            correct, total = per_rank[rank_label]
            click.echo(f"  chosen at {rank_label}: {total} items, {correct / total:.4f} correct")
    platform.close()


@main.command("export-demography")
@click.option("--taxon", required=True)
@click.option("--cell-size", type=float, default=None)
@click.option("--out", type=click.Path(), default="-", help="Output CSV path (default stdout).")
@click.pass_obj
def export_demography(ctx: Ctx, taxon, cell_size, out):
    """Per-cell, per-month occurrence counts and relative frequencies."""
    try:
        platform = ctx.open_platform(read_only=True)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    try:
        rows = platform.demography_report(taxon, cell_size)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    text = demography.demography_csv(rows)
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(rows)} rows to {out}", err=True)
    platform.close()


@main.command("export-novelty")
@click.option("--cell-size", type=float, default=None)
@click.option("--out", type=click.Path(), default="-")
@click.pass_obj
def export_novelty(ctx: Ctx, cell_size, out):
    """First-occurrence events per species and grid cell."""
    try:
        platform = ctx.open_platform(read_only=True)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    events = platform.novelty_report(cell_size)
    text = demography.novelty_csv(events)
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(events)} events to {out}", err=True)
    platform.close()


@main.command("user-add")
@click.argument("user_id")
@click.option("--token", required=True)
@click.option("--expert", is_flag=True, default=False)
@click.pass_obj
def user_add(ctx: Ctx, user_id, token, expert):
    """Register a user (bearer token auth; --expert grants resolution rights)."""
    try:
        platform = ctx.open_platform()
    except StoreLocked as exc:
        _fail(exc, EXIT_IO)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    platform.add_user(user_id, token, expert)
    click.echo(f"user {user_id} added (expert={expert})")
    platform.close()


@main.command("user-list")
@click.pass_obj
def user_list(ctx: Ctx):
    """List registered users."""
    try:
        platform = ctx.open_platform(read_only=True)
    except EntobaseError as exc:
        _fail(exc, EXIT_VALIDATION)
    for user_id in sorted(platform.store.state.users):
        user = platform.store.state.users[user_id]
        click.echo(f"{user_id}\texpert={user['is_expert']}")
    platform.close()


if __name__ == "__main__":
    main()
