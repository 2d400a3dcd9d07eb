"""Command-line interface.

    cordner [--db PATH] ingest <dir> [--format cord19|pubtator]
    cordner [--db PATH] tag --config <file>
    cordner [--db PATH] export --scope abstracts|fulltext --format json|pubtator --out <path>
    cordner [--db PATH] stats [--json]
    cordner [--db PATH] validate <dump.json>
"""
import argparse
import json
import logging
import os
import sys

from . import __version__
from .export import compute_stats, export_json, export_pubtator, validate_dump_file
from .ingest import ingest_collection, ingest_pubtator
from .orchestrator import ConfigError, PipelineFailed, load_config, run_pipeline
from .store import StorageFailure, open_store

DB_ENV = "CORDNER_DB"

logger = logging.getLogger("cordner")


def argparser():
    ap = argparse.ArgumentParser(prog="cordner",
                                 description="Biomedical entity-mention pipeline.")
    ap.add_argument("--db", default=os.environ.get(DB_ENV, "cordner.sqlite"),
                    help=f"store file (default: ${DB_ENV} or ./cordner.sqlite)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load documents into the store")
    p.add_argument("path", help="directory of CORD-19 JSON parses, or PubTator file/directory")
    p.add_argument("--format", choices=("cord19", "pubtator"), default="cord19")
    p.add_argument("--allow-missing-body", action="store_true",
                   help="ingest CORD-19 parses without body_text instead of skipping them")

    p = sub.add_parser("tag", help="run the configured taggers over the store")
    p.add_argument("--config", required=True)

    p = sub.add_parser("export", help="write a mention dump")
    p.add_argument("--scope", choices=("abstracts", "fulltext"), required=True)
    p.add_argument("--format", choices=("json", "pubtator"), default="json")
    p.add_argument("--out", required=True, help="JSON file, or directory for PubTator output")
    p.add_argument("--docs-per-file", type=int, default=1000)

    p = sub.add_parser("stats", help="mention counts per scope and entity type")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("validate", help="check a JSON dump against the store")
    p.add_argument("dump")
    return ap


def _ingest(store, args):
    if args.format == "pubtator":
        report = ingest_pubtator(args.path, store)
    else:
        if not os.path.isdir(args.path):
            raise NotADirectoryError(f"{args.path} is not a directory")
        report = ingest_collection(args.path, store, require_body=not args.allow_missing_body)
    for name, error in report.errors:
        print(f"{name}: {error}", file=sys.stderr)
    print(json.dumps(report.as_dict()))
    return 0


def _tag(store, args):
    config = load_config(args.config)
    try:
        report = run_pipeline(config, store)
    except PipelineFailed as exc:
        print(json.dumps(exc.report.as_dict(), indent=2))
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(report.as_dict(), indent=2))
    return 0


def _export(store, args):
    if args.format == "json":
        n = export_json(store, args.scope, args.out)
        print(f"wrote {n} mentions to {args.out}")
    else:
        n = export_pubtator(store, args.scope, args.out, args.docs_per_file)
        print(f"wrote {n} files to {args.out}")
    return 0


def _stats(store, args):
    table = compute_stats(store)
    print(json.dumps(table.as_dict(), indent=2) if args.json else table.render())
    return 0


def _validate(store, args):
    result = validate_dump_file(store, args.dump)
    for error in result.errors:
        print(error, file=sys.stderr)
    print(f"{result.records} records, {len(result.errors)} errors")
    return 0 if result.ok else 1


COMMANDS = {"ingest": _ingest, "tag": _tag, "export": _export, "stats": _stats,
            "validate": _validate}


def main(argv=None):
    args = argparser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open_store(args.db) as store:
            return COMMANDS[args.command](store, args)
    except (ConfigError, StorageFailure, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
