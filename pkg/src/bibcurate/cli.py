"""Command line entry point.

Exit codes: 0 success, 1 unreadable input or bad usage, 2 some rows quarantined.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .curator import QUARANTINED
from .ids import ExistenceCache, HttpResolver, OfflineResolver, make_id, verify_existence
from .provenance import StoreFiles, dump_nquads, load_nquads
from .rdf import to_jsonld
from .service import LookupService, QueryError, Workspace, compute_stats, load_config, make_server
from .table import StructuralError, read_rows, write_curated_csv

EXIT_OK, EXIT_INPUT, EXIT_QUARANTINE = 0, 1, 2


def _clock(args):
    if getattr(args, "now", None):
        fixed = datetime.fromisoformat(args.now)
        if fixed.tzinfo is None:
            fixed = fixed.replace(tzinfo=timezone.utc)
        return lambda: fixed
    return lambda: datetime.now(timezone.utc)


def _workspace(args) -> Workspace:
    return Workspace(args.store, load_config(args.config), clock=_clock(args))


def cmd_curate(args) -> int:
    try:
        data = Path(args.input).read_bytes()
        diagnostics = []
        rows = read_rows(data, diagnostics)
    except (OSError, UnicodeDecodeError, StructuralError) as exc:
        print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    with StoreFiles(args.store).lock():
        ws = _workspace(args)
        entities, more = ws.curator.curate_batch(rows)
        diagnostics += more
        ws.save()
    output = write_curated_csv(entities, include_omids=not args.no_omids)
    if args.output:
        Path(args.output).write_bytes(output)
    else:
        sys.stdout.buffer.write(output)
    lines = "".join(f"{d}\n" for d in diagnostics)
    if args.diagnostics:
        Path(args.diagnostics).write_text(lines, encoding="utf-8")
    elif lines:
        sys.stderr.write(lines)
    return EXIT_QUARANTINE if any(d.branch == QUARANTINED for d in diagnostics) else EXIT_OK


def cmd_stats(args) -> int:
    ws = _workspace(args)
    report = compute_stats(ws.curator.records, top=args.top)
    if args.json:
        print(json.dumps(report.as_dict(), indent=2, ensure_ascii=False))
    else:
        sys.stdout.write(report.render())
    return EXIT_OK


def cmd_lookup(args) -> int:
    service = LookupService(_workspace(args).curator)
    try:
        rows = service.search(args.query) if args.query else service.lookup(args.ids)
    except QueryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(rows, indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_serve(args) -> int:
    server = make_server(LookupService(_workspace(args).curator), args.host, args.port)
    print(f"serving on http://{args.host}:{server.server_address[1]}/api/v1/", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def cmd_compact(args) -> int:
    with StoreFiles(args.store).lock():
        _workspace(args).compact()
    return EXIT_OK


def cmd_verify_ids(args) -> int:
    config = load_config(args.config)
    online = args.online or not config.offline
    client = HttpResolver(config.resolver_urls) if online else OfflineResolver()
    cache = ExistenceCache(Path(args.store) / "existence.csv") if args.store else None
    bad = False
    for token in args.ids:
        scheme, sep, value = token.partition(":")
        if not sep:
            print(f"{token}\tmalformed")
            bad = True
            continue
        try:
            ext = make_id(scheme, value)
        except ValueError as exc:
            print(f"{token}\tmalformed\t{exc}")
            bad = True
            continue
        status = verify_existence(ext.scheme, ext.value, client, cache) if ext.syntax_valid else "-"
        print(f"{ext}\t{'valid' if ext.syntax_valid else 'invalid'}\t{status}")
        bad = bad or not ext.syntax_valid
    if cache is not None:
        cache.save()
    return EXIT_INPUT if bad else EXIT_OK


def cmd_export(args) -> int:
    ws = _workspace(args)
    if args.format == "jsonld":
        payload = json.dumps(to_jsonld(ws.prov.store.quads()), indent=1, ensure_ascii=False).encode()
    else:
        payload = dump_nquads(ws.prov.store)
    if args.output:
        Path(args.output).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
    return EXIT_OK


def cmd_import(args) -> int:
    try:
        store = load_nquads(Path(args.dump).read_bytes())
    except (OSError, ValueError) as exc:
        print(f"error: cannot read {args.dump}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    files = StoreFiles(args.store)
    with files.lock():
        if any(files.root.glob("data/*.nq")) or (files.wal.exists() and files.wal.stat().st_size):
            print(f"error: {args.store} is not empty", file=sys.stderr)
            return EXIT_INPUT
        files.compact(store)
        ws = _workspace(args)
        ws.index.save(files.index_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bibcurate", description="Bibliographic metadata curation.")
    parser.add_argument("--config", help="key=value configuration file (default: $BIBCURATE_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_store(p):
        p.add_argument("--store", required=True, help="store directory")
        p.add_argument("--now", help=argparse.SUPPRESS)
        return p

    p = with_store(sub.add_parser("curate", help="curate an eleven-column CSV into the store"))
    p.add_argument("input")
    p.add_argument("-o", "--output", help="curated CSV (default: stdout)")
    p.add_argument("--diagnostics", help="write diagnostics here instead of stderr")
    p.add_argument("--no-omids", action="store_true", help="leave OMIDs out of the curated CSV")
    p.set_defaults(func=cmd_curate)

    p = with_store(sub.add_parser("stats", help="print store statistics"))
    p.add_argument("--json", action="store_true")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_stats)

    p = with_store(sub.add_parser("lookup", help="rows for ids, or for a field query"))
    p.add_argument("ids", nargs="*")
    p.add_argument("-q", "--query", help="field query, e.g. title=x&venue=y||id=doi:z")
    p.set_defaults(func=cmd_lookup)

    p = with_store(sub.add_parser("serve", help="run the read-only HTTP API"))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    p = with_store(sub.add_parser("compact", help="fold the write-ahead log into the base files"))
    p.set_defaults(func=cmd_compact)

    p = sub.add_parser("verify-ids", help="check identifier syntax (and existence with --online)")
    p.add_argument("ids", nargs="+")
    p.add_argument("--online", action="store_true")
    p.add_argument("--store", help="store directory whose existence cache to use")
    p.set_defaults(func=cmd_verify_ids)

    p = with_store(sub.add_parser("export", help="dump the store"))
    p.add_argument("--format", choices=("nquads", "jsonld"), default="nquads")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export)

    p = with_store(sub.add_parser("import", help="load an N-Quads dump into an empty store"))
    p.add_argument("dump")
    p.set_defaults(func=cmd_import)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
