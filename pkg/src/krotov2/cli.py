"""Thin-client command line interface.

Subcommands ``run``, ``scan`` and ``validate`` speak HTTP to the service:
against a remote server when ``--server`` is given, otherwise against an
in-process instance through an ASGI transport (no separate server needed
for batch work).  Artifacts returned by the service are written under
``--out-dir``.  ``serve`` starts the service with uvicorn.

Exit codes: 0 success, 1 error (schema violation, divergence, transport),
2 monotonicity violation under --strict-monotonic.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx
import yaml

from . import __version__


def _load_config_dict(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".json"):
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} does not contain a mapping")
    return data


def _apply_overrides(config: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    if getattr(args, "max_iter", None) is not None:
        config.setdefault("stopping", {})
        config["stopping"]["max_iter"] = args.max_iter
    return config


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)

    async def _inprocess():
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://krotov2.internal",
                                     timeout=None) as client:
            return await client.post(path, json=payload)

    return asyncio.run(_inprocess())


def _print_errors(payload: dict) -> None:
    for line in payload.get("errors", ["unknown error"]):
        print(f"error: {line}", file=sys.stderr)


def _write_artifacts(out_dir: Path, artifacts: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "convergence.csv").write_text(artifacts["convergence_csv"])
    (out_dir / "optimized_field.txt").write_text(artifacts["field"])
    (out_dir / "overlaps.txt").write_text(artifacts["overlaps"])


def _cmd_validate(args) -> int:
    config = _apply_overrides(_load_config_dict(args.config), args)
    response = _post(args.server, "/validate", {"config": config})
    payload = response.json()
    if not payload.get("valid", False):
        _print_errors(payload)
        return 1
    print(json.dumps(payload["summary"], indent=2, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    config = _apply_overrides(_load_config_dict(args.config), args)
    if args.dry_run:
        return _cmd_validate(args)
    response = _post(args.server, "/runs",
                     {"config": config,
                      "strict_monotonic": args.strict_monotonic})
    payload = response.json()
    if response.status_code != 200:
        _print_errors(payload)
        return 1
    _write_artifacts(Path(args.out_dir), payload["artifacts"])
    summary = payload["summary"]
    print(f"status: {summary['status']}  iterations: {summary['iterations']}  "
          f"J: {summary['final_j']:.10g}  J_T: {summary['final_j_t']:.10g}  "
          f"violations: {summary['violations']}")
    for warning in payload.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)
    print(f"artifacts written to {args.out_dir}")
    return payload["exit_code"]


def _parse_values(raw: str) -> list[float]:
    raw = raw.strip()
    if not raw:
        return []
    return [float(tok) for tok in raw.split(",") if tok.strip() != ""]


def _cmd_scan(args) -> int:
    config = _apply_overrides(_load_config_dict(args.config), args)
    values = _parse_values(args.values)
    if not values:
        print("warning: empty value list, nothing to scan", file=sys.stderr)
        return 0
    response = _post(args.server, "/scans",
                     {"config": config, "parameter": args.parameter,
                      "values": values,
                      "strict_monotonic": args.strict_monotonic})
    payload = response.json()
    if response.status_code != 200:
        _print_errors(payload)
        return 1
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.csv").write_text(payload["summary_csv"])
    for entry in payload["entries"]:
        sub = out_dir / f"{args.parameter}={entry['value']:g}"
        _write_artifacts(sub, entry["artifacts"])
    print(f"{len(payload['entries'])} runs written to {args.out_dir}")
    return payload["exit_code"]


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krotov2",
        description="Monotonically convergent quantum control runs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_outputs=True):
        p.add_argument("--config", required=True, help="YAML/JSON run config")
        p.add_argument("--server", default=None,
                       help="base URL of a running service; default runs "
                            "in-process")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if with_outputs:
            p.add_argument("--out-dir", default="krotov2-out",
                           help="directory for artifacts")
            p.add_argument("--strict-monotonic", action="store_true",
                           help="exit 2 if any monotonicity violation was "
                                "recorded")

    run_p = sub.add_parser("run", help="run one optimization")
    add_common(run_p)
    run_p.add_argument("--max-iter", type=int, default=None,
                       help="override stopping.max_iter")
    run_p.add_argument("--dry-run", action="store_true",
                       help="validate and print the resolved problem summary")
    run_p.set_defaults(func=_cmd_run)

    scan_p = sub.add_parser("scan", help="run once per parameter value")
    add_common(scan_p)
    scan_p.add_argument("--parameter", required=True,
                        help="config field to vary (e.g. lambda_a, a_bar)")
    scan_p.add_argument("--values", required=True,
                        help="comma-separated numeric values")
    scan_p.add_argument("--max-iter", type=int, default=None,
                        help="override stopping.max_iter")
    scan_p.set_defaults(func=_cmd_scan)

    val_p = sub.add_parser("validate", help="validate a config file")
    add_common(val_p, with_outputs=False)
    val_p.set_defaults(func=_cmd_validate)

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, httpx.HTTPError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
