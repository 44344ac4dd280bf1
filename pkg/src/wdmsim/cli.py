"""Command-line client for the wdmsim service.

Every subcommand builds a typed request and sends it to the service: by
default an in-process instance (no server needed), or a remote one when
``--server URL`` is given. Config files live client-side and are parsed here;
sweep outputs are written where the service runs.

Exit codes: 0 success, 1 usage error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import sys

import httpx

from .experiment import parse_config

USAGE_EXIT = 1
INVARIANT_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


class CliError(Exception):
    def __init__(self, message, code=USAGE_EXIT):
        super().__init__(message)
        self.code = code


def make_client(server: str | None):
    """HTTP client against a remote server, or the in-process app."""
    if server:
        return httpx.Client(base_url=server, timeout=3600.0)
    import warnings

    with warnings.catch_warnings():
        # starlette warns about its httpx-based TestClient; harmless here
        warnings.simplefilter("ignore", Warning)
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def call(client, method: str, path: str, **kwargs):
    response = getattr(client, method)(path, **kwargs)
    if response.status_code >= 400:
        try:
            payload = response.json()
        except ValueError:
            payload = {"detail": response.text}
        detail = payload.get("detail", "request failed")
        code = INVARIANT_EXIT if payload.get("kind") == "invariant" else USAGE_EXIT
        if response.status_code == 422:
            detail = f"invalid request: {detail}"
            code = USAGE_EXIT
        raise CliError(f"{path}: {detail}", code)
    return response.json()


def read_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}")
    except ValueError as exc:
        raise CliError(f"bad config {path}: {exc}")


def _settings_from_config(cfg: dict[str, str]) -> dict:
    """Map flat config keys onto the service's nested request fields."""
    traffic = {}
    if "traffic.kind" in cfg:
        traffic["kind"] = cfg["traffic.kind"]
    if "traffic.load_erlang" in cfg:
        traffic["load_erlang"] = float(cfg["traffic.load_erlang"])
    if "traffic.load_mode" in cfg:
        traffic["load_mode"] = cfg["traffic.load_mode"]
    if "traffic.mean_holding_s" in cfg:
        traffic["mean_holding_s"] = float(cfg["traffic.mean_holding_s"])
    if "traffic.horizon_s" in cfg:
        traffic["horizon_s"] = float(cfg["traffic.horizon_s"])
    conv = {}
    if "conv.factor" in cfg:
        conv["factor"] = float(cfg["conv.factor"])
    if "conv.strategy" in cfg:
        conv["strategy"] = cfg["conv.strategy"]
    if "conv.degree" in cfg:
        conv["degree"] = cfg["conv.degree"]
    if "conv.range" in cfg:
        conv["range"] = int(cfg["conv.range"])
    rwa = {}
    if "rwa.routing" in cfg:
        rwa["routing"] = cfg["rwa.routing"]
    if "rwa.k" in cfg:
        rwa["k"] = int(cfg["rwa.k"])
    if "rwa.assignment" in cfg:
        rwa["assignment"] = cfg["rwa.assignment"]
    out = {}
    if traffic:
        out["traffic"] = traffic
    if conv:
        out["conv"] = conv
    if rwa:
        out["rwa"] = rwa
    if "sim.warmup_frac" in cfg:
        out["warmup_frac"] = float(cfg["sim.warmup_frac"])
    return out


def _ints(text: str) -> list[int]:
    return [int(v.strip()) for v in text.split(",") if v.strip()]


def cmd_gen_topology(args) -> int:
    with make_client(args.server) as client:
        body = {"nodes": args.nodes, "prob": args.prob,
                "wavelengths": args.wavelengths, "seed": args.seed}
        data = call(client, "post", "/topology/generate", json=body)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data["text"])
        print(f"wrote {args.out}: {data['nodes']} nodes, "
              f"{len(data['links'])} links ({data['repaired_edges']} repaired)")
    else:
        sys.stdout.write(data["text"])
    return 0


def cmd_erlang_b(args) -> int:
    with make_client(args.server) as client:
        data = call(client, "get", "/erlang-b",
                    params={"load": args.load, "servers": args.servers})
    print(repr(data["blocking"]))
    return 0


def cmd_run(args) -> int:
    cfg = read_config(args.config)
    body = _settings_from_config(cfg)
    if "topology.nodes" in cfg:
        body["nodes"] = int(cfg["topology.nodes"])
    if "topology.prob" in cfg:
        body["prob"] = float(cfg["topology.prob"])
    if "topology.wavelengths" in cfg:
        body["wavelengths"] = int(cfg["topology.wavelengths"])
    if "topology.seed" in cfg:
        body["topology_seed"] = int(cfg["topology.seed"])
    if "sim.seeds" in cfg:
        body["seeds"] = _ints(cfg["sim.seeds"])
    if args.nodes is not None:
        body["nodes"] = args.nodes
    if args.prob is not None:
        body["prob"] = args.prob
    if args.wavelengths is not None:
        body["wavelengths"] = args.wavelengths
    if args.seeds is not None:
        body["seeds"] = _ints(args.seeds)
    if args.drain:
        body["drain"] = True
    if args.trace_dir:
        body["trace_dir"] = args.trace_dir
    if "nodes" not in body or "prob" not in body:
        raise CliError("run needs topology.nodes and topology.prob "
                       "(config file or --nodes/--prob)")
    if "seeds" not in body:
        raise CliError("run needs sim.seeds (config file or --seeds)")
    with make_client(args.server) as client:
        data = call(client, "post", "/run", json=body)
    lines = ["seed,offered,blocked,bp,utilization"]
    lines += [f"{r['seed']},{r['offered']},{r['blocked']},{r['bp']!r},"
              f"{r['utilization']!r}" for r in data["rows"]]
    csv_text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    print(f"mean_bp={data['mean_bp']!r} stderr_bp={data['stderr_bp']!r} "
          f"mean_utilization={data['mean_utilization']!r} "
          f"stderr_utilization={data['stderr_utilization']!r}")
    return 0


def cmd_sweep(args) -> int:
    cfg = read_config(args.config)
    body = _settings_from_config(cfg)
    if "sweep.node_counts" in cfg:
        body["node_counts"] = _ints(cfg["sweep.node_counts"])
    if "sweep.wavelength_counts" in cfg:
        body["wavelength_counts"] = _ints(cfg["sweep.wavelength_counts"])
    if "sweep.conversion_factors" in cfg:
        body["conversion_factors"] = [
            float(v) for v in cfg["sweep.conversion_factors"].split(",") if v.strip()]
    if "sweep.traffic_kinds" in cfg:
        body["traffic_kinds"] = [
            v.strip() for v in cfg["sweep.traffic_kinds"].split(",") if v.strip()]
    if "sweep.connection_probability" in cfg:
        body["connection_probability"] = float(cfg["sweep.connection_probability"])
    if "sweep.seeds" in cfg:
        body["seeds"] = _ints(cfg["sweep.seeds"])
    if args.out:
        body["out_dir"] = args.out
    if args.jobs:
        body["jobs"] = args.jobs
    with make_client(args.server) as client:
        data = call(client, "post", "/sweep", json=body)
    print(f"{data['row_count']} result rows, {len(data['aggregates'])} cells")
    for path in data["files"]:
        print(f"wrote {path}")
    if not data["files"]:
        for agg in data["aggregates"]:
            print(f"n={agg['n']} w={agg['w']} q={agg['q']} kind={agg['kind']} "
                  f"mean_bp={agg['mean_bp']!r} "
                  f"mean_utilization={agg['mean_utilization']!r}")
    return 0


def cmd_knee(args) -> int:
    try:
        with open(args.aggregate, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read aggregate {args.aggregate}: {exc}")
    with make_client(args.server) as client:
        data = call(client, "post", "/knee",
                    json={"aggregate_csv": text, "threshold": args.threshold})
    print("n,w,kind,knee")
    for row in data["knees"]:
        knee = "NONE" if row["knee"] is None else repr(row["knee"])
        print(f"{row['n']},{row['w']},{row['kind']},{knee}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("wdmsim.service:app", host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="wdmsim",
                     description="WDM network simulator service client")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument("--server", default=None,
                       help="service URL (default: run in-process)")

    p = sub.add_parser("gen-topology", help="generate a random topology file")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--prob", type=float, required=True)
    p.add_argument("--wavelengths", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    add_server(p)
    p.set_defaults(func=cmd_gen_topology)

    p = sub.add_parser("erlang-b", help="analytic M/M/c/c blocking probability")
    p.add_argument("--load", type=float, required=True)
    p.add_argument("--servers", type=int, required=True)
    add_server(p)
    p.set_defaults(func=cmd_erlang_b)

    p = sub.add_parser("run", help="replicated single-cell simulation")
    p.add_argument("--config", default=None, help="flat key = value file")
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--prob", type=float, default=None)
    p.add_argument("--wavelengths", type=int, default=None)
    p.add_argument("--seeds", default=None, help="comma-separated seed list")
    p.add_argument("--out", default=None, help="replication CSV output")
    p.add_argument("--drain", action="store_true",
                   help="validate a fully drained state after the run")
    p.add_argument("--trace-dir", default=None,
                   help="write per-seed decision trace CSVs here")
    add_server(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="full parameter-grid sweep")
    p.add_argument("--config", default=None, help="flat key = value file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel (n, seed) blocks")
    add_server(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("knee", help="diminishing-returns analysis of an aggregate")
    p.add_argument("--aggregate", required=True, help="aggregate.csv path")
    p.add_argument("--threshold", type=float, default=0.05)
    add_server(p)
    p.set_defaults(func=cmd_knee)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"wdmsim: {exc}", file=sys.stderr)
        return exc.code
    except httpx.HTTPError as exc:
        print(f"wdmsim: transport error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
