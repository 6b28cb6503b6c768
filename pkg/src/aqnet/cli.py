"""Command-line entry point: serve the ingest store, run scenarios, and
produce analysis artifacts.

Exit codes are fixed for scripting: 0 success, 1 usage error, 2 runtime/IO
failure, 3 insufficient data.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import cleaning
from .client import ClientError, DuplicateRegistration, IngestClient, descriptor_from_info
from .correlation import DEFAULT_MIN_PAIRS, correlation_matrix
from .errors import InsufficientDataError
from .interpolation import BoundingBox, idw_grid
from .model import AveragingWindow, Parameter, haversine_distance
from .quantiles import qq_pairs
from .scenario import ScenarioError, load_scenario, parse_timestamp
from .server import IngestServer
from .simulator import ControlServer, HttpUploader, Simulator
from .store import ChannelStore, format_timestamp

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_NO_DATA = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="aqnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the ingest/feed server")
    serve.add_argument("--port", type=int, default=int(os.environ.get("AQNET_PORT", "8100")))
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--data-dir", default=os.environ.get("AQNET_DATA", "./aqnet-data"))
    serve.add_argument("--admin-key", default=os.environ.get("AQNET_ADMIN_KEY", "admin"))
    serve.add_argument(
        "--flush-every", type=int, default=1, help="flush the log every N accepted updates"
    )

    simulate = sub.add_parser("simulate", help="run a scenario against a server")
    simulate.add_argument("--scenario", required=True, help="scenario file (JSON)")
    simulate.add_argument("--server", default=None, help="override the scenario's server_url")
    simulate.add_argument("--speedup", type=float, default=None, help="override scenario speedup")
    simulate.add_argument("--admin-key", default=os.environ.get("AQNET_ADMIN_KEY", "admin"))
    simulate.add_argument(
        "--control-port",
        type=int,
        default=None,
        help="serve the live control API (events, outages, status) on this port",
    )

    analyze = sub.add_parser("analyze", help="clean stored data and run an analysis")
    kinds = analyze.add_subparsers(dest="kind", required=True)

    def common(p: argparse.ArgumentParser, default_window: str) -> None:
        p.add_argument("--server", default="http://127.0.0.1:8100")
        p.add_argument("--channels", default="all", help="comma-separated channel ids, or 'all'")
        p.add_argument("--parameter", default="pm25", choices=[x.value for x in Parameter])
        p.add_argument("--window", default=default_window, help="averaging window: 5m, 1h, 1d or seconds")
        p.add_argument("--start", default=None, help="ISO-8601 or epoch seconds")
        p.add_argument("--end", default=None, help="ISO-8601 or epoch seconds")
        p.add_argument("--eps", type=float, default=0.5, help="outlier neighborhood radius (z-space)")
        p.add_argument("--min-pts", type=int, default=8, help="density threshold incl. self")
        p.add_argument("--batch-seconds", type=int, default=cleaning.DEFAULT_BATCH_SECONDS)
        p.add_argument("--rh-max", type=float, default=None, help="optional hard humidity cutoff")
        p.add_argument("--out", default=".", help="output directory")

    kendall = kinds.add_parser("kendall", help="pairwise rank-correlation matrix")
    common(kendall, "5m")
    kendall.add_argument("--min-pairs", type=int, default=DEFAULT_MIN_PAIRS)

    qq = kinds.add_parser("qq", help="matched quantiles of two channels")
    common(qq, "1h")
    qq.add_argument("--quantiles", type=int, default=100)

    idw = kinds.add_parser("idw", help="interpolated raster at a timestamp")
    common(idw, "5m")
    idw.add_argument("--at", required=True, help="timestamp (ISO-8601 or epoch seconds)")
    idw.add_argument("--power", type=float, default=2.0)
    idw.add_argument("--rows", type=int, default=24)
    idw.add_argument("--cols", type=int, default=24)
    idw.add_argument("--bbox", default=None, help="lat_min,lon_min,lat_max,lon_max (default: auto)")

    return parser


# -- serve --


def cmd_serve(args) -> int:
    data_dir = Path(args.data_dir)
    try:
        store = ChannelStore(data_dir, flush_every=args.flush_every)
    except OSError as exc:
        raise CliError(f"cannot use data dir {data_dir}: {exc}") from exc
    try:
        server = IngestServer(store, host=args.host, port=args.port, admin_key=args.admin_key)
    except OSError as exc:
        store.close()
        raise CliError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    print(f"serving on {server.url} (data dir {data_dir})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


# -- simulate --


def _ensure_channels(client: IngestClient, scenario, admin_key: str) -> dict[str, str]:
    """Register every scenario node, reusing existing bindings on re-runs."""
    write_keys: dict[str, str] = {}
    existing: dict[str, dict] | None = None
    for node in scenario.nodes:
        try:
            _, write_key = client.register(node, admin_key)
            write_keys[node.node_id] = write_key
        except DuplicateRegistration:
            if existing is None:
                existing = {info["node_id"]: info for info in client.channels(admin_key=admin_key)}
            info = existing.get(node.node_id)
            if not info or "write_key" not in info:
                raise CliError(
                    f"node {node.node_id!r} is registered but its write key is not "
                    "retrievable; check --admin-key"
                )
            write_keys[node.node_id] = info["write_key"]
    return write_keys


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        raise CliError(f"scenario file not found: {args.scenario}") from None
    except ScenarioError as exc:
        raise CliError(f"bad scenario {args.scenario}: {exc}") from exc
    overrides = {}
    if args.server is not None:
        overrides["server_url"] = args.server
    if args.speedup is not None:
        overrides["speedup"] = args.speedup
    if overrides:
        from dataclasses import replace

        scenario = replace(scenario, **overrides)

    client = IngestClient(scenario.server_url)
    try:
        write_keys = _ensure_channels(client, scenario, args.admin_key)
    except ClientError as exc:
        raise CliError(str(exc)) from exc

    uploader = HttpUploader(scenario.server_url, write_keys)
    simulator = Simulator(scenario, uploader=uploader)
    control = None
    if args.control_port is not None:
        control = ControlServer(simulator, port=args.control_port)
        control.start()
        print(f"control API on http://127.0.0.1:{control.port}", flush=True)
    try:
        report = simulator.run()
    except KeyboardInterrupt:
        simulator.request_stop()
        report = simulator.run()  # loop exits immediately; collects counters
    finally:
        if control is not None:
            control.stop()
        uploader.close()

    print(f"{'node':<20}{'sent':>8}{'failed':>8}")
    for node in scenario.nodes:
        counters = report.per_node[node.node_id]
        print(f"{node.node_id:<20}{counters.sent:>8}{counters.failed:>8}")
    print(
        f"{'total':<20}{report.total_sent:>8}{report.total_failed:>8}"
        f"   ({report.ticks} ticks, {report.wall_seconds:.1f}s wall)"
    )
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_OK if report.total_failed == 0 else EXIT_RUNTIME


# -- analyze --


def _parse_bound(raw: str | None, name: str):
    if raw is None:
        return None
    try:
        return parse_timestamp(raw, name)
    except ScenarioError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc


def _resolve_channels(client: IngestClient, spec_text: str) -> list[dict]:
    try:
        infos = client.channels()
    except ClientError as exc:
        raise CliError(str(exc)) from exc
    if spec_text.strip().lower() == "all":
        selected = infos
    else:
        by_id = {info["channel_id"]: info for info in infos}
        selected = []
        for token in spec_text.split(","):
            token = token.strip()
            try:
                channel_id = int(token)
            except ValueError:
                raise CliError(f"bad channel id {token!r}", EXIT_USAGE) from None
            if channel_id not in by_id:
                raise CliError(f"unknown channel {channel_id}")
            selected.append(by_id[channel_id])
    if not selected:
        raise CliError("no channels selected", EXIT_NO_DATA)
    return selected


def _cleaned_series(client: IngestClient, info: dict, args, parameter: Parameter, window):
    """Fetch one channel and run the cleaning pipeline for one parameter."""
    samples = client.samples(info["channel_id"], start=args.start, end=args.end)
    if not samples:
        return None
    params = cleaning.ClusterParams(eps=args.eps, min_pts=args.min_pts)
    series = cleaning.pipeline(
        info["node_id"],
        samples,
        window,
        params=params,
        batch_seconds=args.batch_seconds,
        rh_max=args.rh_max,
    )
    return series[parameter]


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_analyze_kendall(args) -> int:
    client = IngestClient(args.server)
    window = AveragingWindow.parse(args.window)
    parameter = Parameter(args.parameter)
    infos = _resolve_channels(client, args.channels)
    series_by_node = {}
    empty = []
    for info in infos:
        series = _cleaned_series(client, info, args, parameter, window)
        if series is None or len(series) == 0:
            empty.append(info["node_id"])
            continue
        series_by_node[info["node_id"]] = series
    if len(series_by_node) < 2:
        named = ", ".join(empty) or "selection"
        raise CliError(
            f"correlation needs at least 2 channels with data; empty: {named}", EXIT_NO_DATA
        )
    matrix = correlation_matrix(series_by_node, window, min_pairs=args.min_pairs)
    out = _outdir(args)
    (out / "tau.csv").write_text(matrix.to_csv(), encoding="utf-8")
    (out / "pair_counts.csv").write_text(matrix.pair_counts_csv(), encoding="utf-8")
    if empty:
        print(f"skipped (no data): {', '.join(empty)}")
    span = matrix.tau_range()
    if span is None:
        print("tau: no pair reached the minimum overlap")
    else:
        print(f"tau min {span[0]:.4f} max {span[1]:.4f} ({parameter.value}, {len(series_by_node)} nodes)")
    print(f"wrote {out / 'tau.csv'} and {out / 'pair_counts.csv'}")
    return EXIT_OK


def cmd_analyze_qq(args) -> int:
    client = IngestClient(args.server)
    window = AveragingWindow.parse(args.window)
    parameter = Parameter(args.parameter)
    infos = _resolve_channels(client, args.channels)
    if len(infos) != 2:
        raise CliError("qq compares exactly two channels (use --channels id1,id2)", EXIT_USAGE)
    series = []
    for info in infos:
        s = _cleaned_series(client, info, args, parameter, window)
        if s is None or len(s) < 2:
            raise CliError(
                f"channel {info['channel_id']} ({info['node_id']}) needs >= 2 averaged points",
                EXIT_NO_DATA,
            )
        series.append(s)
    try:
        result = qq_pairs(series[0].values(), series[1].values(), k=args.quantiles)
    except InsufficientDataError as exc:
        raise CliError(str(exc), EXIT_NO_DATA) from exc
    out = _outdir(args)
    (out / "qq.csv").write_text(result.to_csv(), encoding="utf-8")
    print(
        f"qq {infos[0]['node_id']} vs {infos[1]['node_id']} ({parameter.value}): "
        f"max |quantile offset| {result.max_abs_offset():.3f}"
    )
    print(f"wrote {out / 'qq.csv'}")
    return EXIT_OK


def cmd_analyze_idw(args) -> int:
    client = IngestClient(args.server)
    window = AveragingWindow.parse(args.window)
    parameter = Parameter(args.parameter)
    at = _parse_bound(args.at, "--at")
    infos = _resolve_channels(client, args.channels)
    bucket = window.bucket_start(at)
    stations = []
    excluded = []
    for info in infos:
        series = _cleaned_series(client, info, args, parameter, window)
        value = dict(series.points).get(bucket) if series is not None else None
        if value is None:
            excluded.append(info["node_id"])
        else:
            stations.append((descriptor_from_info(info), value))
    if not stations:
        raise CliError(f"no station data at {format_timestamp(bucket)}", EXIT_NO_DATA)
    if args.bbox:
        try:
            lat0, lon0, lat1, lon1 = (float(v) for v in args.bbox.split(","))
            bbox = BoundingBox(lat0, lon0, lat1, lon1)
        except ValueError as exc:
            raise CliError(f"bad --bbox: {exc}", EXIT_USAGE) from exc
    else:
        bbox = BoundingBox.around([descriptor_from_info(info).location for info in infos])
    grid = idw_grid(
        stations, bbox, args.rows, args.cols, timestamp=bucket,
        parameter=parameter.value, power=args.power,
    )
    out = _outdir(args)
    (out / "grid.csv").write_text(grid.to_csv(), encoding="utf-8")
    (out / "grid.geojson").write_text(
        json.dumps(grid.to_feature_collection(), indent=1), encoding="utf-8"
    )
    meta = grid.metadata()
    meta["excluded"] = excluded
    (out / "grid.meta.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")
    lo, hi = grid.value_range()
    row, col = grid.max_cell()
    center = grid.cell_center(row, col)
    nearest = min(
        stations, key=lambda st: haversine_distance(st[0].location, center)
    )[0].node_id
    print(
        f"idw {parameter.value} at {format_timestamp(bucket)}: min {lo:.1f} max {hi:.1f}, "
        f"max cell ({row},{col}) nearest {nearest}"
    )
    if excluded:
        print(f"excluded (no data at timestamp): {', '.join(excluded)}")
    print(f"wrote {out / 'grid.csv'}, {out / 'grid.geojson'}, {out / 'grid.meta.json'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "analyze":
            handler = {
                "kendall": cmd_analyze_kendall,
                "qq": cmd_analyze_qq,
                "idw": cmd_analyze_idw,
            }[args.kind]
            return handler(args)
        raise CliError(f"unknown command {args.command!r}", EXIT_USAGE)
    except CliError as exc:
        print(f"aqnet: {exc}", file=sys.stderr)
        return exc.code
    except InsufficientDataError as exc:
        print(f"aqnet: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except ClientError as exc:
        print(f"aqnet: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
