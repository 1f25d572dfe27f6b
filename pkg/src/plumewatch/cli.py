"""`plumewatch` command-line entry point.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from pathlib import Path

from . import smoke, survey, timelapse, usage
from .config import ServiceConfig, load_config
from .errors import NotFoundError, StorageError, ValidationError
from .server import serve
from .storage import DataStore
from .telemetry import TelemetryStore


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; we want 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="plumewatch", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data-root", default=None, help="data root directory")
        p.add_argument("--config", default=None, help="config file path")
        return p

    p = add("ingest", "ingest a directory of timestamp-named frames")
    p.add_argument("--dataset", required=True)
    p.add_argument("--dir", required=True, dest="source_dir")

    p = add("tile", "build the tile pyramid for an ingested dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--tile-size", type=int, default=timelapse.DEFAULT_TILE_SIZE)
    p.add_argument("--segment-len", type=int, default=timelapse.DEFAULT_SEGMENT_LEN)

    p = add("detect", "run smoke detection and event segmentation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--params", default=None, help="key=value smoke parameter file")

    p = add("import-readings", "bulk-import PM2.5 readings from CSV")
    p.add_argument("--file", required=True, dest="csv_path")
    p.add_argument("--stations", default=None, help="stations registry CSV to sync first")

    p = add("import-wind", "bulk-import wind readings from CSV")
    p.add_argument("--file", required=True, dest="csv_path")

    p = add("analyze", "mine thumbnail usage from access logs")
    p.add_argument("--logs", required=True, help="glob of access log files")
    p.add_argument("--exclude-cidr", default="", help="comma-separated CIDRs to drop")
    p.add_argument("--tz", default=None, help="study timezone (default from config)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("survey", "score survey responses and run the rank tests")
    p.add_argument("--in", required=True, dest="in_path", help="responses CSV")
    p.add_argument("--out", required=True, help="output directory")

    p = add("serve", "run the HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    return parser


def _config_for(args) -> ServiceConfig:
    config = load_config(args.config)
    if getattr(args, "data_root", None):
        from dataclasses import replace
        config = replace(config, data_root=Path(args.data_root))
    return config


def _store_for(args) -> DataStore:
    return DataStore(_config_for(args).data_root)


def _cmd_ingest(args) -> int:
    dataset = timelapse.ingest_frames(_store_for(args), args.dataset, Path(args.source_dir))
    print(
        f"ingested {dataset.frame_count} frames into {dataset.id} "
        f"({dataset.frame_width}x{dataset.frame_height}, "
        f"interval {dataset.capture_interval_s:g}s)"
    )
    return 0


def _cmd_tile(args) -> int:
    pyramid = timelapse.build_pyramid(
        _store_for(args), args.dataset, tile_size=args.tile_size, segment_len=args.segment_len
    )
    print(f"built {pyramid.num_levels}-level pyramid for {args.dataset}")
    return 0


def _cmd_detect(args) -> int:
    params = smoke.SmokeParams.from_file(args.params) if args.params else smoke.SmokeParams()
    results, events = smoke.run_detection(_store_for(args), args.dataset, params)
    daytime = sum(1 for r in results if r.is_daytime)
    print(
        f"detected over {len(results)} frames ({daytime} daytime): "
        f"{len(events)} event(s)"
    )
    return 0


def _cmd_import_readings(args) -> int:
    store = _store_for(args)
    telemetry_store = TelemetryStore(store.telemetry_db())
    try:
        stations = Path(args.stations) if args.stations else store.stations_csv()
        if stations.is_file():
            telemetry_store.sync_stations_csv(stations)
        count = telemetry_store.import_readings_csv(Path(args.csv_path))
    finally:
        telemetry_store.close()
    print(f"imported {count} readings")
    return 0


def _cmd_import_wind(args) -> int:
    store = _store_for(args)
    telemetry_store = TelemetryStore(store.telemetry_db())
    try:
        count = telemetry_store.import_wind_csv(Path(args.csv_path))
    finally:
        telemetry_store.close()
    print(f"imported {count} wind readings")
    return 0


def _cmd_analyze(args) -> int:
    config = _config_for(args)
    store = DataStore(config.data_root)
    paths = sorted(glob.glob(args.logs))
    if not paths:
        raise ValidationError(f"no log files match {args.logs!r}")
    lines = []
    for path in paths:
        lines.extend(Path(path).read_text(encoding="utf-8", errors="replace").splitlines())
    cidrs = [c.strip() for c in args.exclude_cidr.split(",") if c.strip()]
    cidrs = cidrs or list(config.exclude_cidrs)
    dataset_dates = {
        dataset_id: timelapse.load_dataset(store, dataset_id).capture_date
        for dataset_id in store.list_datasets()
    }
    result = usage.run_analysis(
        lines, cidrs, dataset_dates, tz=args.tz or config.study_tz
    )
    usage.write_analysis(Path(args.out), result)
    print(json.dumps(result.summary.to_json(), indent=2))
    return 0


def _cmd_survey(args) -> int:
    responses = survey.read_responses_csv(Path(args.in_path))
    result = survey.run_study(responses)
    survey.write_study(Path(args.out), result)
    for variable, test in result.tests.items():
        if test is None:
            print(f"{variable}: no information (all paired differences zero)")
        else:
            print(
                f"{variable}: W+={test.w_plus:g} p={test.p_right:.4f} ({test.method}), "
                f"mean diff {test.mean_diff:+.2f} ± {test.ci95_half_width:.2f}"
            )
    return 0


def _cmd_serve(args) -> int:
    config = _config_for(args)
    if args.host is not None or args.port is not None:
        from dataclasses import replace
        config = replace(
            config,
            listen_host=args.host if args.host is not None else config.listen_host,
            # port 0 binds an ephemeral port, reported on the next line
            listen_port=args.port if args.port is not None else config.listen_port,
        )
    server = serve(config)
    print(f"serving {config.data_root} on http://{config.listen_host}:{server.server_port}/",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "tile": _cmd_tile,
    "detect": _cmd_detect,
    "import-readings": _cmd_import_readings,
    "import-wind": _cmd_import_wind,
    "analyze": _cmd_analyze,
    "survey": _cmd_survey,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, NotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StorageError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
