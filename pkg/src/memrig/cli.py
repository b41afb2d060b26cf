"""Command-line entry points: ``memrig-fw`` (the board) and ``memrig`` (the host)."""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
from pathlib import Path

from . import campaigns, firmware, report
from .chip import build_fixture, load_chip_profile
from .client import ALL_CELLS, CellAddress, ClientError, LoopbackTransport, MemrigClient, parse_endpoint
from .device import ParameterError

log = logging.getLogger("memrig")

CAMPAIGN_FILES = {"c2c": "c2c.csv", "read-disturb": "read_disturb.csv", "endurance": "endurance.csv"}


def _config_path() -> Path:
    env = os.environ.get("MEMRIG_CONFIG")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CONFIG_HOME") or Path.home() / ".config"
    return Path(base) / "memrig" / "config.json"


def _load_config() -> dict:
    path = _config_path()
    if not path.exists():
        return {}
    return json.loads(path.read_text())


def _save_config(cfg: dict):
    path = _config_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _chip(path: str | None) -> dict | None:
    return load_chip_profile(path) if path else None


# --- firmware -----------------------------------------------------------------


def fw_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="memrig-fw", description="Crossbar control board emulator.")
    mode = ap.add_mutually_exclusive_group(required=True)
    mode.add_argument("--listen", metavar="HOST:PORT", help="serve on a TCP socket")
    mode.add_argument("--stdio", action="store_true", help="serve on stdin/stdout")
    ap.add_argument("--chip", metavar="PROFILE_JSON", help="chip profile document")
    ap.add_argument("--seed", type=int, help="override the profile's seed")
    ap.add_argument("--once", action="store_true", help="exit after the first client disconnects")
    ap.add_argument("--log-level", default="WARNING")
    args = ap.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr)

    try:
        fw = firmware.setup(build_fixture(_chip(args.chip), args.seed))
    except (OSError, ValueError) as exc:
        print(f"memrig-fw: {exc}", file=sys.stderr)
        return 2

    if args.stdio:
        firmware.serve_stdio(fw)
        return 0

    host, port = parse_endpoint(args.listen)
    listener = firmware.open_listener(host, port)
    # announce the bound port, useful with port 0
    print(f"listening on {host}:{listener.getsockname()[1]}", file=sys.stderr, flush=True)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    firmware.serve_socket(fw, listener, stop=stop, once=args.once)
    return 0


# --- host ---------------------------------------------------------------------


def _parse_cells(spec: str) -> list[CellAddress]:
    if spec == "all":
        return list(ALL_CELLS)
    cells = []
    for item in spec.split(";"):
        sl, _, bl = item.partition(",")
        cells.append(CellAddress.checked(int(sl), int(bl)))
    return cells


def _parse_voltages(spec: str) -> list[int]:
    return [int(v) for v in spec.split(",") if v.strip()]


def _open_client(args) -> MemrigClient:
    if args.local:
        return MemrigClient(LoopbackTransport(firmware.setup(build_fixture(_chip(args.chip), args.seed))))
    endpoint = args.endpoint or _load_config().get("endpoint")
    if not endpoint:
        raise ClientError("no endpoint; run `memrig connect HOST:PORT` or pass --endpoint")
    return MemrigClient.connect(endpoint)


def cmd_connect(args) -> int:
    with MemrigClient.connect(args.endpoint) as client:
        version = client.ping()
    cfg = _load_config()
    cfg["endpoint"] = args.endpoint
    _save_config(cfg)
    print(f"connected to {args.endpoint}, firmware {version >> 8}.{version & 0xFF}")
    return 0


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = _parse_cells(args.cells)
    voltages = _parse_voltages(args.voltages)
    with _open_client(args) as client:
        if args.campaign == "endurance":
            reports = [campaigns.run_endurance_campaign(client, c, args.cycles) for c in cells]
            campaigns.export_endurance_csv(reports, out / CAMPAIGN_FILES["endurance"])
            for r in reports:
                state = f"broken at cycle {r.n_cmax_observed}" if r.broken else f"survived {r.cycles} cycles"
                print(f"cell ({r.sl},{r.bl}): {state}")
            return 0
        if args.campaign == "c2c":
            ds = campaigns.run_c2c_campaign(client, cells, voltages, cycles=args.cycles)
        else:
            ds = campaigns.run_read_disturb_campaign(client, cells, voltages, reads=args.reads, repeats=args.repeats)
    path = out / CAMPAIGN_FILES[args.campaign]
    campaigns.export_csv(ds, path)
    meta_path = path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(ds.meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(ds)} records to {path}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.input)
    cell = None
    if args.cell:
        cell = _parse_cells(args.cell)[0]
    if args.kind == "cdf":
        ds = campaigns.import_csv(src / CAMPAIGN_FILES["c2c"] if src.is_dir() else src)
        series = report.cdf_series_from_dataset(ds, cell)
        if args.svg:
            report.render_cdf_svg(series, args.svg)
        if args.csv:
            report.write_cdf_csv(series, args.csv)
    else:
        ds = campaigns.import_csv(src / CAMPAIGN_FILES["read-disturb"] if src.is_dir() else src)
        groups = report.box_groups_from_dataset(ds, args.voltage, cell)
        title = f"Read disturb at {args.voltage:+d} mV"
        if args.svg:
            report.render_boxplot_svg(groups, args.svg, title)
        if args.csv:
            report.write_box_csv(groups, args.csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memrig", description="Host tools for the crossbar rig.")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("connect", help="check and remember a firmware endpoint")
    p.add_argument("endpoint", metavar="HOST:PORT")
    p.set_defaults(func=cmd_connect)

    p = sub.add_parser("run", help="run a measurement campaign")
    p.add_argument("campaign", choices=sorted(CAMPAIGN_FILES))
    p.add_argument("--cells", default="all", help="'all' or 'sl,bl[;sl,bl...]'")
    p.add_argument("--voltages", default=",".join(str(v) for v in campaigns.C2C_VOLTAGES_MV), help="read voltages in mV")
    p.add_argument("--cycles", type=int, default=100, help="C2C cycles per voltage, or endurance cycle limit")
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--endpoint", help="firmware HOST:PORT (defaults to the saved one)")
    p.add_argument("--local", action="store_true", help="run against an in-process emulator")
    p.add_argument("--chip", help="chip profile for --local")
    p.add_argument("--seed", type=int, help="seed for --local")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="render figures from campaign CSV")
    p.add_argument("kind", choices=("cdf", "boxplot"))
    p.add_argument("--in", dest="input", required=True, help="campaign output directory or CSV file")
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--voltage", type=int, default=200, help="read voltage (mV) for boxplots")
    p.add_argument("--cell", help="restrict to one cell 'sl,bl'")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr)
    try:
        return args.func(args)
    except (ClientError, ParameterError, campaigns.DatasetError, report.ReportError, OSError, ValueError) as exc:
        print(f"memrig: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
