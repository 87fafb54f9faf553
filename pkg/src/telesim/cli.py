"""Command-line front end.

Subcommands: serve (default), replay, simulate, report.  The bare flag
form `telesim --config c.json --scenario room.scenario --listen
127.0.0.1:9000` serves, and `telesim --replay session.ndjson ...`
verifies a recording, so the documented flat interface works without
naming a subcommand.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .engine import LatencyModel, TeleopStation, replay_session
from .protocol import Envelope, SessionLog, decode_envelope
from .server import TeleopServer

DEFAULT_SCENARIO = """\
# default 8 x 6 m room
wall -4 -3  4 -3
wall  4 -3  4  3
wall  4  3 -4  3
wall -4  3 -4 -3
start 0 0 0
seed 1
"""

SUBCOMMANDS = ("serve", "replay", "simulate", "report")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="robot config JSON")
    parser.add_argument("--scenario", type=Path, default=None, help="scenario file")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")


def _add_serve_args(parser: argparse.ArgumentParser) -> None:
    _add_common(parser)
    parser.add_argument("--listen", default="127.0.0.1:9000", help="addr:port to listen on")
    parser.add_argument("--rate-scale", type=float, default=1.0,
                        help="virtual seconds per wall second (0 = free run)")
    parser.add_argument("--record", type=Path, default=None, help="write a session log here")
    parser.add_argument("--replay", type=Path, default=None,
                        help="verify a recorded session instead of serving")
    parser.add_argument("--latency", type=float, default=0.0, help="one-way command delay [s]")
    parser.add_argument("--jitter", type=float, default=0.0, help="uniform delay jitter bound [s]")
    parser.add_argument("--duration", type=float, default=None,
                        help="stop after this much virtual time [s]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telesim", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    serve = sub.add_parser("serve", help="run the teleop server")
    _add_serve_args(serve)

    replay = sub.add_parser("replay", help="verify a recorded session")
    _add_common(replay)
    replay.add_argument("log", type=Path, help="session log to replay")

    simulate = sub.add_parser("simulate", help="run a scripted session in virtual time")
    _add_common(simulate)
    simulate.add_argument("--commands", type=Path, default=None,
                          help="NDJSON file of inbound command envelopes")
    simulate.add_argument("--duration", type=float, default=30.0, help="virtual seconds")
    simulate.add_argument("--record", type=Path, required=True, help="session log output")
    simulate.add_argument("--latency", type=float, default=0.0)
    simulate.add_argument("--jitter", type=float, default=0.0)

    report = sub.add_parser("report", help="render figures and CSV from a session log")
    report.add_argument("log", type=Path, help="session log")
    report.add_argument("--out-dir", type=Path, default=Path("report"))
    return parser


def _load_inputs(args) -> tuple:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        raise SystemExit(f"config error: {exc}")
    if args.scenario is not None:
        scenario = Path(args.scenario).read_text()
    else:
        scenario = DEFAULT_SCENARIO
    return config, scenario


def _cmd_serve(args) -> int:
    config, scenario = _load_inputs(args)
    if args.replay is not None:
        return _verify(args.replay, config, scenario)
    host, _, port = args.listen.rpartition(":")
    latency = LatencyModel(args.latency, args.jitter, seed=args.seed or 0)
    try:
        server = TeleopServer(
            config,
            scenario,
            listen=(host or "127.0.0.1", int(port)),
            seed=args.seed,
            rate_scale=args.rate_scale,
            latency=latency,
        )
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    server.start()
    print(f"listening on {server.address[0]}:{server.address[1]} "
          f"(rate x{args.rate_scale:g}, seed {server.station.seed})")
    stop = {"flag": False}

    def handle(_sig, _frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, handle)
    signal.signal(signal.SIGTERM, handle)
    try:
        if args.rate_scale == 0.0:
            if args.duration is None:
                raise SystemExit("--rate-scale 0 (free run) requires --duration")
            server.run_for(args.duration)
        else:
            while not stop["flag"]:
                if args.duration is not None and server.station.now_s >= args.duration:
                    break
                signal.pause() if args.duration is None else _sleep_briefly()
    except KeyboardInterrupt:
        pass
    server.stop()
    if args.record is not None:
        server.station.finish_log().save(args.record)
        print(f"session log written to {args.record}")
    return 0


def _sleep_briefly() -> None:
    import time

    time.sleep(0.05)


def _verify(log_path: Path, config, scenario) -> int:
    log = SessionLog.load(log_path)
    try:
        result = replay_session(log, config, scenario)
    except ValueError as exc:
        print(f"replay rejected: {exc}", file=sys.stderr)
        return 2
    if result.ok:
        print(f"replay OK: {result.outbound_count} envelopes, "
              f"{len(result.recorded_hashes) - 1} topics match")
        return 0
    topic, seq = result.first_divergence
    print(f"replay DIVERGED at topic {topic!r} seq {seq}", file=sys.stderr)
    for name in sorted(result.recorded_hashes):
        a = result.recorded_hashes.get(name, "-")
        b = result.replayed_hashes.get(name, "-")
        marker = "ok " if a == b else "DIFF"
        print(f"  [{marker}] {name}: {a[:12]} vs {b[:12]}", file=sys.stderr)
    return 1


def _cmd_replay(args) -> int:
    config, scenario = _load_inputs(args)
    return _verify(args.log, config, scenario)


def _cmd_simulate(args) -> int:
    config, scenario = _load_inputs(args)
    latency = LatencyModel(args.latency, args.jitter, seed=args.seed or 0)
    station = TeleopStation(config, scenario, seed=args.seed, latency=latency)
    if args.commands is not None:
        with open(args.commands, "rb") as fh:
            for line in fh:
                if line.strip():
                    station.submit(decode_envelope(line))
    station.run_seconds(args.duration)
    station.finish_log().save(args.record)
    print(f"{station.tick_index} ticks simulated, "
          f"{len(station.outbound)} envelopes -> {args.record}")
    return 0


def _cmd_report(args) -> int:
    log = SessionLog.load(args.log)
    from .report import write_session_report

    created = write_session_report(log, args.out_dir)
    for path in created:
        print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    # flat flag form: route to serve (or replay verification via --replay)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help"):
        argv = ["serve"] + argv
    args = build_parser().parse_args(argv)
    if args.command is None:
        build_parser().print_help()
        return 0
    handler = {
        "serve": _cmd_serve,
        "replay": _cmd_replay,
        "simulate": _cmd_simulate,
        "report": _cmd_report,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
