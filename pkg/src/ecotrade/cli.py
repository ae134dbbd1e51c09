"""Command-line entry points: server and bot launchers, log replay/verify,
results export, and the rules-file format.

Exit codes are stable: 0 success, 1 usage or input error, 2 verification
failure (corrupt or tampered log, digest mismatch, missing trailer).
"""

from __future__ import annotations

import argparse
import asyncio
import dataclasses
import sys
from enum import Enum
from pathlib import Path

from .bot import BotClient, BotConfig
from .core import AllocationMode, GameError, GameRules, Neighborhood, validate_rules
from .protocol import DEFAULT_PORT
from .server import GameServer
from .session import LogError, export_results, replay_log


# --- rules files -------------------------------------------------------------

def _parse_value(key: str, value: str, lineno: int):
    try:
        if key == "neighborhood":
            return Neighborhood(value)
        if key == "allocation_mode":
            return AllocationMode(value)
        if key == "tick_seconds":
            return float(value)
        if key in ("base_credit_range", "agri_revenue_range"):
            lo, hi = value.split()
            return (int(lo), int(hi))
        return int(value)
    except ValueError as exc:
        raise GameError("bad_value", f"line {lineno}: bad value for {key}: {value!r}") from exc


def parse_rules_text(text: str) -> GameRules:
    """`key = value` lines; # starts a comment; omitted keys take defaults."""
    known = {f.name for f in dataclasses.fields(GameRules)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GameError("bad_value", f"line {lineno}: expected `key = value`, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise GameError("unknown_key", f"line {lineno}: unknown rules key {key!r}")
        if key in kwargs:
            raise GameError("bad_value", f"line {lineno}: duplicate key {key!r}")
        kwargs[key] = _parse_value(key, value, lineno)
    rules = GameRules(**kwargs)
    try:
        validate_rules(rules)
    except GameError as exc:
        raise GameError("bad_value", exc.message) from exc
    return rules


def parse_rules(path) -> GameRules:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GameError("unreadable", f"cannot read rules file {path}: {exc}") from exc
    return parse_rules_text(text)


def _format_value(value) -> str:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return f"{value[0]} {value[1]}"
    return str(value)


def format_rules(rules: GameRules) -> str:
    lines = [f"{f.name} = {_format_value(getattr(rules, f.name))}" for f in dataclasses.fields(GameRules)]
    return "\n".join(lines) + "\n"


def rules_help_text() -> str:
    defaults = GameRules()
    lines = ["rules file: one `key = value` per line, omitted keys take these defaults:"]
    for f in dataclasses.fields(GameRules):
        lines.append(f"  {f.name} = {_format_value(getattr(defaults, f.name))}")
    lines.append("values: neighborhood is moore8 or von_neumann4; allocation_mode is")
    lines.append("interleaved or blocks; the two _range keys take `min max` integers.")
    return "\n".join(lines)


# --- helpers ----------------------------------------------------------------

def _split_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep:
        raise GameError("bad_value", f"expected host:port, got {addr!r}")
    try:
        return (host or "127.0.0.1", int(port))
    except ValueError as exc:
        raise GameError("bad_value", f"bad port in {addr!r}") from exc


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


# --- subcommands -------------------------------------------------------------

def cmd_server(args) -> int:
    host, port = _split_addr(args.listen)
    rules = parse_rules(args.rules) if args.rules else None
    server = GameServer(host, port, default_rules=rules, log_dir=args.log_dir, export_dir=args.export_dir)

    async def run():
        listen_host, listen_port = await server.start()
        print(f"listening on {listen_host}:{listen_port}", flush=True)
        try:
            await server.serve_forever()
        finally:
            await server.stop()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    return 0


def cmd_bot(args) -> int:
    host, port = _split_addr(args.connect)
    config = BotConfig(decision_period_ms=args.period_ms, markup_percent=args.markup, reserve_price=args.reserve)
    client = BotClient(host, port, args.game, config=config)
    try:
        cash = asyncio.run(client.run())
    except (ConnectionError, OSError) as exc:
        print(f"cannot reach server at {host}:{port}: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    if cash is None:
        print("disconnected before the game ended", file=sys.stderr)
        return 1
    print(f"game over, final cash {cash}")
    return 0


def cmd_replay(args) -> int:
    session, trailer = replay_log(args.log)  # LogError propagates to main
    state = session.state
    print(f"game {session.game_id}: {len(session.log)} events, tick {state.tick}, phase {state.phase.value}")
    print(f"digest {session.digest()}")
    for player in state.players:
        print(f"player {player.player_id} ({player.name}): cash {player.cash}")
    if trailer is None:
        print("FAIL: no trailer; the session did not finish cleanly")
        return 2
    print("PASS: digest matches trailer")
    return 0


def cmd_export(args) -> int:
    session, _ = replay_log(args.log)
    panel_path, trades_path = export_results(session, args.out)
    print(f"wrote {panel_path} and {trades_path}")
    return 0


def build_parser(prog: str = "ecotrade") -> _Parser:
    parser = _Parser(
        prog=prog,
        description="Biodiversity-credit trading game: server, bot, and log tools.",
        epilog=rules_help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "server",
        help="run the game server",
        epilog=rules_help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--listen", default=f"127.0.0.1:{DEFAULT_PORT}", metavar="ADDR:PORT")
    p.add_argument("--rules", metavar="FILE", help="rules file with defaults for created games")
    p.add_argument("--log-dir", metavar="DIR", help="write one action log per game here")
    p.add_argument("--export-dir", metavar="DIR", help="write per-game CSV results here on finish")
    p.set_defaults(func=cmd_server)

    p = sub.add_parser("bot", help="connect a computer player to a game")
    p.add_argument("--connect", default=f"127.0.0.1:{DEFAULT_PORT}", metavar="ADDR:PORT")
    p.add_argument("--game", type=int, required=True, metavar="GAME_ID")
    p.add_argument("--period-ms", type=int, default=1000, metavar="N", help="decision period (default 1000)")
    p.add_argument("--markup", type=int, default=10, metavar="P", help="ask premium percent (default 10)")
    p.add_argument("--reserve", type=int, default=5, metavar="R", help="ask price before any trade (default 5)")
    p.set_defaults(func=cmd_bot)

    p = sub.add_parser("replay", help="replay an action log and verify its digest")
    p.add_argument("log")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("export", help="replay an action log and write result CSVs")
    p.add_argument("log")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LogError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return 2
    except GameError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return 1


def server_main(argv=None) -> int:
    return main(["server", *(sys.argv[1:] if argv is None else argv)])


def bot_main(argv=None) -> int:
    return main(["bot", *(sys.argv[1:] if argv is None else argv)])
