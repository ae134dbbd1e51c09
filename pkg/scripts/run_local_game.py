"""One-command local demo: a server plus a handful of bots playing a full game.

The script seats itself as the game creator, parks all of its land in
conservation so it stays compliant, and narrates the game from its own
connection: trades as they execute, per-tick revenue and penalties, and the
final ranking. Useful as a smoke test and as a way to watch bot pricing
behave under different rules.

    python3 scripts/run_local_game.py --bots 3 --ticks 20
    python3 scripts/run_local_game.py --rules my_rules.txt --log-dir logs/
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ecotrade.bot import BotClient, BotConfig
from ecotrade.cli import parse_rules
from ecotrade.core import GameRules, LandUse, Neighborhood, AllocationMode
from ecotrade.protocol import (
    CreateGame,
    Error,
    GameCreated,
    GameOver,
    GameStarted,
    Hello,
    LobbyUpdate,
    SetLandUse,
    StartGame,
    TickReport,
    TradeExecuted,
    Welcome,
    decode,
    encode,
)
from ecotrade.server import GameServer


def demo_rules(ticks: int, seed: int) -> GameRules:
    return GameRules(
        width=6,
        height=6,
        neighborhood=Neighborhood.MOORE8,
        bonus_weight=2,
        obligation=8,
        penalty_rate=3,
        tick_seconds=1.0,
        total_ticks=ticks,
        base_credit_range=(1, 6),
        agri_revenue_range=(1, 8),
        initial_cash=30,
        allocation_mode=AllocationMode.INTERLEAVED,
        landscape_seed=seed,
    )


class Host:
    """Creator connection that starts the game and narrates the stream."""

    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer
        self.client_seq = 0
        self.names: dict[int, str] = {}

    def send(self, msg) -> None:
        self.client_seq += 1
        msg.client_seq = self.client_seq
        self.writer.write(encode(msg) + b"\n")

    async def recv(self):
        line = await self.reader.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return decode(line.rstrip(b"\r\n"))

    async def expect(self, cls):
        while True:
            msg = await self.recv()
            if isinstance(msg, cls):
                return msg
            if isinstance(msg, Error):
                raise RuntimeError(f"server error: {msg.code}: {msg.message}")


async def play(args, rules: GameRules) -> int:
    server = GameServer("127.0.0.1", args.port,
                        log_dir=args.log_dir, export_dir=args.export_dir)
    await server.start()
    print(f"server listening on 127.0.0.1:{server.port}")
    try:
        reader, writer = await asyncio.open_connection("127.0.0.1", server.port, limit=2**22)
        host = Host(reader, writer)
        host.send(Hello(name="host"))
        me = (await host.expect(Welcome)).player_id
        host.send(CreateGame(rules=rules))
        created = await host.expect(GameCreated)
        print(f"created game {created.game_id} "
              f"({rules.width}x{rules.height}, obligation {rules.obligation}, "
              f"{rules.total_ticks} ticks)")

        bots = [
            asyncio.create_task(
                BotClient("127.0.0.1", server.port, created.game_id,
                          BotConfig(decision_period_ms=args.period_ms),
                          name=f"bot-{i + 1}").run()
            )
            for i in range(args.bots)
        ]
        seated = 0
        while seated < args.bots + 1:
            update = await host.expect(LobbyUpdate)
            seated = len(update.players)
            host.names = {p["player_id"]: p["name"] for p in update.players}
        host.send(StartGame())
        snapshot = (await host.expect(GameStarted)).snapshot
        print("game started; players: "
              + ", ".join(f"{pid}={name}" for pid, name in sorted(host.names.items())))

        # the host plays nothing: conserve everything once and watch
        for parcel in snapshot["landscape"]["parcels"]:
            if parcel["owner"] == me and parcel["land_use"] == "agriculture":
                host.send(SetLandUse(parcel_id=parcel["parcel_id"], use=LandUse.CONSERVATION))

        while True:
            msg = await host.recv()
            if isinstance(msg, TradeExecuted):
                t = msg.trade
                print(f"  trade: {host.names.get(t['seller'], t['seller'])} -> "
                      f"{host.names.get(t['buyer'], t['buyer'])}  "
                      f"{t['quantity']} @ {t['unit_price']}")
            elif isinstance(msg, TickReport):
                flows = ", ".join(
                    f"{host.names.get(r['player_id'], r['player_id'])} "
                    f"+{r['revenue']}/-{r['penalty']}"
                    for r in msg.reports
                )
                print(f"tick {msg.tick:>3}: {flows}")
            elif isinstance(msg, GameOver):
                print("final scores:")
                for rank, entry in enumerate(msg.scores, start=1):
                    name = host.names.get(entry["player_id"], entry["player_id"])
                    tag = " (host, idle)" if entry["player_id"] == me else ""
                    print(f"  {rank}. {name:<8} cash {entry['cash']}{tag}")
                break
        writer.close()
        await asyncio.gather(*bots, return_exceptions=True)
        if args.log_dir:
            print(f"log written under {args.log_dir}")
        if args.export_dir:
            print(f"csv export written under {args.export_dir}")
    finally:
        await server.stop()
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bots", type=int, default=2, help="number of bot players (default 2)")
    ap.add_argument("--ticks", type=int, default=15, help="game length in ticks (default 15)")
    ap.add_argument("--seed", type=int, default=7, help="landscape seed (default 7)")
    ap.add_argument("--port", type=int, default=0, help="listen port (default: pick a free one)")
    ap.add_argument("--period-ms", type=int, default=400, help="bot decision period (default 400)")
    ap.add_argument("--rules", metavar="FILE", help="rules file overriding the demo defaults")
    ap.add_argument("--log-dir", metavar="DIR", help="write the game log here")
    ap.add_argument("--export-dir", metavar="DIR", help="write panel.csv / trades.csv here")
    args = ap.parse_args(argv)
    if not 1 <= args.bots <= 3:
        ap.error("--bots must be between 1 and 3 (games seat at most 4 players)")
    rules = parse_rules(args.rules) if args.rules else demo_rules(args.ticks, args.seed)
    return asyncio.run(play(args, rules))


if __name__ == "__main__":
    raise SystemExit(main())
