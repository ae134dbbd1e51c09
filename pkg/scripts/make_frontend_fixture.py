"""Record a real server stream into fixtures for the browser client tests.

Plays a short scripted two-player game over TCP against an in-process server
and captures every frame one client receives, byte for byte, into
session.jsonl. The matching expected.json holds the final scores and the
server's exported final panel rows, so the client-side reducer can be checked
against the authoritative accounting without a live server.

The scenario is the 5x1 strip where a lawful sale followed by a neighbor
release leaves the seller short: the stream therefore contains joins, offers,
a trade, a cancellation, land-use changes, chat, penalties and a game end.

    python3 scripts/make_frontend_fixture.py --out frontend/test/fixtures
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import json
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ecotrade.core import AllocationMode, GameRules, LandUse, Neighborhood
from ecotrade.protocol import (
    AcceptOffer,
    CancelOffer,
    Chat,
    CreateGame,
    Error,
    GameCreated,
    GameOver,
    GameStarted,
    Hello,
    JoinGame,
    LobbyUpdate,
    OfferPosted,
    PostOffer,
    SetLandUse,
    StartGame,
    TradeExecuted,
    Welcome,
    decode,
    encode,
)
from ecotrade.market import Side
from ecotrade.server import GameServer

RULES = GameRules(
    width=5,
    height=1,
    neighborhood=Neighborhood.MOORE8,
    bonus_weight=2,
    obligation=5,
    penalty_rate=4,
    tick_seconds=1.0,
    total_ticks=10,
    base_credit_range=(3, 3),
    agri_revenue_range=(5, 5),
    initial_cash=10,
    allocation_mode=AllocationMode.INTERLEAVED,
    landscape_seed=1,
)


class Scripted:
    def __init__(self, reader, writer, record: list[bytes] | None = None):
        self.reader = reader
        self.writer = writer
        self.record = record
        self.client_seq = 0

    @classmethod
    async def connect(cls, port: int, name: str, record: list[bytes] | None = None):
        reader, writer = await asyncio.open_connection("127.0.0.1", port, limit=2**22)
        client = cls(reader, writer, record)
        client.send(Hello(name=name))
        await client.expect(Welcome)
        return client

    def send(self, msg) -> None:
        self.client_seq += 1
        msg.client_seq = self.client_seq
        self.writer.write(encode(msg) + b"\n")

    async def recv(self):
        line = await asyncio.wait_for(self.reader.readline(), 30)
        if not line:
            raise ConnectionError("server closed the connection")
        line = line.rstrip(b"\r\n")
        if self.record is not None:
            self.record.append(line)
        msg = decode(line)
        if isinstance(msg, Error):
            raise RuntimeError(f"scripted client got an error: {msg.code}: {msg.message}")
        return msg

    async def expect(self, cls):
        while True:
            msg = await self.recv()
            if isinstance(msg, cls):
                return msg


async def record_game(export_dir: Path) -> tuple[list[bytes], dict]:
    server = GameServer("127.0.0.1", 0, export_dir=export_dir)
    await server.start()
    try:
        frames: list[bytes] = []
        ada = await Scripted.connect(server.port, "ada", record=frames)
        ada.send(CreateGame(rules=RULES))
        created = await ada.expect(GameCreated)
        bob = await Scripted.connect(server.port, "bob")
        bob.send(JoinGame(game_id=created.game_id))
        await bob.expect(LobbyUpdate)
        ada.send(StartGame())
        await ada.expect(GameStarted)
        await bob.expect(GameStarted)

        # b sells 2 lawfully, then a's release leaves b short for good
        bob.send(PostOffer(side=Side.SELL, quantity=2, unit_price=6))
        offer = (await ada.expect(OfferPosted)).offer
        ada.send(AcceptOffer(offer_id=offer["offer_id"], quantity=2))
        await ada.expect(TradeExecuted)
        await bob.expect(TradeExecuted)
        ada.send(SetLandUse(parcel_id=0, use=LandUse.AGRICULTURE))

        # extra market and chat traffic so the stream is a realistic session
        bob.send(PostOffer(side=Side.SELL, quantity=1, unit_price=9))
        second = (await bob.expect(OfferPosted)).offer
        bob.send(CancelOffer(offer_id=second["offer_id"]))
        ada.send(PostOffer(side=Side.BUY, quantity=1, unit_price=2))
        for i in range(14):
            ada.send(Chat(text=f"ada says {i}"))
            bob.send(Chat(text=f"bob says {i}"))

        async def drain_until_over(client):
            scores = (await client.expect(GameOver)).scores
            return scores

        scores, _ = await asyncio.gather(drain_until_over(ada), drain_until_over(bob))
        ada.writer.close()
        bob.writer.close()

        out_dir = export_dir / f"game_{created.game_id}"
        deadline = time.monotonic() + 5.0
        while not (out_dir / "panel.csv").exists() and time.monotonic() < deadline:
            await asyncio.sleep(0.05)
        with open(out_dir / "panel.csv", newline="", encoding="utf-8") as fh:
            rows = [{k: int(v) for k, v in row.items()} for row in csv.DictReader(fh)]
        final_panel = [r for r in rows if r["tick"] == RULES.total_ticks]
        with open(out_dir / "trades.csv", newline="", encoding="utf-8") as fh:
            trades = [{k: int(v) for k, v in row.items()} for row in csv.DictReader(fh)]
        expected = {"scores": scores, "final_panel": final_panel, "trades": trades}
        return frames, expected
    finally:
        await server.stop()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_out = Path(__file__).resolve().parent.parent / "frontend" / "test" / "fixtures"
    ap.add_argument("--out", default=str(default_out), metavar="DIR")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        frames, expected = asyncio.run(record_game(Path(tmp)))
    if len(frames) < 50:
        raise SystemExit(f"recording too short: {len(frames)} frames, need at least 50")
    (out / "session.jsonl").write_bytes(b"\n".join(frames) + b"\n")
    with open(out / "expected.json", "w", encoding="utf-8") as fh:
        json.dump(expected, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{len(frames)} frames -> {out / 'session.jsonl'}")
    print(f"final accounting -> {out / 'expected.json'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
