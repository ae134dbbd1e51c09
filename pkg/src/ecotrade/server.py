"""Authoritative network host: many games, many connections, one event loop.

Clients send intents; the server validates, applies, logs, and broadcasts.
Frame handling is synchronous (no awaits between decode and apply), so every
client message is fully applied before the next one is looked at. That single
ordering is what makes races (two takers on the same offer) resolve cleanly
and what keeps the action log equal to the broadcast order.

Both transports share one port: a first byte of ``{`` means newline-delimited
JSON over plain TCP, anything else is treated as the start of a WebSocket
handshake. Outbound messages go through a per-connection queue and writer
task, each stamped with that connection's dense ``server_seq``.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import time
from collections import deque
from pathlib import Path

from websockets.frames import Opcode
from websockets.server import ServerProtocol

from .bot import BotClient, BotConfig
from .core import GameError, GameRules, Phase, validate_rules
from .protocol import (
    AcceptOffer,
    BalancesUpdate,
    CancelOffer,
    Chat,
    ChatRelay,
    CreateGame,
    DecodeError,
    DEFAULT_PORT,
    Error,
    GameCreated,
    GameOver,
    GameStarted,
    Hello,
    JoinGame,
    LeaveGame,
    LobbyUpdate,
    OfferCancelled,
    OfferPosted,
    ParcelChanged,
    PostOffer,
    SetLandUse,
    StartGame,
    TickReport,
    TradeExecuted,
    Welcome,
    decode,
    encode,
    offer_to_doc,
    rules_from_doc,
    trade_to_doc,
)
from .session import Session, event_doc, export_results, log_line

MAX_FRAME = 2**20  # inbound cap per frame; snapshots only ever go outbound


class LineTransport:
    """Newline-delimited JSON over a plain TCP stream."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, first: bytes):
        self._reader = reader
        self._writer = writer
        self._first = first

    async def handshake(self) -> bool:
        return True

    async def recv(self) -> bytes | None:
        while True:
            try:
                line = await self._reader.readline()
            except (ValueError, ConnectionError, OSError):
                return None  # overlong line or dropped peer
            if self._first:
                line, self._first = self._first + line, b""
            if not line:
                return None
            stripped = line.rstrip(b"\r\n")
            if stripped:
                return stripped  # blank keepalive lines are skipped

    async def send(self, payload: bytes) -> None:
        self._writer.write(payload + b"\n")
        await self._writer.drain()

    async def close(self) -> None:
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class WsTransport:
    """WebSocket server endpoint on the shared port (sans-io protocol core)."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, first: bytes):
        self._reader = reader
        self._writer = writer
        self._first = first
        self._proto = ServerProtocol()
        self._events: deque = deque()
        self._fragments: list[bytes] = []

    async def _flush(self) -> None:
        for data in self._proto.data_to_send():
            if data:
                self._writer.write(data)
        await self._writer.drain()

    async def handshake(self) -> bool:
        data = self._first
        self._first = b""
        while True:
            self._proto.receive_data(data)
            events = self._proto.events_received()
            if events:
                request = events[0]
                break
            data = await self._reader.read(4096)
            if not data:
                return False
        response = self._proto.accept(request)
        self._proto.send_response(response)
        await self._flush()
        return response.status_code == 101

    async def recv(self) -> bytes | None:
        while True:
            while self._events:
                frame = self._events.popleft()
                if frame.opcode is Opcode.CLOSE:
                    await self._flush()  # protocol already queued the close reply
                    return None
                if frame.opcode in (Opcode.TEXT, Opcode.BINARY, Opcode.CONT):
                    self._fragments.append(bytes(frame.data))
                    if frame.fin:
                        whole = b"".join(self._fragments)
                        self._fragments = []
                        return whole
                # ping/pong handled inside the protocol
            try:
                data = await self._reader.read(4096)
            except (ConnectionError, OSError):
                return None
            if not data:
                self._proto.receive_eof()
                return None
            self._proto.receive_data(data)
            await self._flush()  # auto pong replies
            self._events.extend(self._proto.events_received())

    async def send(self, payload: bytes) -> None:
        self._proto.send_text(payload)
        await self._flush()

    async def close(self) -> None:
        try:
            self._proto.send_close(1000)
            await self._flush()
        except Exception:
            pass
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class Conn:
    """One client connection: identity, seq counters, outbound queue."""

    def __init__(self, transport):
        self.transport = transport
        self.name: str | None = None
        self.player_id: int | None = None
        self.game_id: int | None = None
        self.last_client_seq = 0
        self.server_seq = 0
        self.outbound: asyncio.Queue = asyncio.Queue()
        self.closed = False

    def send(self, msg) -> None:
        if self.closed:
            return
        self.server_seq += 1
        self.outbound.put_nowait(dataclasses.replace(msg, server_seq=self.server_seq))


class GameServer:
    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        *,
        default_rules: GameRules | None = None,
        log_dir=None,
        export_dir=None,
        bot_config: BotConfig | None = None,
        clock=time.time,
    ):
        self.host = host
        self.port = port
        self.default_rules = default_rules
        self.log_dir = Path(log_dir) if log_dir else None
        self.export_dir = Path(export_dir) if export_dir else None
        self.bot_config = bot_config
        self.clock = clock
        self.sessions: dict[int, Session] = {}
        self.next_game_id = 1
        self.next_player_id = 1
        self.conns: set[Conn] = set()
        self._members: dict[int, list[Conn]] = {}
        self._tick_tasks: dict[int, asyncio.Task] = {}
        self._bot_tasks: dict[int, asyncio.Task] = {}
        self._pending_start: dict[int, int] = {}
        self._log_files: dict[int, object] = {}
        self._server: asyncio.Server | None = None

    # --- lifecycle ----------------------------------------------------------

    async def start(self) -> tuple[str, int]:
        self._server = await asyncio.start_server(self._on_client, self.host, self.port, limit=MAX_FRAME)
        self.port = self._server.sockets[0].getsockname()[1]
        return self.host, self.port

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        tasks = list(self._tick_tasks.values()) + list(self._bot_tasks.values())
        for task in tasks:
            task.cancel()
        if tasks:
            await asyncio.gather(*tasks, return_exceptions=True)
        self._tick_tasks.clear()
        self._bot_tasks.clear()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for conn in list(self.conns):
            conn.closed = True
            await conn.transport.close()
        self.conns.clear()
        for fh in self._log_files.values():
            fh.close()
        self._log_files.clear()

    # --- connection plumbing ------------------------------------------------

    async def _on_client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            first = await reader.read(1)
        except (ConnectionError, OSError):
            writer.close()
            return
        if not first:
            writer.close()
            return
        transport = LineTransport(reader, writer, first) if first == b"{" else WsTransport(reader, writer, first)
        if not await transport.handshake():
            await transport.close()
            return
        conn = Conn(transport)
        self.conns.add(conn)
        writer_task = asyncio.create_task(self._writer_loop(conn))
        try:
            while True:
                raw = await transport.recv()
                if raw is None or conn.closed:
                    break
                self._handle_frame(conn, raw)
        finally:
            self._disconnect(conn)
            conn.closed = True
            conn.outbound.put_nowait(None)  # let queued messages flush first
            try:
                await asyncio.wait_for(writer_task, 2)
            except Exception:
                writer_task.cancel()
            await transport.close()
            self.conns.discard(conn)

    async def _writer_loop(self, conn: Conn) -> None:
        while True:
            msg = await conn.outbound.get()
            if msg is None:
                return
            try:
                await conn.transport.send(encode(msg))
            except (ConnectionError, OSError):
                return

    def _disconnect(self, conn: Conn) -> None:
        if conn.game_id is not None:
            session = self.sessions.get(conn.game_id)
            if session is not None:
                self._leave(conn, session)

    # --- dispatch (synchronous: one frame fully applied before the next) ----

    def _handle_frame(self, conn: Conn, raw: bytes) -> None:
        try:
            msg = decode(raw)
        except DecodeError as exc:
            conn.send(Error(code=exc.code, message=exc.message, client_seq=getattr(exc, "client_seq", 0) or 0))
            return
        if msg.client_seq <= conn.last_client_seq:
            conn.send(
                Error(
                    code="bad_client_seq",
                    message=f"client_seq must increase (last was {conn.last_client_seq})",
                    client_seq=msg.client_seq,
                )
            )
            return
        conn.last_client_seq = msg.client_seq
        try:
            self._route(conn, msg, raw)
        except GameError as exc:
            conn.send(Error(code=exc.code, message=exc.message, client_seq=msg.client_seq))

    def _route(self, conn: Conn, msg, raw: bytes) -> None:
        now = self.clock()
        if isinstance(msg, Hello):
            name = msg.name.strip()
            if not name:
                raise GameError("bad_name", "name must not be empty")
            if conn.game_id is not None:
                raise GameError("already_in_game", "cannot change identity while in a game")
            if conn.player_id is None:
                conn.player_id = self.next_player_id
                self.next_player_id += 1
            conn.name = name
            conn.send(Welcome(player_id=conn.player_id))
            return
        if conn.name is None:
            raise GameError("hello_required", "send hello before anything else")

        if isinstance(msg, CreateGame):
            if conn.game_id is not None:
                raise GameError("already_in_game", "leave the current game first")
            rules = msg.rules
            if self.default_rules is not None:
                # fields absent from the request fall back to the server's
                # configured defaults, not the built-in ones
                rules = rules_from_doc(json.loads(raw).get("rules"), base=self.default_rules)
            validate_rules(rules)
            game_id = self.next_game_id
            self.next_game_id += 1
            session = Session(game_id, rules, created_unix=now)
            self.sessions[game_id] = session
            self._members[game_id] = []
            self._open_log(session)
            session.join(conn.name, wall=now, player_id=conn.player_id)
            self._flush_log(session)
            conn.game_id = game_id
            self._members[game_id].append(conn)
            conn.send(GameCreated(game_id=game_id, rules=rules))
            self._broadcast_lobby(session)
            return

        if isinstance(msg, JoinGame):
            if conn.game_id is not None:
                raise GameError("already_in_game", "leave the current game first")
            session = self.sessions.get(msg.game_id)
            if session is None:
                raise GameError("unknown_game", f"no game {msg.game_id}")
            if session.state.phase is Phase.LOBBY:
                session.join(conn.name, wall=now, player_id=conn.player_id)
                self._flush_log(session)
                conn.game_id = msg.game_id
                self._members[msg.game_id].append(conn)
                self._broadcast_lobby(session)
                self._maybe_pending_start(session)
            else:
                for other in self._members.get(msg.game_id, []):
                    if other.name == conn.name and not other.closed:
                        raise GameError("name_taken", f"{conn.name!r} is still connected")
                player = session.rejoin(conn.name, wall=now)
                self._flush_log(session)
                conn.game_id = msg.game_id
                conn.player_id = player.player_id
                self._members[msg.game_id].append(conn)
                conn.send(Welcome(player_id=player.player_id))
                conn.send(GameStarted(snapshot=session.snapshot_doc()))
            return

        if conn.game_id is None:
            raise GameError("not_in_game", "join a game first")
        session = self.sessions[conn.game_id]

        if isinstance(msg, StartGame):
            if (
                session.state.phase is Phase.LOBBY
                and len(session.state.players) == 1
                and conn.game_id not in self._bot_tasks
            ):
                if session.creator_id != conn.player_id:
                    raise GameError("not_creator", "only the game's creator may start it")
                # one-player mode: the start completes once the bot has joined
                self._pending_start[conn.game_id] = conn.player_id
                self._spawn_bot(session)
                return
            if conn.game_id in self._pending_start:
                return  # bot join in flight; the start will land shortly
            self._start_session(session, conn.player_id)
        elif isinstance(msg, SetLandUse):
            affected = session.set_land_use(conn.player_id, msg.parcel_id, msg.use, wall=now)
            self._flush_log(session)
            if affected:  # empty means no-op: no broadcast, no log
                self._broadcast(
                    session,
                    ParcelChanged(
                        parcel_id=msg.parcel_id,
                        use=msg.use,
                        affected_credit_values=[{"parcel_id": i, "credits": c} for i, c in affected],
                    ),
                )
                self._broadcast(session, BalancesUpdate(balances=session.balances_doc()))
        elif isinstance(msg, PostOffer):
            offer = session.post_offer(conn.player_id, msg.side, msg.quantity, msg.unit_price, wall=now)
            self._flush_log(session)
            self._broadcast(session, OfferPosted(offer=offer_to_doc(offer)))
        elif isinstance(msg, CancelOffer):
            offer = session.cancel_offer(conn.player_id, msg.offer_id, wall=now)
            self._flush_log(session)
            self._broadcast(session, OfferCancelled(offer_id=offer.offer_id))
        elif isinstance(msg, AcceptOffer):
            trade = session.accept_offer(conn.player_id, msg.offer_id, msg.quantity, wall=now)
            self._flush_log(session)
            self._broadcast(session, TradeExecuted(trade=trade_to_doc(trade)))
            self._broadcast(session, BalancesUpdate(balances=session.balances_doc()))
        elif isinstance(msg, Chat):
            session.chat(conn.player_id, msg.text, wall=now)
            self._flush_log(session)
            self._broadcast(session, ChatRelay(player_id=conn.player_id, text=msg.text))
        elif isinstance(msg, LeaveGame):
            self._leave(conn, session)

    # --- session helpers ----------------------------------------------------

    def _start_session(self, session: Session, requester_id: int) -> None:
        session.start(requester_id, wall=self.clock())
        self._flush_log(session)
        self._broadcast(session, GameStarted(snapshot=session.snapshot_doc()))
        self._tick_tasks[session.game_id] = asyncio.create_task(self._tick_loop(session.game_id))

    def _maybe_pending_start(self, session: Session) -> None:
        requester = self._pending_start.pop(session.game_id, None)
        if requester is None:
            return
        try:
            self._start_session(session, requester)
        except GameError:
            pass  # roster changed under us; the requester can try again

    async def _tick_loop(self, game_id: int) -> None:
        while True:
            session = self.sessions.get(game_id)
            if session is None or session.state.phase is not Phase.RUNNING:
                return
            await asyncio.sleep(session.rules.tick_seconds)
            report = session.tick(self.clock())
            if report is None:
                return
            self._flush_log(session)
            self._broadcast(
                session,
                TickReport(
                    tick=report["tick"],
                    reports=[
                        {"player_id": e["player_id"], "revenue": e["revenue"], "penalty": e["penalty"]}
                        for e in report["breakdown"]
                    ],
                ),
            )
            if report["finished"]:
                self._broadcast(
                    session, GameOver(scores=[{"player_id": pid, "cash": cash} for pid, cash in report["scores"]])
                )
                self._finish_session(session)
                return

    def _finish_session(self, session: Session) -> None:
        fh = self._log_files.pop(session.game_id, None)
        if fh is not None:
            fh.write(log_line(session.trailer_doc()))
            fh.close()
        if self.export_dir is not None:
            export_results(session, self.export_dir / f"game_{session.game_id}")

    def _leave(self, conn: Conn, session: Session) -> None:
        try:
            session.leave(conn.player_id, wall=self.clock())
        except GameError:
            pass
        self._flush_log(session)
        members = self._members.get(session.game_id, [])
        if conn in members:
            members.remove(conn)
        conn.game_id = None
        if self._pending_start.get(session.game_id) == conn.player_id:
            self._pending_start.pop(session.game_id, None)
        if session.state.phase is Phase.LOBBY:
            if session.state.players:
                self._broadcast_lobby(session)
            else:
                self._cull(session)

    def _cull(self, session: Session) -> None:
        self.sessions.pop(session.game_id, None)
        self._members.pop(session.game_id, None)
        self._pending_start.pop(session.game_id, None)
        fh = self._log_files.pop(session.game_id, None)
        if fh is not None:
            fh.close()
        task = self._bot_tasks.pop(session.game_id, None)
        if task is not None:
            task.cancel()

    def _spawn_bot(self, session: Session) -> None:
        host = self.host if self.host not in ("", "0.0.0.0", "::") else "127.0.0.1"
        taken = {p.name for p in session.state.players}
        name = "bot"
        n = 2
        while name in taken:
            name = f"bot{n}"
            n += 1
        client = BotClient(host, self.port, session.game_id, config=self.bot_config, name=name)
        task = asyncio.create_task(client.run())
        game_id = session.game_id

        def reap(t: asyncio.Task) -> None:
            self._bot_tasks.pop(game_id, None)
            if not t.cancelled():
                t.exception()  # surface nothing; errors already went to stderr

        task.add_done_callback(reap)
        self._bot_tasks[game_id] = task

    # --- broadcast ----------------------------------------------------------

    def _broadcast(self, session: Session, msg) -> None:
        for conn in self._members.get(session.game_id, []):
            conn.send(msg)

    def _broadcast_lobby(self, session: Session) -> None:
        players = [{"player_id": p.player_id, "name": p.name} for p in session.state.players]
        self._broadcast(session, LobbyUpdate(game_id=session.game_id, players=players))

    # --- logging ------------------------------------------------------------

    def _open_log(self, session: Session) -> None:
        if self.log_dir is None:
            return
        self.log_dir.mkdir(parents=True, exist_ok=True)
        fh = open(self.log_dir / f"game_{session.game_id}.log", "w", encoding="utf-8")
        fh.write(log_line(session.header_doc()))
        fh.flush()
        self._log_files[session.game_id] = fh

    def _flush_log(self, session: Session) -> None:
        events = session.drain_events()
        fh = self._log_files.get(session.game_id)
        if fh is None or not events:
            return
        for ev in events:
            fh.write(log_line(event_doc(ev)))
        fh.flush()
