"""Event-sourced game session: one ordered event log per game, deterministic
replay, canonical state digest, results export.

Every state mutation, lobby joins included, passes through ``_apply``, which
is driven either by a live intent (validated, then committed to the log) or by
a logged event during replay. The two paths share the application code, so a
replayed session is bit-identical to the live one. Wall-clock timestamps ride
along in the log for audit but never influence state.

The session is single-writer: the hosting event loop serializes all calls.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import market
from .core import (
    GameError,
    GameRules,
    GameState,
    LandUse,
    Phase,
    PlayerState,
    accrue_tick,
    apply_land_use_change,
    final_scores,
    parcel_credits,
    player_production,
    start_game_state,
    tick_breakdown,
    validate_rules,
)
from .market import OrderBook, Side
from .protocol import DecodeError, offer_to_doc, rules_from_doc, rules_to_doc, trade_to_doc

SYSTEM = "system"
LOG_FORMAT = "ecotrade-log"
LOG_VERSION = 1

EVENT_KINDS = (
    "player_joined",
    "player_left",
    "game_started",
    "land_use_changed",
    "offer_posted",
    "offer_cancelled",
    "trade_executed",
    "tick_accrued",
    "chat_sent",
    "game_finished",
)

PANEL_COLUMNS = ("tick", "player_id", "cash", "production", "net_traded", "shortfall", "penalty", "revenue")
TRADE_COLUMNS = ("seq", "tick_at", "seller", "buyer", "quantity", "unit_price")


class LogError(GameError):
    """Log cannot be replayed. ``code`` is corrupt_log or digest_mismatch."""

    def __init__(self, code: str, message: str, seq: int | None = None):
        super().__init__(code, message)
        self.seq = seq


@dataclass
class LoggedEvent:
    seq: int  # dense from 1
    wall_clock: float  # unix seconds; audit only, ignored by replay
    actor: int | str  # player_id, or "system" for scheduler events
    kind: str
    payload: dict


class Session:
    """One game: lobby roster, authoritative state, order book, append-only log."""

    def __init__(self, game_id: int, rules: GameRules, created_unix: float = 0.0):
        validate_rules(rules)
        self.game_id = game_id
        self.rules = rules
        self.created_unix = created_unix
        self.creator_id: int | None = None
        self.state = GameState(rules=rules)
        self.book = OrderBook()
        self.log: list[LoggedEvent] = []
        self.next_player_id = 1
        self._unflushed: list[LoggedEvent] = []

    # --- live intents ------------------------------------------------------
    # Each validates, applies through _apply, then commits exactly one event.
    # A raised GameError means nothing was applied and nothing was logged.

    def join(self, name: str, wall: float = 0.0, player_id: int | None = None) -> PlayerState:
        """Add a player in the lobby. The host may supply its own player_id
        (server-global ids); ids need not be dense, only unique per game."""
        if self.state.phase is not Phase.LOBBY:
            raise GameError("already_started", "game already started; joining is only possible in the lobby")
        if any(p.name == name for p in self.state.players):
            raise GameError("name_taken", f"name {name!r} already taken in this game")
        if player_id is None:
            player_id = self.next_player_id
        elif any(p.player_id == player_id for p in self.state.players):
            raise GameError("name_taken", f"player id {player_id} already present")
        payload = {"player_id": player_id, "name": name}
        player = self._apply("player_joined", payload)
        self._commit("player_joined", player.player_id, payload, wall)
        return player

    def rejoin(self, name: str, wall: float = 0.0) -> PlayerState:
        """Reconnect by name after the game started; roster is unchanged."""
        if self.state.phase is Phase.LOBBY:
            raise GameError("unknown_player", "no started game to rejoin")
        for p in self.state.players:
            if p.name == name:
                payload = {"player_id": p.player_id, "name": name}
                self._apply("player_joined", payload)
                self._commit("player_joined", p.player_id, payload, wall)
                return p
        raise GameError("already_started", "game already started and no player has that name")

    def leave(self, player_id: int, wall: float = 0.0) -> None:
        self.state.player(player_id)  # membership check
        payload = {"player_id": player_id}
        self._apply("player_left", payload)
        self._commit("player_left", player_id, payload, wall)

    def start(self, requester_id: int, wall: float = 0.0) -> GameState:
        if self.state.phase is not Phase.LOBBY:
            raise GameError("already_started", "game already started")
        self.state.player(requester_id)
        if requester_id != self.creator_id:
            raise GameError("not_creator", "only the game's creator may start it")
        state = self._apply("game_started", {})
        self._commit("game_started", requester_id, {}, wall)
        return state

    def set_land_use(self, player_id: int, parcel_id: int, use: LandUse, wall: float = 0.0) -> list[tuple[int, int]]:
        payload = {"player_id": player_id, "parcel_id": parcel_id, "use": use.value}
        affected = self._apply("land_use_changed", payload)
        if affected:  # empty means no-op: accepted but not logged
            self._commit("land_use_changed", player_id, payload, wall)
        return affected

    def post_offer(self, player_id: int, side: Side, quantity: int, unit_price: int, wall: float = 0.0):
        payload = {
            "offer_id": self.book.next_offer_id,
            "maker": player_id,
            "side": side.value,
            "quantity": quantity,
            "unit_price": unit_price,
        }
        offer = self._apply("offer_posted", payload)
        self._commit("offer_posted", player_id, payload, wall)
        return offer

    def cancel_offer(self, player_id: int, offer_id: int, wall: float = 0.0):
        payload = {"player_id": player_id, "offer_id": offer_id}
        offer = self._apply("offer_cancelled", payload)
        self._commit("offer_cancelled", player_id, payload, wall)
        return offer

    def accept_offer(self, player_id: int, offer_id: int, quantity: int, wall: float = 0.0):
        payload = {"taker": player_id, "offer_id": offer_id, "quantity": quantity}
        trade = self._apply("trade_executed", payload)
        self._commit("trade_executed", player_id, payload, wall)
        return trade

    def chat(self, player_id: int, text: str, wall: float = 0.0) -> None:
        payload = {"player_id": player_id, "text": text}
        self._apply("chat_sent", payload)
        self._commit("chat_sent", player_id, payload, wall)

    def tick(self, wall: float = 0.0) -> dict | None:
        """Advance one period; None when the game is not running (silent no-op).

        The returned report carries the pre-accrual breakdown (revenue, penalty,
        shortfall per player) plus post-accrual tick number and, on the final
        tick, the ranked scores.
        """
        if self.state.phase is not Phase.RUNNING:
            return None
        breakdown = tick_breakdown(self.state)
        self._apply("tick_accrued", {})
        self._commit("tick_accrued", SYSTEM, {}, wall)
        finished = self.state.phase is Phase.FINISHED
        if finished:
            self._apply("game_finished", {})
            self._commit("game_finished", SYSTEM, {}, wall)
        return {
            "tick": self.state.tick,
            "breakdown": breakdown,
            "finished": finished,
            "scores": final_scores(self.state) if finished else None,
        }

    def drain_events(self) -> list[LoggedEvent]:
        """Events committed since the last drain; the host appends them to disk."""
        events, self._unflushed = self._unflushed, []
        return events

    # --- shared application core -------------------------------------------

    def _commit(self, kind: str, actor, payload: dict, wall: float) -> LoggedEvent:
        ev = LoggedEvent(seq=len(self.log) + 1, wall_clock=wall, actor=actor, kind=kind, payload=payload)
        self.log.append(ev)
        self._unflushed.append(ev)
        return ev

    def _apply(self, kind: str, payload: dict):
        state, book = self.state, self.book
        if kind == "player_joined":
            pid, name = payload["player_id"], payload["name"]
            for p in state.players:
                if p.player_id == pid:
                    return p  # reconnect marker; roster unchanged
            player = PlayerState(player_id=pid, name=name)
            state.players.append(player)
            self.next_player_id = max(self.next_player_id, pid + 1)
            if self.creator_id is None:
                self.creator_id = pid
            return player
        if kind == "player_left":
            pid = payload["player_id"]
            if state.phase is Phase.LOBBY:
                state.players = [p for p in state.players if p.player_id != pid]
                if self.creator_id == pid:
                    # creator role passes to the earliest remaining member
                    self.creator_id = state.players[0].player_id if state.players else None
            return None  # after start the roster is fixed; audit entry only
        if kind == "game_started":
            return start_game_state(state)
        if kind == "land_use_changed":
            return apply_land_use_change(state, payload["player_id"], payload["parcel_id"], LandUse(payload["use"]))
        if kind == "offer_posted":
            offer = market.post_offer(
                state, book, payload["maker"], Side(payload["side"]), payload["quantity"], payload["unit_price"]
            )
            if offer.offer_id != payload["offer_id"]:
                raise LogError("corrupt_log", f"offer id drift: book says {offer.offer_id}, log says {payload['offer_id']}")
            return offer
        if kind == "offer_cancelled":
            return market.cancel_offer(state, book, payload["player_id"], payload["offer_id"])
        if kind == "trade_executed":
            return market.accept_offer(state, book, payload["taker"], payload["offer_id"], payload["quantity"])
        if kind == "tick_accrued":
            return accrue_tick(state)
        if kind == "chat_sent":
            state.player(payload["player_id"])  # membership check; chat mutates nothing
            return None
        if kind == "game_finished":
            return None  # phase already Finished via the preceding tick
        raise LogError("corrupt_log", f"unknown event kind {kind!r}")

    # --- replay -------------------------------------------------------------

    def replay_apply(self, ev: LoggedEvent) -> None:
        expected = len(self.log) + 1
        if ev.seq != expected:
            raise LogError("corrupt_log", f"expected seq {expected}, got {ev.seq}", seq=ev.seq)
        if ev.kind not in EVENT_KINDS:
            raise LogError("corrupt_log", f"unknown event kind {ev.kind!r}", seq=ev.seq)
        try:
            self._apply(ev.kind, ev.payload)
        except LogError:
            raise
        except (GameError, KeyError, TypeError, ValueError) as exc:
            raise LogError("corrupt_log", f"event {ev.seq} does not apply: {exc}", seq=ev.seq) from exc
        self.log.append(ev)

    # --- canonical serialization and digest ----------------------------------

    def canonical_doc(self) -> dict:
        """Field-ordered plain-JSON form of the full state; digest input."""
        land = self.state.landscape
        return {
            "game_id": self.game_id,
            "rules": rules_to_doc(self.rules),
            "phase": self.state.phase.value,
            "tick": self.state.tick,
            "creator_id": self.creator_id,
            "next_player_id": self.next_player_id,
            "players": [
                {
                    "player_id": p.player_id,
                    "name": p.name,
                    "cash": p.cash,
                    "net_traded": p.net_traded,
                    "owned_parcels": sorted(p.owned_parcels),
                }
                for p in self.state.players
            ],
            "landscape": None
            if land is None
            else {
                "width": land.width,
                "height": land.height,
                "parcels": [
                    {
                        "parcel_id": p.parcel_id,
                        "row": p.row,
                        "col": p.col,
                        "owner": p.owner,
                        "land_use": p.land_use.value,
                        "base_credit": p.base_credit,
                        "agri_revenue": p.agri_revenue,
                    }
                    for p in land.parcels
                ],
            },
            "offers": [offer_to_doc(o) for _, o in sorted(self.book.offers.items())],
            "trades": [trade_to_doc(t) for t in self.book.trades],
            "next_offer_id": self.book.next_offer_id,
            "next_trade_seq": self.book.next_trade_seq,
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical_doc(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def snapshot_doc(self) -> dict:
        """Wire-format full snapshot sent on game start and reconnect."""
        land = self.state.landscape
        if land is None:
            raise GameError("game_not_running", "no snapshot before the game starts")
        rules = self.rules
        return {
            "game_id": self.game_id,
            "rules": rules_to_doc(rules),
            "tick": self.state.tick,
            "phase": self.state.phase.value,
            "landscape": {
                "width": land.width,
                "height": land.height,
                "parcels": [
                    {
                        "parcel_id": p.parcel_id,
                        "row": p.row,
                        "col": p.col,
                        "owner": p.owner,
                        "land_use": p.land_use.value,
                        "base_credit": p.base_credit,
                        "agri_revenue": p.agri_revenue,
                        "credits": parcel_credits(land, (p.row, p.col), rules),
                    }
                    for p in land.parcels
                ],
            },
            "players": [
                {
                    "player_id": p.player_id,
                    "name": p.name,
                    "cash": p.cash,
                    "net_traded": p.net_traded,
                    "production": player_production(self.state, p.player_id),
                }
                for p in self.state.players
            ],
            "offers": [offer_to_doc(o) for o in self.book.open_offers()],
            "trades": [trade_to_doc(t) for t in self.book.trades],
        }

    def balances_doc(self) -> list[dict]:
        return [
            {
                "player_id": p.player_id,
                "production": player_production(self.state, p.player_id),
                "net_traded": p.net_traded,
                "cash": p.cash,
            }
            for p in self.state.players
        ]

    # --- log lines ----------------------------------------------------------

    def header_doc(self) -> dict:
        return {
            "kind": "header",
            "format": LOG_FORMAT,
            "version": LOG_VERSION,
            "game_id": self.game_id,
            "created_unix": self.created_unix,
            "rules": rules_to_doc(self.rules),
        }

    def trailer_doc(self) -> dict:
        return {
            "kind": "trailer",
            "events": len(self.log),
            "digest": self.digest(),
            "scores": [{"player_id": pid, "cash": cash} for pid, cash in final_scores(self.state)],
        }


def event_doc(ev: LoggedEvent) -> dict:
    return {"kind": "event", "seq": ev.seq, "ts": ev.wall_clock, "actor": ev.actor, "event": ev.kind, "payload": ev.payload}


def event_from_doc(doc: dict) -> LoggedEvent:
    seq = doc.get("seq")
    kind = doc.get("event")
    payload = doc.get("payload")
    actor = doc.get("actor")
    ts = doc.get("ts", 0.0)
    if type(seq) is not int or not isinstance(kind, str) or not isinstance(payload, dict):
        raise LogError("corrupt_log", "event line missing seq/event/payload")
    if not (type(actor) is int or actor == SYSTEM):
        raise LogError("corrupt_log", f"bad actor {actor!r}", seq=seq)
    if type(ts) is not int and type(ts) is not float:
        raise LogError("corrupt_log", "bad event timestamp", seq=seq)
    return LoggedEvent(seq=seq, wall_clock=float(ts), actor=actor, kind=kind, payload=payload)


def log_line(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n"


def read_log(path) -> tuple[dict, list[LoggedEvent], dict | None]:
    """Parse a log file into (header, events, trailer-or-None).

    Structural problems (bad JSON, wrong first line, lines after the trailer)
    raise LogError(corrupt_log); a missing trailer merely returns None for it,
    since partial logs from interrupted sessions are legitimate.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LogError("corrupt_log", f"cannot read log: {exc}") from exc
    header: dict | None = None
    trailer: dict | None = None
    events: list[LoggedEvent] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogError("corrupt_log", f"line {lineno} is not valid JSON") from exc
        if not isinstance(doc, dict):
            raise LogError("corrupt_log", f"line {lineno} is not an object")
        if trailer is not None:
            raise LogError("corrupt_log", f"line {lineno} follows the trailer")
        kind = doc.get("kind")
        if header is None:
            if kind != "header" or doc.get("format") != LOG_FORMAT:
                raise LogError("corrupt_log", "first line is not an ecotrade-log header")
            header = doc
        elif kind == "event":
            events.append(event_from_doc(doc))
        elif kind == "trailer":
            trailer = doc
        else:
            raise LogError("corrupt_log", f"line {lineno} has unknown kind {kind!r}")
    if header is None:
        raise LogError("corrupt_log", "empty log file")
    return header, events, trailer


def replay_log(path) -> tuple[Session, dict | None]:
    """Rebuild a session from its log; verify the trailer digest when present."""
    header, events, trailer = read_log(path)
    try:
        rules = rules_from_doc(header.get("rules", {}))
        validate_rules(rules)
    except (DecodeError, GameError) as exc:
        if isinstance(exc, LogError):
            raise
        raise LogError("corrupt_log", f"header rules invalid: {exc}") from exc
    game_id = header.get("game_id")
    if type(game_id) is not int:
        raise LogError("corrupt_log", "header has no game_id")
    sess = Session(game_id, rules, created_unix=float(header.get("created_unix", 0.0)))
    for ev in events:
        sess.replay_apply(ev)
    if trailer is not None:
        if trailer.get("events") != len(sess.log):
            raise LogError("corrupt_log", f"trailer counts {trailer.get('events')} events, log has {len(sess.log)}")
        if trailer.get("digest") != sess.digest():
            raise LogError("digest_mismatch", "replayed digest differs from the trailer digest")
    return sess, trailer


# --- results export ---------------------------------------------------------

def panel_rows(session: Session) -> list[dict]:
    """Per-tick per-player accounting, reconstructed by replaying the log.

    cash is the post-accrual balance at that tick; revenue, penalty, shortfall
    are the flows of that tick; production and net_traded are the standings the
    accrual was computed from.
    """
    fresh = Session(session.game_id, session.rules, created_unix=session.created_unix)
    rows: list[dict] = []
    for ev in session.log:
        if ev.kind == "tick_accrued":
            breakdown = tick_breakdown(fresh.state)
            fresh.replay_apply(ev)
            for entry in breakdown:
                rows.append(
                    {
                        "tick": fresh.state.tick,
                        "player_id": entry["player_id"],
                        "cash": fresh.state.player(entry["player_id"]).cash,
                        "production": entry["production"],
                        "net_traded": entry["net_traded"],
                        "shortfall": entry["shortfall"],
                        "penalty": entry["penalty"],
                        "revenue": entry["revenue"],
                    }
                )
        else:
            fresh.replay_apply(ev)
    return rows


def export_results(session: Session, out_dir) -> tuple[Path, Path]:
    """Write panel.csv and trades.csv under out_dir; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    panel_path = out / "panel.csv"
    trades_path = out / "trades.csv"
    with open(panel_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PANEL_COLUMNS)
        for row in panel_rows(session):
            writer.writerow([row[c] for c in PANEL_COLUMNS])
    with open(trades_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRADE_COLUMNS)
        for trade in session.book.trades:
            doc = trade_to_doc(trade)
            writer.writerow([doc[c] for c in TRADE_COLUMNS])
    return panel_path, trades_path
