"""Computer-controlled player for the one-player mode.

The strategy core (``marginal_value``, ``plan_action``, ``minimal_feasible_set``)
is pure: same state and config, same action. The network shell
(:class:`BotClient`) speaks the ordinary wire protocol over TCP, mirrors server
broadcasts into a local :class:`GameState`, and emits at most one action per
decision period. After sending an action it waits for the next inbound message
before planning again, so it never acts on a state it knows to be stale.

Priorities, checked in order each period:

1. in shortfall: buy the cheapest eligible credits if cheaper than the
   penalties they avoid, else conserve the field that buys the most credits
   per unit of revenue given up;
2. compliant: flip a parcel whose per-tick cash effect is positive (with no
   neighbor bonus this reduces to walking toward the cheapest feasible
   conserved set, computed exactly);
3. compliant with spare credits and no open ask of our own: offer the surplus
   for sale at the last trade price plus a markup;
4. otherwise do nothing.
"""

from __future__ import annotations

import asyncio
import sys
from dataclasses import dataclass

from .core import (
    GameError,
    GameState,
    LandUse,
    Landscape,
    Parcel,
    Phase,
    PlayerState,
    credits_if_conserved,
    effective_balance,
    neighbors,
    parcel_credits,
)
from .market import OrderBook, Offer, OfferStatus, Side
from .protocol import (
    AcceptOffer,
    BalancesUpdate,
    ChatRelay,
    DecodeError,
    Error,
    GameOver,
    GameStarted,
    Hello,
    JoinGame,
    LobbyUpdate,
    OfferCancelled,
    OfferPosted,
    ParcelChanged,
    PostOffer,
    SetLandUse,
    TickReport,
    TradeExecuted,
    Welcome,
    decode,
    encode,
    offer_from_doc,
    rules_from_doc,
    trade_from_doc,
)

BOT_NAME = "bot"


@dataclass(frozen=True)
class BotConfig:
    decision_period_ms: int = 1000
    markup_percent: int = 10  # ask premium over the last trade price
    reserve_price: int = 5  # ask price before any trade exists

    def __post_init__(self):
        if self.decision_period_ms < 100:
            raise GameError("invalid_rules", "decision_period_ms must be >= 100")
        if self.markup_percent < 0 or self.reserve_price < 0:
            raise GameError("invalid_rules", "markup_percent and reserve_price must be >= 0")


def _own_conserved_adjacent(state: GameState, player_id: int, parcel: Parcel) -> int:
    land = state.landscape
    return sum(
        1
        for r, c in neighbors(land, (parcel.row, parcel.col), state.rules.neighborhood)
        if land.at(r, c).owner == player_id and land.at(r, c).land_use is LandUse.CONSERVATION
    )


def _flip_credit_delta(state: GameState, player_id: int, parcel: Parcel) -> int:
    """Change of the player's own production if this parcel's use were flipped."""
    rules = state.rules
    own_adj = _own_conserved_adjacent(state, player_id, parcel)
    coord = (parcel.row, parcel.col)
    if parcel.land_use is LandUse.CONSERVATION:
        return -(parcel_credits(state.landscape, coord, rules) + rules.bonus_weight * own_adj)
    return credits_if_conserved(state.landscape, coord, rules) + rules.bonus_weight * own_adj


def marginal_value(state: GameState, player_id: int, parcel_id: int) -> int:
    """Per-tick cash change if the parcel's use were flipped, all else fixed.

    Lost or gained credits matter only where they cross the obligation line,
    valued at the penalty rate; credits inside the surplus are cash-neutral.
    """
    player = state.player(player_id)
    if parcel_id not in player.owned_parcels:
        raise GameError("not_owner", f"player {player_id} does not own parcel {parcel_id}")
    parcel = state.landscape.parcels[parcel_id]
    revenue_delta = parcel.agri_revenue if parcel.land_use is LandUse.CONSERVATION else -parcel.agri_revenue
    credit_delta = _flip_credit_delta(state, player_id, parcel)
    balance = effective_balance(state, player_id)
    obligation = state.rules.obligation
    shortfall_before = max(0, obligation - balance)
    shortfall_after = max(0, obligation - (balance + credit_delta))
    return revenue_delta - state.rules.penalty_rate * (shortfall_after - shortfall_before)


def minimal_feasible_set(state: GameState, player_id: int) -> frozenset[int]:
    """Cheapest conserved set: parcels to conserve so production covers the
    obligation net of trades, minimizing forgone agricultural revenue.

    Only valid with bonus_weight 0, where credits are additive. Ties are broken
    toward the lexicographically smallest parcel-id set, so the result is
    canonical. Exact dynamic program over (parcel index, credits still needed).
    """
    player = state.player(player_id)
    parcels = state.landscape.parcels
    items = [(i, parcels[i].base_credit, parcels[i].agri_revenue) for i in sorted(player.owned_parcels)]
    need = state.rules.obligation - player.net_traded
    if need <= 0:
        return frozenset()
    big = float("inf")
    n = len(items)
    # suffix[k][c]: min revenue from items[k:] to cover c more credits
    suffix = [[big] * (need + 1) for _ in range(n + 1)]
    suffix[n][0] = 0
    for k in range(n - 1, -1, -1):
        _, credit, revenue = items[k]
        for c in range(need + 1):
            skip = suffix[k + 1][c]
            take = revenue + suffix[k + 1][max(0, c - credit)]
            suffix[k][c] = min(skip, take)
    if suffix[0][need] == big:
        # unreachable in a lawfully started game; fall back to the status quo
        land = state.landscape
        return frozenset(i for i in player.owned_parcels if land.parcels[i].land_use is LandUse.CONSERVATION)
    chosen = []
    c = need
    acc = 0
    target = suffix[0][need]
    for k in range(n):
        if c <= 0:
            break  # already covered; any further pick only lengthens the set
        pid, credit, revenue = items[k]
        if acc + revenue + suffix[k + 1][max(0, c - credit)] == target:
            chosen.append(pid)
            acc += revenue
            c = max(0, c - credit)
    return frozenset(chosen)


def _ratio_better(gain_a: int, rev_a: int, gain_b: int, rev_b: int) -> bool:
    """gain_a/rev_a > gain_b/rev_b with x/0 treated as infinity (integer-exact)."""
    return gain_a * rev_b > gain_b * rev_a


def plan_action(state: GameState, player_id: int, open_offers: list[Offer], last_price: int | None, config: BotConfig):
    """One step of the priority strategy; a client message to send, or None."""
    if state.phase is not Phase.RUNNING:
        return None
    rules = state.rules
    land = state.landscape
    player = state.player(player_id)
    balance = effective_balance(state, player_id)
    shortfall = max(0, rules.obligation - balance)
    owned = sorted(player.owned_parcels)

    if shortfall > 0:
        remaining = rules.total_ticks - state.tick
        for offer in sorted(open_offers, key=lambda o: (o.unit_price, o.offer_id)):
            if offer.side is not Side.SELL or offer.maker == player_id or offer.status is not OfferStatus.OPEN:
                continue
            quantity = min(offer.quantity, shortfall)
            # the server holds sellers to their own obligation; don't ask for
            # a trade it would reject
            if effective_balance(state, offer.maker) - quantity < rules.obligation:
                continue
            if quantity * offer.unit_price < rules.penalty_rate * shortfall * remaining:
                return AcceptOffer(offer_id=offer.offer_id, quantity=quantity)
        best = None  # (gain, revenue, parcel_id)
        for i in owned:
            parcel = land.parcels[i]
            if parcel.land_use is not LandUse.AGRICULTURE:
                continue
            gain = _flip_credit_delta(state, player_id, parcel)
            if best is None or _ratio_better(gain, parcel.agri_revenue, best[0], best[1]):
                best = (gain, parcel.agri_revenue, i)
        if best is not None:
            return SetLandUse(parcel_id=best[2], use=LandUse.CONSERVATION)
        return None

    flip = _improving_flip(state, player_id, owned, balance)
    if flip is not None:
        return flip

    surplus = balance - rules.obligation
    if surplus > 0 and not any(
        o.maker == player_id and o.side is Side.SELL and o.status is OfferStatus.OPEN for o in open_offers
    ):
        if last_price is None:
            price = config.reserve_price
        else:
            price = last_price * (100 + config.markup_percent) // 100
        return PostOffer(side=Side.SELL, quantity=surplus, unit_price=price)
    return None


def _improving_flip(state: GameState, player_id: int, owned: list[int], balance: int):
    rules = state.rules
    land = state.landscape
    if rules.bonus_weight == 0:
        # credits are additive, so the cheapest feasible conserved set is
        # computable exactly; walk toward it, conserving before releasing so
        # every intermediate step keeps the obligation covered
        target = minimal_feasible_set(state, player_id)
        current = {i for i in owned if land.parcels[i].land_use is LandUse.CONSERVATION}
        for i in sorted(target - current):
            return SetLandUse(parcel_id=i, use=LandUse.CONSERVATION)
        for i in sorted(current - target):
            return SetLandUse(parcel_id=i, use=LandUse.AGRICULTURE)
        return None
    best = None  # (value, parcel_id, new_use)
    for i in owned:
        parcel = land.parcels[i]
        value = marginal_value(state, player_id, i)
        if value <= 0:
            continue
        new_use = LandUse.AGRICULTURE if parcel.land_use is LandUse.CONSERVATION else LandUse.CONSERVATION
        if new_use is LandUse.AGRICULTURE:
            # positive value can still cross the obligation line when penalties
            # are cheap; the server rejects that, so skip it
            if balance + _flip_credit_delta(state, player_id, parcel) < rules.obligation:
                continue
        if best is None or value > best[0]:
            best = (value, i, new_use)
    if best is None:
        return None
    return SetLandUse(parcel_id=best[1], use=best[2])


# --- broadcast mirror --------------------------------------------------------

class Mirror:
    """Local copy of the game assembled from server broadcasts."""

    def __init__(self):
        self.state: GameState | None = None
        self.book = OrderBook()
        self.last_price: int | None = None
        self.game_over = False

    def apply(self, msg) -> None:
        if isinstance(msg, GameStarted):
            self._load_snapshot(msg.snapshot)
        elif self.state is None:
            return
        elif isinstance(msg, ParcelChanged):
            self.state.landscape.parcels[msg.parcel_id].land_use = msg.use
        elif isinstance(msg, OfferPosted):
            offer = offer_from_doc(msg.offer)
            self.book.offers[offer.offer_id] = offer
            self.book.next_offer_id = max(self.book.next_offer_id, offer.offer_id + 1)
        elif isinstance(msg, OfferCancelled):
            offer = self.book.offers.get(msg.offer_id)
            if offer is not None:
                offer.status = OfferStatus.CANCELLED
        elif isinstance(msg, TradeExecuted):
            trade = trade_from_doc(msg.trade)
            self.book.trades.append(trade)
            self.book.next_trade_seq = max(self.book.next_trade_seq, trade.seq + 1)
            self.last_price = trade.unit_price
            seller = self.state.player(trade.seller)
            buyer = self.state.player(trade.buyer)
            seller.net_traded -= trade.quantity
            buyer.net_traded += trade.quantity
            total = trade.quantity * trade.unit_price
            seller.cash += total
            buyer.cash -= total
            offer = self.book.offers.get(trade.offer_id)
            if offer is not None:
                offer.quantity -= trade.quantity
                if offer.quantity <= 0:
                    offer.status = OfferStatus.FILLED
        elif isinstance(msg, TickReport):
            for entry in msg.reports:
                self.state.player(entry["player_id"]).cash += entry["revenue"] - entry["penalty"]
            self.state.tick = msg.tick
            if self.state.tick >= self.state.rules.total_ticks:
                self.state.phase = Phase.FINISHED
        elif isinstance(msg, BalancesUpdate):
            for entry in msg.balances:
                player = self.state.player(entry["player_id"])
                player.cash = entry["cash"]
                player.net_traded = entry["net_traded"]
        elif isinstance(msg, GameOver):
            self.state.phase = Phase.FINISHED
            self.game_over = True

    def _load_snapshot(self, snapshot: dict) -> None:
        rules = rules_from_doc(snapshot["rules"])
        land_doc = snapshot["landscape"]
        parcels = [
            Parcel(
                parcel_id=p["parcel_id"],
                row=p["row"],
                col=p["col"],
                owner=p["owner"],
                land_use=LandUse(p["land_use"]),
                base_credit=p["base_credit"],
                agri_revenue=p["agri_revenue"],
            )
            for p in land_doc["parcels"]
        ]
        landscape = Landscape(land_doc["width"], land_doc["height"], parcels)
        players = [
            PlayerState(
                player_id=p["player_id"],
                name=p["name"],
                cash=p["cash"],
                net_traded=p["net_traded"],
                owned_parcels={q.parcel_id for q in parcels if q.owner == p["player_id"]},
            )
            for p in snapshot["players"]
        ]
        self.state = GameState(
            rules=rules,
            players=players,
            landscape=landscape,
            tick=snapshot["tick"],
            phase=Phase(snapshot["phase"]),
        )
        self.book = OrderBook()
        for doc in snapshot["offers"]:
            offer = offer_from_doc(doc)
            self.book.offers[offer.offer_id] = offer
            self.book.next_offer_id = max(self.book.next_offer_id, offer.offer_id + 1)
        for doc in snapshot["trades"]:
            trade = trade_from_doc(doc)
            self.book.trades.append(trade)
            self.book.next_trade_seq = max(self.book.next_trade_seq, trade.seq + 1)
        if self.book.trades:
            self.last_price = self.book.trades[-1].unit_price


# --- network client ----------------------------------------------------------

class BotClient:
    """Plays one game over a TCP connection and returns when it ends."""

    def __init__(self, host: str, port: int, game_id: int, config: BotConfig | None = None, name: str = BOT_NAME):
        self.host = host
        self.port = port
        self.game_id = game_id
        self.config = config or BotConfig()
        self.name = name
        self.mirror = Mirror()
        self.player_id: int | None = None
        self.errors_seen: list[Error] = []
        self._client_seq = 0
        self._messages_seen = 0
        self._inbound = asyncio.Event()
        self._writer: asyncio.StreamWriter | None = None

    def _send(self, msg) -> None:
        self._client_seq += 1
        msg.client_seq = self._client_seq
        self._writer.write(encode(msg) + b"\n")

    async def run(self) -> int | None:
        """Play until GameOver or disconnect; returns final cash if known."""
        reader, writer = await asyncio.open_connection(self.host, self.port, limit=2**22)
        self._writer = writer
        try:
            self._send(Hello(name=self.name))
            self._send(JoinGame(game_id=self.game_id))
            decide = asyncio.create_task(self._decide_loop())
            try:
                await self._read_loop(reader)
            finally:
                decide.cancel()
                try:
                    await decide
                except asyncio.CancelledError:
                    pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass
        if self.player_id is not None and self.mirror.state is not None:
            try:
                return self.mirror.state.player(self.player_id).cash
            except GameError:
                return None
        return None

    async def _read_loop(self, reader: asyncio.StreamReader) -> None:
        while True:
            line = await reader.readline()
            if not line:
                return
            if not line.strip():
                continue
            try:
                msg = decode(line.rstrip(b"\r\n"))
            except DecodeError as exc:
                print(f"bot: undecodable server frame ({exc.code})", file=sys.stderr)
                continue
            if isinstance(msg, Welcome):
                self.player_id = msg.player_id
            elif isinstance(msg, Error):
                self.errors_seen.append(msg)
                print(f"bot: server rejected action: {msg.code} ({msg.message})", file=sys.stderr)
            elif isinstance(msg, (LobbyUpdate, ChatRelay)):
                pass
            else:
                self.mirror.apply(msg)
            self._messages_seen += 1
            self._inbound.set()
            if self.mirror.game_over:
                return

    async def _decide_loop(self) -> None:
        sent_at = -1
        period = self.config.decision_period_ms / 1000.0
        while True:
            await asyncio.sleep(period)
            state = self.mirror.state
            if state is None or state.phase is not Phase.RUNNING or self.player_id is None:
                continue
            if self._messages_seen == sent_at:
                # our last action has produced no echo yet; the mirror may be
                # stale, so hold fire until something arrives
                self._inbound.clear()
                try:
                    await asyncio.wait_for(self._inbound.wait(), period)
                except asyncio.TimeoutError:
                    continue
            action = plan_action(
                state, self.player_id, self.mirror.book.open_offers(), self.mirror.last_price, self.config
            )
            if action is not None:
                self._send(action)
                sent_at = self._messages_seen
