"""Open order book for ecopoint credits.

Offers are standing quotes accepted manually by other players; nothing is
matched automatically and nothing is escrowed at post time. Whether a seller
actually has surplus is checked at execution, because production moves with
every land-use change. Executed trades form the session's price series.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import GameError, GameState, Phase, effective_balance


class Side(str, Enum):
    SELL = "sell"
    BUY = "buy"


class OfferStatus(str, Enum):
    OPEN = "open"
    CANCELLED = "cancelled"
    FILLED = "filled"


@dataclass
class Offer:
    offer_id: int
    maker: int
    side: Side
    quantity: int  # remaining
    unit_price: int
    status: OfferStatus = OfferStatus.OPEN


@dataclass
class Trade:
    trade_id: int
    offer_id: int
    seller: int
    buyer: int
    quantity: int
    unit_price: int
    tick_at: int
    seq: int


@dataclass
class OrderBook:
    offers: dict[int, Offer] = field(default_factory=dict)
    trades: list[Trade] = field(default_factory=list)
    next_offer_id: int = 1
    next_trade_seq: int = 1

    def open_offers(self) -> list[Offer]:
        return [o for o in self.offers.values() if o.status is OfferStatus.OPEN]


def post_offer(state: GameState, book: OrderBook, maker: int, side: Side, quantity: int, unit_price: int) -> Offer:
    if state.phase is not Phase.RUNNING:
        raise GameError("game_not_running", "offers can only be posted while the game runs")
    state.player(maker)
    if quantity < 1:
        raise GameError("bad_quantity", f"offer quantity must be >= 1, got {quantity}")
    if unit_price < 0:
        raise GameError("bad_price", f"unit price must be >= 0, got {unit_price}")
    offer = Offer(book.next_offer_id, maker, side, quantity, unit_price)
    book.offers[offer.offer_id] = offer
    book.next_offer_id += 1
    return offer


def cancel_offer(state: GameState, book: OrderBook, player: int, offer_id: int) -> Offer:
    offer = book.offers.get(offer_id)
    if offer is None:
        raise GameError("unknown_offer", f"no offer {offer_id}")
    if offer.maker != player:
        raise GameError("not_maker", f"offer {offer_id} belongs to player {offer.maker}")
    if offer.status is not OfferStatus.OPEN:
        raise GameError("not_open", f"offer {offer_id} is {offer.status.value}")
    offer.status = OfferStatus.CANCELLED
    return offer


def accept_offer(state: GameState, book: OrderBook, taker: int, offer_id: int, quantity: int) -> Trade:
    """Execute up to the offer's remaining quantity against the taker.

    The seller (maker of a sell offer, taker of a buy offer) must remain at or
    above the obligation after the sale: only surplus is sellable. Buyers are
    always eligible; cash may go negative.
    """
    if state.phase is not Phase.RUNNING:
        raise GameError("game_not_running", "trades execute only while the game runs")
    state.player(taker)
    offer = book.offers.get(offer_id)
    if offer is None:
        raise GameError("unknown_offer", f"no offer {offer_id}")
    if offer.status is not OfferStatus.OPEN:
        raise GameError("not_open", f"offer {offer_id} is {offer.status.value}")
    if taker == offer.maker:
        raise GameError("self_trade", "cannot accept your own offer")
    if quantity < 1 or quantity > offer.quantity:
        raise GameError("bad_quantity", f"quantity must be in 1..{offer.quantity}, got {quantity}")
    if offer.side is Side.SELL:
        seller, buyer = offer.maker, taker
    else:
        seller, buyer = taker, offer.maker
    if effective_balance(state, seller) - quantity < state.rules.obligation:
        raise GameError(
            "seller_below_obligation",
            f"player {seller} lacks surplus to sell {quantity} credits",
        )
    seller_state = state.player(seller)
    buyer_state = state.player(buyer)
    seller_state.net_traded -= quantity
    buyer_state.net_traded += quantity
    total = quantity * offer.unit_price
    buyer_state.cash -= total
    seller_state.cash += total
    offer.quantity -= quantity
    if offer.quantity == 0:
        offer.status = OfferStatus.FILLED
    trade = Trade(
        trade_id=book.next_trade_seq,
        offer_id=offer_id,
        seller=seller,
        buyer=buyer,
        quantity=quantity,
        unit_price=offer.unit_price,
        tick_at=state.tick,
        seq=book.next_trade_seq,
    )
    book.trades.append(trade)
    book.next_trade_seq += 1
    return trade


def price_series(book: OrderBook) -> list[tuple[int, int, int, int]]:
    """All executed trades as (seq, tick_at, unit_price, quantity), in seq order."""
    return [(t.seq, t.tick_at, t.unit_price, t.quantity) for t in book.trades]
