"""Wire catalog and codec shared by server, bot and browser client.

One message per frame: a single flat UTF-8 JSON object with a ``type``
discriminator and snake_case payload fields. The field names defined here are
the wire contract. Frames travel as WebSocket text messages or as
newline-delimited lines on plain TCP; the codec itself knows nothing about
framing.

Every client message carries ``client_seq`` (strictly increasing per
connection); every server message carries ``server_seq`` (strictly increasing,
gap-free, per connection). ``error`` echoes the offending ``client_seq``.

``decode`` never raises anything but :class:`DecodeError`, whatever the input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields as dataclass_fields
from enum import Enum
from typing import Any, Callable, ClassVar

from .core import AllocationMode, GameRules, LandUse, Neighborhood, Phase
from .market import Offer, OfferStatus, Side, Trade

DEFAULT_PORT = 7654
PROTOCOL_VERSION = 1


class DecodeError(Exception):
    """Structured decode failure; ``code`` is one of malformed_syntax,
    unknown_type, missing_field, bad_field_type."""

    def __init__(self, code: str, message: str, field: str | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.field = field


def _fail(code: str, message: str, field: str | None = None):
    raise DecodeError(code, message, field)


# --- field validators -------------------------------------------------------

Validator = Callable[[Any, str], Any]


def _need_int(value, name):
    if type(value) is not int:  # bools are ints in Python; reject them
        _fail("bad_field_type", f"{name} must be an integer", name)
    return value


def _need_str(value, name):
    if not isinstance(value, str):
        _fail("bad_field_type", f"{name} must be a string", name)
    return value


def _need_number(value, name):
    if type(value) is int or type(value) is float:
        return float(value)
    _fail("bad_field_type", f"{name} must be a number", name)


def _need_enum(enum_cls):
    def check(value, name):
        if not isinstance(value, str):
            _fail("bad_field_type", f"{name} must be a string", name)
        try:
            return enum_cls(value)
        except ValueError:
            _fail("bad_field_type", f"{name} must be one of {[e.value for e in enum_cls]}", name)

    return check


def _need_pair(value, name):
    if not isinstance(value, list) or len(value) != 2:
        _fail("bad_field_type", f"{name} must be a [min, max] pair", name)
    return (_need_int(value[0], name), _need_int(value[1], name))


def _need_obj(schema: dict[str, Validator]):
    def check(value, name):
        if not isinstance(value, dict):
            _fail("bad_field_type", f"{name} must be an object", name)
        for key, validator in schema.items():
            if key not in value:
                _fail("missing_field", f"{name}.{key} missing", f"{name}.{key}")
            validator(value[key], f"{name}.{key}")
        return value

    return check


def _need_list_of(item: Validator):
    def check(value, name):
        if not isinstance(value, list):
            _fail("bad_field_type", f"{name} must be a list", name)
        for i, element in enumerate(value):
            item(element, f"{name}[{i}]")
        return value

    return check


# --- wire documents for domain values --------------------------------------

def rules_to_doc(rules: GameRules) -> dict:
    return {
        "width": rules.width,
        "height": rules.height,
        "neighborhood": rules.neighborhood.value,
        "bonus_weight": rules.bonus_weight,
        "obligation": rules.obligation,
        "penalty_rate": rules.penalty_rate,
        "tick_seconds": rules.tick_seconds,
        "total_ticks": rules.total_ticks,
        "base_credit_range": list(rules.base_credit_range),
        "agri_revenue_range": list(rules.agri_revenue_range),
        "initial_cash": rules.initial_cash,
        "allocation_mode": rules.allocation_mode.value,
        "landscape_seed": rules.landscape_seed,
    }


_RULES_FIELD_VALIDATORS: dict[str, Validator] = {
    "width": _need_int,
    "height": _need_int,
    "neighborhood": _need_enum(Neighborhood),
    "bonus_weight": _need_int,
    "obligation": _need_int,
    "penalty_rate": _need_int,
    "tick_seconds": _need_number,
    "total_ticks": _need_int,
    "base_credit_range": _need_pair,
    "agri_revenue_range": _need_pair,
    "initial_cash": _need_int,
    "allocation_mode": _need_enum(AllocationMode),
    "landscape_seed": _need_int,
}


def rules_from_doc(doc, name: str = "rules", base: GameRules | None = None) -> GameRules:
    """Typed GameRules from a wire object; absent keys fall back to ``base``
    (or the built-in defaults).

    Checks types only; value invariants (grid size, ranges) are enforced when
    a game is created, not at decode time.
    """
    if not isinstance(doc, dict):
        _fail("bad_field_type", f"{name} must be an object", name)
    kwargs = {} if base is None else {f.name: getattr(base, f.name) for f in dataclass_fields(base)}
    for key, validator in _RULES_FIELD_VALIDATORS.items():
        if key in doc:
            kwargs[key] = validator(doc[key], f"{name}.{key}")
    return GameRules(**kwargs)


def offer_to_doc(offer: Offer) -> dict:
    return {
        "offer_id": offer.offer_id,
        "maker": offer.maker,
        "side": offer.side.value,
        "quantity": offer.quantity,
        "unit_price": offer.unit_price,
        "status": offer.status.value,
    }


def offer_from_doc(doc: dict) -> Offer:
    return Offer(
        offer_id=doc["offer_id"],
        maker=doc["maker"],
        side=Side(doc["side"]),
        quantity=doc["quantity"],
        unit_price=doc["unit_price"],
        status=OfferStatus(doc["status"]),
    )


def trade_to_doc(trade: Trade) -> dict:
    return {
        "trade_id": trade.trade_id,
        "offer_id": trade.offer_id,
        "seller": trade.seller,
        "buyer": trade.buyer,
        "quantity": trade.quantity,
        "unit_price": trade.unit_price,
        "tick_at": trade.tick_at,
        "seq": trade.seq,
    }


def trade_from_doc(doc: dict) -> Trade:
    return Trade(
        trade_id=doc["trade_id"],
        offer_id=doc["offer_id"],
        seller=doc["seller"],
        buyer=doc["buyer"],
        quantity=doc["quantity"],
        unit_price=doc["unit_price"],
        tick_at=doc["tick_at"],
        seq=doc["seq"],
    )


_OFFER_SCHEMA = {
    "offer_id": _need_int,
    "maker": _need_int,
    "side": _need_enum(Side),
    "quantity": _need_int,
    "unit_price": _need_int,
    "status": _need_enum(OfferStatus),
}

_TRADE_SCHEMA = {
    "trade_id": _need_int,
    "offer_id": _need_int,
    "seller": _need_int,
    "buyer": _need_int,
    "quantity": _need_int,
    "unit_price": _need_int,
    "tick_at": _need_int,
    "seq": _need_int,
}

_PARCEL_SCHEMA = {
    "parcel_id": _need_int,
    "row": _need_int,
    "col": _need_int,
    "owner": _need_int,
    "land_use": _need_enum(LandUse),
    "base_credit": _need_int,
    "agri_revenue": _need_int,
    "credits": _need_int,
}

_SNAPSHOT_PLAYER_SCHEMA = {
    "player_id": _need_int,
    "name": _need_str,
    "cash": _need_int,
    "net_traded": _need_int,
    "production": _need_int,
}

_LANDSCAPE_SCHEMA = {
    "width": _need_int,
    "height": _need_int,
    "parcels": _need_list_of(_need_obj(_PARCEL_SCHEMA)),
}


def _need_snapshot(value, name):
    _need_obj(
        {
            "game_id": _need_int,
            "tick": _need_int,
            "phase": _need_enum(Phase),
            "landscape": _need_obj(_LANDSCAPE_SCHEMA),
            "players": _need_list_of(_need_obj(_SNAPSHOT_PLAYER_SCHEMA)),
            "offers": _need_list_of(_need_obj(_OFFER_SCHEMA)),
            "trades": _need_list_of(_need_obj(_TRADE_SCHEMA)),
        }
    )(value, name)
    rules_from_doc(value.get("rules"), f"{name}.rules")
    return value


# --- message catalog --------------------------------------------------------

@dataclass
class Hello:
    TYPE: ClassVar[str] = "hello"
    name: str
    version: int = PROTOCOL_VERSION
    client_seq: int = 0


@dataclass
class CreateGame:
    TYPE: ClassVar[str] = "create_game"
    rules: GameRules
    client_seq: int = 0


@dataclass
class JoinGame:
    TYPE: ClassVar[str] = "join_game"
    game_id: int
    client_seq: int = 0


@dataclass
class StartGame:
    TYPE: ClassVar[str] = "start_game"
    client_seq: int = 0


@dataclass
class SetLandUse:
    TYPE: ClassVar[str] = "set_land_use"
    parcel_id: int
    use: LandUse
    client_seq: int = 0


@dataclass
class PostOffer:
    TYPE: ClassVar[str] = "post_offer"
    side: Side
    quantity: int
    unit_price: int
    client_seq: int = 0


@dataclass
class CancelOffer:
    TYPE: ClassVar[str] = "cancel_offer"
    offer_id: int
    client_seq: int = 0


@dataclass
class AcceptOffer:
    TYPE: ClassVar[str] = "accept_offer"
    offer_id: int
    quantity: int
    client_seq: int = 0


@dataclass
class Chat:
    TYPE: ClassVar[str] = "chat"
    text: str
    client_seq: int = 0


@dataclass
class LeaveGame:
    TYPE: ClassVar[str] = "leave_game"
    client_seq: int = 0


@dataclass
class Welcome:
    TYPE: ClassVar[str] = "welcome"
    player_id: int
    server_seq: int = 0


@dataclass
class GameCreated:
    TYPE: ClassVar[str] = "game_created"
    game_id: int
    rules: GameRules
    server_seq: int = 0


@dataclass
class LobbyUpdate:
    TYPE: ClassVar[str] = "lobby_update"
    game_id: int
    players: list  # [{player_id, name}]
    server_seq: int = 0


@dataclass
class GameStarted:
    TYPE: ClassVar[str] = "game_started"
    snapshot: dict
    server_seq: int = 0


@dataclass
class ParcelChanged:
    TYPE: ClassVar[str] = "parcel_changed"
    parcel_id: int
    use: LandUse
    affected_credit_values: list  # [{parcel_id, credits}] for parcel + neighbors
    server_seq: int = 0


@dataclass
class BalancesUpdate:
    TYPE: ClassVar[str] = "balances_update"
    balances: list  # [{player_id, production, net_traded, cash}]
    server_seq: int = 0


@dataclass
class TickReport:
    TYPE: ClassVar[str] = "tick_report"
    tick: int
    reports: list  # [{player_id, revenue, penalty}]
    server_seq: int = 0


@dataclass
class OfferPosted:
    TYPE: ClassVar[str] = "offer_posted"
    offer: dict
    server_seq: int = 0


@dataclass
class OfferCancelled:
    TYPE: ClassVar[str] = "offer_cancelled"
    offer_id: int
    server_seq: int = 0


@dataclass
class TradeExecuted:
    TYPE: ClassVar[str] = "trade_executed"
    trade: dict
    server_seq: int = 0


@dataclass
class ChatRelay:
    TYPE: ClassVar[str] = "chat_relay"
    player_id: int
    text: str
    server_seq: int = 0


@dataclass
class GameOver:
    TYPE: ClassVar[str] = "game_over"
    scores: list  # [{player_id, cash}] ranked
    server_seq: int = 0


@dataclass
class Error:
    TYPE: ClassVar[str] = "error"
    code: str
    message: str
    client_seq: int
    server_seq: int = 0


def _rules_field(value, name):
    return rules_from_doc(value, name)


_CREDIT_VALUE_SCHEMA = {"parcel_id": _need_int, "credits": _need_int}
_LOBBY_PLAYER_SCHEMA = {"player_id": _need_int, "name": _need_str}
_BALANCE_SCHEMA = {"player_id": _need_int, "production": _need_int, "net_traded": _need_int, "cash": _need_int}
_REPORT_SCHEMA = {"player_id": _need_int, "revenue": _need_int, "penalty": _need_int}
_SCORE_SCHEMA = {"player_id": _need_int, "cash": _need_int}

# message class -> {field: (validator, required)}
_CATALOG: dict[type, dict[str, tuple[Validator, bool]]] = {
    Hello: {"name": (_need_str, True), "version": (_need_int, False), "client_seq": (_need_int, True)},
    CreateGame: {"rules": (_rules_field, True), "client_seq": (_need_int, True)},
    JoinGame: {"game_id": (_need_int, True), "client_seq": (_need_int, True)},
    StartGame: {"client_seq": (_need_int, True)},
    SetLandUse: {"parcel_id": (_need_int, True), "use": (_need_enum(LandUse), True), "client_seq": (_need_int, True)},
    PostOffer: {
        "side": (_need_enum(Side), True),
        "quantity": (_need_int, True),
        "unit_price": (_need_int, True),
        "client_seq": (_need_int, True),
    },
    CancelOffer: {"offer_id": (_need_int, True), "client_seq": (_need_int, True)},
    AcceptOffer: {"offer_id": (_need_int, True), "quantity": (_need_int, True), "client_seq": (_need_int, True)},
    Chat: {"text": (_need_str, True), "client_seq": (_need_int, True)},
    LeaveGame: {"client_seq": (_need_int, True)},
    Welcome: {"player_id": (_need_int, True), "server_seq": (_need_int, True)},
    GameCreated: {"game_id": (_need_int, True), "rules": (_rules_field, True), "server_seq": (_need_int, True)},
    LobbyUpdate: {
        "game_id": (_need_int, True),
        "players": (_need_list_of(_need_obj(_LOBBY_PLAYER_SCHEMA)), True),
        "server_seq": (_need_int, True),
    },
    GameStarted: {"snapshot": (_need_snapshot, True), "server_seq": (_need_int, True)},
    ParcelChanged: {
        "parcel_id": (_need_int, True),
        "use": (_need_enum(LandUse), True),
        "affected_credit_values": (_need_list_of(_need_obj(_CREDIT_VALUE_SCHEMA)), True),
        "server_seq": (_need_int, True),
    },
    BalancesUpdate: {"balances": (_need_list_of(_need_obj(_BALANCE_SCHEMA)), True), "server_seq": (_need_int, True)},
    TickReport: {
        "tick": (_need_int, True),
        "reports": (_need_list_of(_need_obj(_REPORT_SCHEMA)), True),
        "server_seq": (_need_int, True),
    },
    OfferPosted: {"offer": (_need_obj(_OFFER_SCHEMA), True), "server_seq": (_need_int, True)},
    OfferCancelled: {"offer_id": (_need_int, True), "server_seq": (_need_int, True)},
    TradeExecuted: {"trade": (_need_obj(_TRADE_SCHEMA), True), "server_seq": (_need_int, True)},
    ChatRelay: {"player_id": (_need_int, True), "text": (_need_str, True), "server_seq": (_need_int, True)},
    GameOver: {"scores": (_need_list_of(_need_obj(_SCORE_SCHEMA)), True), "server_seq": (_need_int, True)},
    Error: {
        "code": (_need_str, True),
        "message": (_need_str, True),
        "client_seq": (_need_int, True),
        "server_seq": (_need_int, True),
    },
}

CLIENT_TYPES = (Hello, CreateGame, JoinGame, StartGame, SetLandUse, PostOffer, CancelOffer, AcceptOffer, Chat, LeaveGame)
SERVER_TYPES = (
    Welcome,
    GameCreated,
    LobbyUpdate,
    GameStarted,
    ParcelChanged,
    BalancesUpdate,
    TickReport,
    OfferPosted,
    OfferCancelled,
    TradeExecuted,
    ChatRelay,
    GameOver,
    Error,
)

_BY_TYPE = {cls.TYPE: cls for cls in _CATALOG}

Message = Any  # any of the catalog dataclasses


def _to_wire(value):
    if isinstance(value, GameRules):
        return rules_to_doc(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return [_to_wire(v) for v in value]
    if isinstance(value, list):
        return [_to_wire(v) for v in value]
    if isinstance(value, dict):
        return {k: _to_wire(v) for k, v in value.items()}
    return value


def encode(message: Message) -> bytes:
    """One UTF-8 JSON object, no framing bytes inside (newlines are escaped)."""
    doc = {"type": message.TYPE}
    for f in dataclass_fields(message):
        doc[f.name] = _to_wire(getattr(message, f.name))
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def decode(data: bytes | bytearray | str) -> Message:
    """Inverse of :func:`encode` on its image; structured errors otherwise.

    When the frame parsed far enough to carry an integer client_seq, the raised
    DecodeError gets a ``client_seq`` attribute so error replies can echo it.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError:
            _fail("malformed_syntax", "frame is not valid UTF-8")
    else:
        text = data
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, RecursionError, ValueError):
        _fail("malformed_syntax", "frame is not valid JSON")
    if not isinstance(doc, dict):
        _fail("malformed_syntax", "frame must be a JSON object")
    try:
        return _decode_doc(doc)
    except DecodeError as exc:
        seq = doc.get("client_seq")
        if type(seq) is int:
            exc.client_seq = seq
        raise


def _decode_doc(doc: dict) -> Message:
    if "type" not in doc:
        _fail("missing_field", "type field missing", "type")
    kind = doc["type"]
    if not isinstance(kind, str) or kind not in _BY_TYPE:
        _fail("unknown_type", f"unknown message type {kind!r}")
    cls = _BY_TYPE[kind]
    kwargs = {}
    for name, (validator, required) in _CATALOG[cls].items():
        if name not in doc:
            if required:
                _fail("missing_field", f"{name} missing in {kind}", name)
            continue  # optional: dataclass default applies
        kwargs[name] = validator(doc[name], name)
    return cls(**kwargs)
