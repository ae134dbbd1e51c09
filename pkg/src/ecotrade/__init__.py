"""EcoTRADE: a multiplayer trading game for biodiversity credits.

Players manage parcels of land, earn conservation credits whose yield grows
next to other conserved parcels, and trade surplus credits on an open order
book to meet a per-player obligation. The package ships the authoritative
game server, a protocol-speaking computer player, deterministic replay of
session logs, and results export for experiment analysis.
"""

__version__ = "0.1.0"

from .core import (
    AllocationMode,
    GameError,
    GameRules,
    GameState,
    LandUse,
    Landscape,
    Neighborhood,
    Parcel,
    Phase,
    PlayerState,
)
from .market import Offer, OfferStatus, OrderBook, Side, Trade
from .session import Session

__all__ = [
    "AllocationMode",
    "GameError",
    "GameRules",
    "GameState",
    "LandUse",
    "Landscape",
    "Neighborhood",
    "Offer",
    "OfferStatus",
    "OrderBook",
    "Parcel",
    "Phase",
    "PlayerState",
    "Session",
    "Side",
    "Trade",
    "__version__",
]
