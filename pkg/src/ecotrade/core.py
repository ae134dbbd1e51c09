"""Deterministic game-state machine: landscape, credit production, compliance, ticks.

All quantities are integers (ecopoints and money units) so every computation is
exact and replayable. Nothing in this module touches the network or the clock;
mutating operations validate fully before they touch state, so a rejected
request leaves the state unchanged.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum


class LandUse(str, Enum):
    CONSERVATION = "conservation"
    AGRICULTURE = "agriculture"


class Neighborhood(str, Enum):
    MOORE8 = "moore8"
    VON_NEUMANN4 = "von_neumann4"


class AllocationMode(str, Enum):
    INTERLEAVED = "interleaved"
    BLOCKS = "blocks"


class Phase(str, Enum):
    LOBBY = "lobby"
    RUNNING = "running"
    FINISHED = "finished"


class GameError(Exception):
    """Rule violation or bad request; ``code`` doubles as the wire error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


_OFFSETS = {
    Neighborhood.MOORE8: ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)),
    Neighborhood.VON_NEUMANN4: ((-1, 0), (0, -1), (0, 1), (1, 0)),
}


@dataclass
class Parcel:
    parcel_id: int
    row: int
    col: int
    owner: int
    land_use: LandUse
    base_credit: int
    agri_revenue: int


@dataclass
class Landscape:
    """Dense row-major grid; ``parcels[i].parcel_id == i``."""

    width: int
    height: int
    parcels: list[Parcel]

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def at(self, row: int, col: int) -> Parcel:
        if not self.in_bounds(row, col):
            raise GameError("out_of_bounds", f"coord ({row}, {col}) outside {self.width}x{self.height} grid")
        return self.parcels[row * self.width + col]


@dataclass
class GameRules:
    """Tunable parameters of one session. Field names are also the rules-file keys."""

    width: int = 10
    height: int = 10
    neighborhood: Neighborhood = Neighborhood.MOORE8
    bonus_weight: int = 2
    obligation: int = 20
    penalty_rate: int = 3
    tick_seconds: float = 10.0
    total_ticks: int = 60
    base_credit_range: tuple[int, int] = (1, 9)
    agri_revenue_range: tuple[int, int] = (1, 9)
    initial_cash: int = 0
    allocation_mode: AllocationMode = AllocationMode.INTERLEAVED
    landscape_seed: int = 1


def validate_rules(rules: GameRules) -> None:
    def bad(reason: str):
        return GameError("invalid_rules", reason)

    if rules.width < 1 or rules.height < 1:
        raise bad(f"grid must be at least 1x1, got {rules.width}x{rules.height}")
    for name in ("bonus_weight", "obligation", "penalty_rate", "initial_cash"):
        if getattr(rules, name) < 0:
            raise bad(f"{name} must be >= 0")
    if rules.tick_seconds < 1:
        raise bad("tick_seconds must be >= 1")
    if rules.total_ticks < 1:
        raise bad("total_ticks must be >= 1")
    for name in ("base_credit_range", "agri_revenue_range"):
        lo, hi = getattr(rules, name)
        if lo < 0 or lo > hi:
            raise bad(f"{name} must satisfy 0 <= min <= max, got ({lo}, {hi})")


@dataclass
class PlayerState:
    player_id: int
    name: str
    cash: int = 0
    net_traded: int = 0
    owned_parcels: set[int] = field(default_factory=set)


@dataclass
class GameState:
    rules: GameRules
    players: list[PlayerState] = field(default_factory=list)
    landscape: Landscape | None = None  # None until the game starts
    tick: int = 0
    phase: Phase = Phase.LOBBY

    def player(self, player_id: int) -> PlayerState:
        for p in self.players:
            if p.player_id == player_id:
                return p
        raise GameError("unknown_player", f"no player {player_id} in this game")


def neighbors(landscape: Landscape, coord: tuple[int, int], neighborhood: Neighborhood) -> set[tuple[int, int]]:
    """In-bounds adjacent coords; no wraparound, so edges and corners get fewer."""
    row, col = coord
    if not landscape.in_bounds(row, col):
        raise GameError("out_of_bounds", f"coord {coord} outside grid")
    return {
        (row + dr, col + dc)
        for dr, dc in _OFFSETS[neighborhood]
        if landscape.in_bounds(row + dr, col + dc)
    }


def credits_if_conserved(landscape: Landscape, coord: tuple[int, int], rules: GameRules) -> int:
    """Credit value the parcel yields (or would yield) under conservation."""
    parcel = landscape.at(*coord)
    conserved = sum(
        1
        for r, c in neighbors(landscape, coord, rules.neighborhood)
        if landscape.at(r, c).land_use is LandUse.CONSERVATION
    )
    return parcel.base_credit + rules.bonus_weight * conserved


def parcel_credits(landscape: Landscape, coord: tuple[int, int], rules: GameRules) -> int:
    """Current credit production of one parcel: zero unless conserved."""
    if landscape.at(*coord).land_use is LandUse.AGRICULTURE:
        return 0
    return credits_if_conserved(landscape, coord, rules)


def generate_landscape(rules: GameRules, player_ids: list[int]) -> Landscape:
    """Build the starting landscape: values drawn from the seeded generator,
    ownership per the allocation mode, and initial land uses chosen so every
    player starts at or above the obligation with minimal forgone revenue.

    Pure function of its arguments: same rules and players, same landscape.
    """
    validate_rules(rules)
    if not player_ids:
        raise GameError("invalid_rules", "at least one player required")
    n = rules.width * rules.height
    count = len(player_ids)
    if n < count:
        raise GameError("invalid_rules", f"{n} parcels cannot be split among {count} players")
    if rules.allocation_mode is AllocationMode.BLOCKS:
        share = math.ceil(n / count)
        if share * (count - 1) >= n:
            raise GameError("invalid_rules", f"block allocation leaves a player without parcels ({n} parcels, {count} players)")

    def owner_of(i: int) -> int:
        if rules.allocation_mode is AllocationMode.INTERLEAVED:
            return player_ids[i % count]
        return player_ids[i // math.ceil(n / count)]

    rng = random.Random(rules.landscape_seed)
    cmin, cmax = rules.base_credit_range
    rmin, rmax = rules.agri_revenue_range
    parcels = []
    for i in range(n):
        parcels.append(
            Parcel(
                parcel_id=i,
                row=i // rules.width,
                col=i % rules.width,
                owner=owner_of(i),
                land_use=LandUse.AGRICULTURE,
                base_credit=rng.randint(cmin, cmax),
                agri_revenue=rng.randint(rmin, rmax),
            )
        )
    landscape = Landscape(rules.width, rules.height, parcels)
    _conserve_until_compliant(landscape, rules, player_ids)
    return landscape


def _conserve_until_compliant(landscape: Landscape, rules: GameRules, player_ids: list[int]) -> None:
    # Players processed in join order; conservation only ever raises production,
    # so earlier players cannot be pushed back below the obligation.
    for pid in player_ids:
        owned = [p for p in landscape.parcels if p.owner == pid]
        queue = sorted(owned, key=lambda p: (p.agri_revenue, p.parcel_id))

        def production() -> int:
            return sum(parcel_credits(landscape, (p.row, p.col), rules) for p in owned)

        for parcel in queue:
            if production() >= rules.obligation:
                break
            parcel.land_use = LandUse.CONSERVATION
        if production() < rules.obligation:
            raise GameError(
                "invalid_rules",
                f"player {pid} cannot reach obligation {rules.obligation} even conserving everything",
            )


def player_production(state: GameState, player_id: int) -> int:
    player = state.player(player_id)
    land = state.landscape
    if land is None:
        return 0
    return sum(parcel_credits(land, (land.parcels[i].row, land.parcels[i].col), state.rules) for i in player.owned_parcels)


def effective_balance(state: GameState, player_id: int) -> int:
    """Credits the player holds against the obligation: production plus net purchases."""
    return player_production(state, player_id) + state.player(player_id).net_traded


def apply_land_use_change(state: GameState, player_id: int, parcel_id: int, new_use: LandUse) -> list[tuple[int, int]]:
    """Flip one owned parcel's use; effective immediately.

    Returns the recomputed credit values of the changed parcel and its
    neighbors as (parcel_id, credits) pairs, or an empty list for a silent
    no-op (parcel already in the requested use). A change that would drop the
    acting player's effective balance below the obligation is rejected with
    state untouched; pushing *other* players below their obligation is lawful.
    """
    if state.phase is not Phase.RUNNING:
        raise GameError("game_not_running", "land use can only change while the game runs")
    player = state.player(player_id)
    if parcel_id not in player.owned_parcels:
        raise GameError("not_owner", f"player {player_id} does not own parcel {parcel_id}")
    land = state.landscape
    parcel = land.parcels[parcel_id]
    if parcel.land_use is new_use:
        return []
    coord = (parcel.row, parcel.col)
    own_conserved_adjacent = sum(
        1
        for r, c in neighbors(land, coord, state.rules.neighborhood)
        if land.at(r, c).owner == player_id and land.at(r, c).land_use is LandUse.CONSERVATION
    )
    if new_use is LandUse.AGRICULTURE:
        delta = -parcel_credits(land, coord, state.rules) - state.rules.bonus_weight * own_conserved_adjacent
    else:
        delta = credits_if_conserved(land, coord, state.rules) + state.rules.bonus_weight * own_conserved_adjacent
    if effective_balance(state, player_id) + delta < state.rules.obligation:
        raise GameError(
            "would_violate_own_obligation",
            f"change would leave player {player_id} below obligation; buy credits first",
        )
    parcel.land_use = new_use
    affected = [(parcel_id, parcel_credits(land, coord, state.rules))]
    for r, c in sorted(neighbors(land, coord, state.rules.neighborhood)):
        other = land.at(r, c)
        affected.append((other.parcel_id, parcel_credits(land, (r, c), state.rules)))
    return affected


def tick_breakdown(state: GameState) -> list[dict]:
    """Per-player accounting for one tick: agricultural revenue, shortfall, penalty.

    Pure; does not advance the tick. Ordered like ``state.players``.
    """
    land = state.landscape
    rows = []
    for player in state.players:
        revenue = sum(
            land.parcels[i].agri_revenue
            for i in player.owned_parcels
            if land.parcels[i].land_use is LandUse.AGRICULTURE
        )
        production = player_production(state, player.player_id)
        shortfall = max(0, state.rules.obligation - (production + player.net_traded))
        rows.append(
            {
                "player_id": player.player_id,
                "revenue": revenue,
                "penalty": state.rules.penalty_rate * shortfall,
                "shortfall": shortfall,
                "production": production,
                "net_traded": player.net_traded,
            }
        )
    return rows


def accrue_tick(state: GameState) -> GameState:
    """Advance one accounting period: revenue in, penalties out, tick forward.

    Only cash, tick and possibly phase change; landscape and trades are untouched.
    """
    if state.phase is not Phase.RUNNING:
        raise GameError("game_not_running", "ticks accrue only while the game runs")
    for row in tick_breakdown(state):
        state.player(row["player_id"]).cash += row["revenue"] - row["penalty"]
    state.tick += 1
    if state.tick >= state.rules.total_ticks:
        state.phase = Phase.FINISHED
    return state


def final_scores(state: GameState) -> list[tuple[int, int]]:
    """Ranking by cash, highest first; ties broken by lower player_id."""
    if state.phase is not Phase.FINISHED:
        raise GameError("game_not_finished", "scores are final only after the last tick")
    return [(p.player_id, p.cash) for p in sorted(state.players, key=lambda p: (-p.cash, p.player_id))]


def start_game_state(state: GameState) -> GameState:
    """Generate the landscape and entitlements and move Lobby -> Running."""
    if state.phase is not Phase.LOBBY:
        raise GameError("already_started", "game already started")
    if not state.players:
        raise GameError("invalid_rules", "cannot start with no players")
    ids = [p.player_id for p in state.players]
    state.landscape = generate_landscape(state.rules, ids)
    for player in state.players:
        player.cash = state.rules.initial_cash
        player.net_traded = 0
        player.owned_parcels = {p.parcel_id for p in state.landscape.parcels if p.owner == player.player_id}
    state.tick = 0
    state.phase = Phase.RUNNING
    return state
