"""Shared helpers: small game builders and a random scripted-session driver."""

from __future__ import annotations

import random

from ecotrade.core import (
    AllocationMode,
    GameError,
    GameRules,
    LandUse,
    Landscape,
    Neighborhood,
    Parcel,
)
from ecotrade.market import Side
from ecotrade.session import Session

# scorecard lines collected by tests/test_acceptance.py, echoed after the run
SCORECARD: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if SCORECARD:
        terminalreporter.section("acceptance scorecard")
        for line in SCORECARD:
            terminalreporter.line(line)


def quick_rules(**overrides) -> GameRules:
    """Small fast defaults for tests; override anything per test."""
    base = dict(
        width=4,
        height=4,
        neighborhood=Neighborhood.MOORE8,
        bonus_weight=2,
        obligation=6,
        penalty_rate=3,
        tick_seconds=1.0,
        total_ticks=5,
        base_credit_range=(1, 9),
        agri_revenue_range=(1, 9),
        initial_cash=0,
        allocation_mode=AllocationMode.INTERLEAVED,
        landscape_seed=1,
    )
    base.update(overrides)
    return GameRules(**base)


def started_session(names=("alice", "bob"), rules: GameRules | None = None, game_id: int = 1) -> Session:
    sess = Session(game_id, rules or quick_rules())
    players = [sess.join(n) for n in names]
    sess.start(players[0].player_id)
    return sess


def build_landscape(rng: random.Random, width: int, height: int, conserve_chance: float = 0.5) -> Landscape:
    """Direct landscape with random values and uses; bypasses generation."""
    parcels = []
    for i in range(width * height):
        parcels.append(
            Parcel(
                parcel_id=i,
                row=i // width,
                col=i % width,
                owner=1 + (i % 2),
                land_use=LandUse.CONSERVATION if rng.random() < conserve_chance else LandUse.AGRICULTURE,
                base_credit=rng.randint(0, 9),
                agri_revenue=rng.randint(0, 9),
            )
        )
    return Landscape(width, height, parcels)


def random_rules(rng: random.Random) -> GameRules:
    """Random rules that are always startable for 2-4 players."""
    width = rng.randint(3, 8)
    height = rng.randint(3, 8)
    mode = rng.choice(list(AllocationMode))
    base_lo = rng.randint(1, 3)
    base_hi = base_lo + rng.randint(0, 6)
    # keep the obligation reachable for the smallest possible allotment at 4 players
    n = width * height
    if mode is AllocationMode.INTERLEAVED:
        min_share = n // 4
    else:
        share = -(-n // 4)
        min_share = n - share * 3
    min_share = max(1, min_share)
    return GameRules(
        width=width,
        height=height,
        neighborhood=rng.choice(list(Neighborhood)),
        bonus_weight=rng.randint(0, 3),
        obligation=rng.randint(0, max(1, min_share * base_lo)),
        penalty_rate=rng.randint(0, 5),
        tick_seconds=float(rng.choice((1, 2, 30))),
        total_ticks=rng.randint(10, 50),
        base_credit_range=(base_lo, base_hi),
        agri_revenue_range=(rng.randint(0, 2), rng.randint(3, 9)),
        initial_cash=rng.randint(0, 40),
        allocation_mode=mode,
        landscape_seed=rng.randint(0, 10**6),
    )


def random_action(sess: Session, rng: random.Random) -> None:
    """One random intent from a random player; rejections are expected and fine."""
    state = sess.state
    player = rng.choice(state.players)
    pid = player.player_id
    kind = rng.randrange(6)
    try:
        if kind in (0, 1):  # land-use flip
            parcel_id = rng.choice(sorted(player.owned_parcels))
            use = rng.choice((LandUse.CONSERVATION, LandUse.AGRICULTURE))
            sess.set_land_use(pid, parcel_id, use)
        elif kind == 2:
            side = rng.choice((Side.SELL, Side.BUY))
            sess.post_offer(pid, side, rng.randint(1, 4), rng.randint(0, 12))
        elif kind == 3:
            open_offers = sess.book.open_offers()
            if open_offers:
                sess.cancel_offer(pid, rng.choice(open_offers).offer_id)
        elif kind == 4:
            open_offers = [o for o in sess.book.open_offers() if o.maker != pid]
            if open_offers:
                offer = rng.choice(open_offers)
                sess.accept_offer(pid, offer.offer_id, rng.randint(1, offer.quantity))
        else:
            sess.chat(pid, rng.choice(("hi", "selling cheap", "need credits")))
    except GameError:
        pass  # invalid intents must be rejected cleanly; that's part of the point


def valid_player_counts(rules: GameRules) -> list[int]:
    """2-4 player counts the allocation mode can actually seat on this grid."""
    n = rules.width * rules.height
    counts = []
    for count in (2, 3, 4):
        if rules.allocation_mode is AllocationMode.BLOCKS:
            share = -(-n // count)
            if share * (count - 1) >= n:
                continue
        if n >= count:
            counts.append(count)
    return counts


def scripted_session(rng: random.Random, game_id: int = 1, on_event=None) -> Session:
    """Run a full random game to completion at the session level.

    on_event, when given, is called after every session call so the caller can
    observe the log as it grows (e.g. to record per-seq digests).
    """
    rules = random_rules(rng)
    sess = Session(game_id, rules)
    names = ["p1", "p2", "p3", "p4"][: rng.choice(valid_player_counts(rules))]
    notify = on_event or (lambda s: None)
    players = []
    for name in names:
        players.append(sess.join(name))
        notify(sess)
    sess.start(players[0].player_id)
    notify(sess)
    while sess.state.phase.value == "running":
        for _ in range(rng.randint(0, 5)):
            random_action(sess, rng)
            notify(sess)
        sess.tick()
        notify(sess)
    return sess
