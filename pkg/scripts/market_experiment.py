"""Headless sweep: the planner against a noise trader, across rule settings.

Two planners left alone converge to compliance and never trade, so the
interesting opponent is a lawful random player: its releases erode the
planner's adjacency bonus and its stray offers create prices. For each
obligation x bonus-weight cell the script runs several games and records
what the market did: trade volume, volume-weighted price, who bought, and
the penalties both sides paid. Output is one CSV row per game plus one per
executed trade, suitable for a notebook or gnuplot.

    python3 scripts/market_experiment.py --reps 5 --out results/
"""

from __future__ import annotations

import argparse
import csv
import random
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ecotrade.bot import BotConfig, plan_action
from ecotrade.core import AllocationMode, GameError, GameRules, LandUse, Neighborhood, Phase
from ecotrade.market import Side
from ecotrade.protocol import AcceptOffer, PostOffer, SetLandUse
from ecotrade.session import Session, panel_rows

OBLIGATIONS = (4, 8, 12)
BONUS_WEIGHTS = (0, 2)


def cell_rules(obligation: int, bonus_weight: int, ticks: int, seed: int) -> GameRules:
    return GameRules(
        width=6,
        height=6,
        neighborhood=Neighborhood.MOORE8,
        bonus_weight=bonus_weight,
        obligation=obligation,
        penalty_rate=3,
        tick_seconds=1.0,
        total_ticks=ticks,
        base_credit_range=(1, 6),
        agri_revenue_range=(1, 8),
        initial_cash=30,
        allocation_mode=AllocationMode.INTERLEAVED,
        landscape_seed=seed,
    )


def apply(sess: Session, pid: int, action) -> None:
    if isinstance(action, SetLandUse):
        sess.set_land_use(pid, action.parcel_id, action.use)
    elif isinstance(action, PostOffer):
        sess.post_offer(pid, action.side, action.quantity, action.unit_price)
    elif isinstance(action, AcceptOffer):
        sess.accept_offer(pid, action.offer_id, action.quantity)


def noise_action(sess: Session, pid: int, rng: random.Random) -> None:
    """One random lawful intent; rejections are simply dropped."""
    player = sess.state.player(pid)
    roll = rng.random()
    try:
        if roll < 0.45:
            parcel_id = rng.choice(sorted(player.owned_parcels))
            use = rng.choice((LandUse.CONSERVATION, LandUse.AGRICULTURE))
            sess.set_land_use(pid, parcel_id, use)
        elif roll < 0.75:
            sess.post_offer(pid, rng.choice((Side.SELL, Side.BUY)),
                            rng.randint(1, 3), rng.randint(1, 9))
        elif roll < 0.95:
            offers = [o for o in sess.book.open_offers() if o.maker != pid]
            if offers:
                offer = rng.choice(offers)
                sess.accept_offer(pid, offer.offer_id, rng.randint(1, offer.quantity))
        else:
            mine = [o for o in sess.book.open_offers() if o.maker == pid]
            if mine:
                sess.cancel_offer(pid, rng.choice(mine).offer_id)
    except GameError:
        pass


def play_game(rules: GameRules, game_id: int, config: BotConfig, rng: random.Random) -> tuple[Session, int]:
    sess = Session(game_id, rules)
    bot_id = sess.join("planner").player_id
    noise_id = sess.join("noise").player_id
    sess.start(bot_id)
    last_price = None
    while sess.state.phase is Phase.RUNNING:
        for _ in range(rng.randint(1, 2)):
            noise_action(sess, noise_id, rng)
        for _ in range(3):
            if sess.book.trades:
                last_price = sess.book.trades[-1].unit_price
            action = plan_action(sess.state, bot_id, sess.book.open_offers(), last_price, config)
            apply(sess, bot_id, action)
            if action is None:
                break
        sess.tick()
    return sess, bot_id


def summarize(sess: Session, bot_id: int, obligation: int, bonus_weight: int, rep: int) -> dict:
    trades = sess.book.trades
    volume = sum(t.quantity for t in trades)
    turnover = sum(t.quantity * t.unit_price for t in trades)
    penalties = {p.player_id: 0 for p in sess.state.players}
    for row in panel_rows(sess):
        penalties[row["player_id"]] += row["penalty"]
    noise_id = next(p.player_id for p in sess.state.players if p.player_id != bot_id)
    return {
        "obligation": obligation,
        "bonus_weight": bonus_weight,
        "rep": rep,
        "trades": len(trades),
        "volume": volume,
        "vwap": round(turnover / volume, 2) if volume else "",
        "bot_buys": sum(t.quantity for t in trades if t.buyer == bot_id),
        "bot_sells": sum(t.quantity for t in trades if t.seller == bot_id),
        "bot_penalties": penalties[bot_id],
        "noise_penalties": penalties[noise_id],
        "bot_final_cash": sess.state.player(bot_id).cash,
        "noise_final_cash": sess.state.player(noise_id).cash,
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=3, help="games per parameter cell (default 3)")
    ap.add_argument("--ticks", type=int, default=20, help="ticks per game (default 20)")
    ap.add_argument("--seed", type=int, default=1, help="base seed (default 1)")
    ap.add_argument("--markup", type=int, default=20, help="bot ask markup percent (default 20)")
    ap.add_argument("--out", default="experiment_out", metavar="DIR")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = BotConfig(markup_percent=args.markup)
    rng = random.Random(args.seed)

    games = []
    price_points = []
    game_id = 0
    for obligation in OBLIGATIONS:
        for bonus_weight in BONUS_WEIGHTS:
            for rep in range(args.reps):
                game_id += 1
                rules = cell_rules(obligation, bonus_weight, args.ticks, rng.randint(0, 10**6))
                sess, bot_id = play_game(rules, game_id, config, rng)
                games.append(summarize(sess, bot_id, obligation, bonus_weight, rep))
                for t in sess.book.trades:
                    price_points.append({
                        "obligation": obligation,
                        "bonus_weight": bonus_weight,
                        "rep": rep,
                        "tick_at": t.tick_at,
                        "quantity": t.quantity,
                        "unit_price": t.unit_price,
                    })

    with open(out / "games.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(games[0]))
        writer.writeheader()
        writer.writerows(games)
    with open(out / "prices.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["obligation", "bonus_weight", "rep", "tick_at", "quantity", "unit_price"])
        writer.writeheader()
        writer.writerows(price_points)

    print(f"{len(games)} games, {len(price_points)} trades -> {out}/games.csv, {out}/prices.csv")
    by_cell: dict[tuple, list] = {}
    for row in games:
        by_cell.setdefault((row["obligation"], row["bonus_weight"]), []).append(row)
    print(f"{'obligation':>10} {'bonus':>5} {'trades':>7} {'bot_buys':>9} {'bot_pen':>8} {'noise_pen':>10}")
    for (obligation, bonus_weight), rows in sorted(by_cell.items()):
        print(f"{obligation:>10} {bonus_weight:>5} "
              f"{statistics.mean(r['trades'] for r in rows):>7.1f} "
              f"{statistics.mean(r['bot_buys'] for r in rows):>9.1f} "
              f"{statistics.mean(r['bot_penalties'] for r in rows):>8.1f} "
              f"{statistics.mean(r['noise_penalties'] for r in rows):>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
