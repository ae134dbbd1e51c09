/** Client view model and the reducer that folds server messages into it.
 *
 * Game state is server-authoritative: every field below changes only inside
 * reduce(), in response to a decoded server message. The sole arithmetic the
 * client performs is applying tick_report revenue/penalty deltas to cash,
 * because the server sends absolute balances with every other cash movement.
 * Client-only concerns (pending intents, notices) have their own small
 * transition helpers so the render layer never mutates anything.
 */

import type {
  Balance,
  OfferDoc,
  ParcelDoc,
  Rules,
  Score,
  ServerMessage,
  Snapshot,
  TickEntry,
} from "./protocol.js";

export interface PlayerView {
  player_id: number;
  name: string;
  cash: number;
  production: number;
  net_traded: number;
  last_revenue: number;
  last_penalty: number;
}

export interface Notice {
  id: number;
  code: string;
  message: string;
  client_seq: number;
}

export interface PendingIntent {
  client_seq: number;
  kind: "set_land_use" | "post_offer" | "accept_offer" | "cancel_offer";
  parcel_id?: number;
  offer_id?: number;
}

export type Phase = "connecting" | "lobby" | "running" | "finished";

export interface Model {
  phase: Phase;
  player_id: number | null;
  game_id: number | null;
  rules: Rules | null;
  lobby: { player_id: number; name: string }[];
  parcels: ParcelDoc[];
  gridWidth: number;
  gridHeight: number;
  players: PlayerView[];
  offers: OfferDoc[];
  prices: number[];
  tick: number;
  chatLog: { player_id: number; text: string }[];
  scores: Score[] | null;
  notices: Notice[];
  pending: PendingIntent[];
  lastServerSeq: number;
  desynced: boolean;
  nextNoticeId: number;
}

export function initialModel(): Model {
  return {
    phase: "connecting",
    player_id: null,
    game_id: null,
    rules: null,
    lobby: [],
    parcels: [],
    gridWidth: 0,
    gridHeight: 0,
    players: [],
    offers: [],
    prices: [],
    tick: 0,
    chatLog: [],
    scores: null,
    notices: [],
    pending: [],
    lastServerSeq: 0,
    desynced: false,
    nextNoticeId: 1,
  };
}

function playerView(doc: { player_id: number; name: string; cash: number; production: number; net_traded: number }): PlayerView {
  return { ...doc, last_revenue: 0, last_penalty: 0 };
}

function loadSnapshot(model: Model, snap: Snapshot): Model {
  return {
    ...model,
    phase: snap.phase === "finished" ? "finished" : "running",
    game_id: snap.game_id,
    rules: snap.rules,
    parcels: snap.landscape.parcels.map((p) => ({ ...p })),
    gridWidth: snap.landscape.width,
    gridHeight: snap.landscape.height,
    players: snap.players.map(playerView),
    offers: snap.offers.map((o) => ({ ...o })),
    prices: snap.trades.map((t) => t.unit_price),
    tick: snap.tick,
    pending: [],
    desynced: false,
  };
}

function applyBalances(players: PlayerView[], balances: Balance[]): PlayerView[] {
  const byId = new Map(balances.map((b) => [b.player_id, b]));
  return players.map((p) => {
    const b = byId.get(p.player_id);
    return b ? { ...p, cash: b.cash, production: b.production, net_traded: b.net_traded } : p;
  });
}

function applyTick(players: PlayerView[], reports: TickEntry[]): PlayerView[] {
  const byId = new Map(reports.map((r) => [r.player_id, r]));
  return players.map((p) => {
    const r = byId.get(p.player_id);
    if (!r) return p;
    return { ...p, cash: p.cash + r.revenue - r.penalty, last_revenue: r.revenue, last_penalty: r.penalty };
  });
}

/** Fold one server message into the model; pure, returns a fresh model. */
export function reduce(model: Model, msg: ServerMessage): Model {
  if (msg.server_seq !== model.lastServerSeq + 1) {
    // a gap means missed broadcasts; flag it so the transport resyncs with
    // a fresh snapshot instead of silently diverging
    return { ...model, desynced: true };
  }
  model = { ...model, lastServerSeq: msg.server_seq };
  switch (msg.type) {
    case "welcome":
      return { ...model, player_id: msg.player_id, phase: model.phase === "connecting" ? "lobby" : model.phase };
    case "game_created":
      return { ...model, game_id: msg.game_id, rules: msg.rules };
    case "lobby_update":
      return { ...model, game_id: msg.game_id, lobby: msg.players.slice() };
    case "game_started":
      return loadSnapshot(model, msg.snapshot);
    case "parcel_changed": {
      const credits = new Map(msg.affected_credit_values.map((c) => [c.parcel_id, c.credits]));
      const parcels = model.parcels.map((p) => {
        const next = { ...p };
        if (p.parcel_id === msg.parcel_id) next.land_use = msg.use;
        const value = credits.get(p.parcel_id);
        if (value !== undefined) next.credits = value;
        return next;
      });
      const pending = model.pending.filter(
        (q) => !(q.kind === "set_land_use" && q.parcel_id === msg.parcel_id),
      );
      // land-use changes move no cash, so no balances frame follows; recompute
      // production from the (server-confirmed) parcel credits instead
      const players = model.players.map((p) => ({
        ...p,
        production: parcels
          .filter((q) => q.owner === p.player_id && q.land_use === "conservation")
          .reduce((sum, q) => sum + q.credits, 0),
      }));
      return { ...model, parcels, pending, players };
    }
    case "balances_update":
      return { ...model, players: applyBalances(model.players, msg.balances) };
    case "tick_report":
      return { ...model, tick: msg.tick, players: applyTick(model.players, msg.reports) };
    case "offer_posted": {
      const pending =
        msg.offer.maker === model.player_id
          ? model.pending.filter((q) => q.kind !== "post_offer")
          : model.pending;
      return { ...model, offers: [...model.offers, { ...msg.offer }], pending };
    }
    case "offer_cancelled": {
      const offers = model.offers.filter((o) => o.offer_id !== msg.offer_id);
      const pending = model.pending.filter(
        (q) => !(q.kind === "cancel_offer" && q.offer_id === msg.offer_id),
      );
      return { ...model, offers, pending };
    }
    case "trade_executed": {
      const t = msg.trade;
      const offers = model.offers
        .map((o) => (o.offer_id === t.offer_id ? { ...o, quantity: o.quantity - t.quantity } : o))
        .filter((o) => o.quantity > 0);
      const mine = t.buyer === model.player_id || t.seller === model.player_id;
      const pending = mine
        ? model.pending.filter((q) => !(q.kind === "accept_offer" && q.offer_id === t.offer_id))
        : model.pending;
      return { ...model, offers, prices: [...model.prices, t.unit_price], pending };
    }
    case "chat_relay":
      return { ...model, chatLog: [...model.chatLog, { player_id: msg.player_id, text: msg.text }] };
    case "game_over":
      return { ...model, phase: "finished", scores: msg.scores.slice() };
    case "error": {
      const notice: Notice = {
        id: model.nextNoticeId,
        code: msg.code,
        message: msg.message,
        client_seq: msg.client_seq,
      };
      const pending = model.pending.filter((q) => q.client_seq !== msg.client_seq);
      return {
        ...model,
        notices: [...model.notices, notice],
        nextNoticeId: model.nextNoticeId + 1,
        pending,
      };
    }
  }
}

// --- client-side transitions (never game state) -----------------------------

export function addPending(model: Model, intent: PendingIntent): Model {
  return { ...model, pending: [...model.pending, intent] };
}

export function dismissNotice(model: Model, id: number): Model {
  return { ...model, notices: model.notices.filter((n) => n.id !== id) };
}

// --- derived values ---------------------------------------------------------

export function shortfall(model: Model, player_id: number): number {
  const player = model.players.find((p) => p.player_id === player_id);
  if (!player || !model.rules) return 0;
  return Math.max(0, model.rules.obligation - (player.production + player.net_traded));
}

export function ownParcel(model: Model, parcel_id: number): ParcelDoc | null {
  const parcel = model.parcels.find((p) => p.parcel_id === parcel_id);
  return parcel && parcel.owner === model.player_id ? parcel : null;
}

export function isPendingParcel(model: Model, parcel_id: number): boolean {
  return model.pending.some((q) => q.kind === "set_land_use" && q.parcel_id === parcel_id);
}
