/** Recorded-session fidelity: the reducer is driven by the raw frames of a
 * real two-player game (captured by scripts/make_frontend_fixture.py in the
 * repo root) and its final view must agree with the server's own CSV export
 * for the same game: profits, price series, tick and status fields.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { decode, DecodeFailure, type ServerMessage } from "../src/protocol.js";
import { initialModel, reduce, shortfall, type Model } from "../src/state.js";

interface PanelRow {
  tick: number;
  player_id: number;
  cash: number;
  production: number;
  net_traded: number;
  shortfall: number;
  penalty: number;
  revenue: number;
}

interface Expected {
  scores: { player_id: number; cash: number }[];
  final_panel: PanelRow[];
  trades: { seq: number; tick_at: number; seller: number; buyer: number; quantity: number; unit_price: number }[];
}

// vitest runs with the package root as cwd; import.meta.url is not a file:
// URL under the happy-dom environment, so resolve from cwd instead
const fixture = (name: string): string =>
  readFileSync(join(process.cwd(), "test", "fixtures", name), "utf8");

const lines = fixture("session.jsonl").split("\n").filter((l) => l.trim().length > 0);
const expected: Expected = JSON.parse(fixture("expected.json"));

const frames: ServerMessage[] = lines.map(decode);

function foldAll(): Model {
  let model = initialModel();
  for (const frame of frames) model = reduce(model, frame);
  return model;
}

describe("recorded session", () => {
  it("is long enough to be a meaningful fixture", () => {
    expect(lines.length).toBeGreaterThanOrEqual(50);
  });

  it("replays without desync and consumes every frame", () => {
    const model = foldAll();
    expect(model.desynced).toBe(false);
    expect(model.lastServerSeq).toBe(frames.length);
    expect(model.phase).toBe("finished");
  });

  it("final profits and status fields equal the exporter's last row", () => {
    const model = foldAll();
    expect(expected.final_panel.length).toBeGreaterThan(0);
    for (const row of expected.final_panel) {
      const player = model.players.find((p) => p.player_id === row.player_id);
      expect(player, `player ${row.player_id} present`).toBeDefined();
      expect(model.tick).toBe(row.tick);
      expect(player!.cash).toBe(row.cash);
      expect(player!.production).toBe(row.production);
      expect(player!.net_traded).toBe(row.net_traded);
      expect(shortfall(model, row.player_id)).toBe(row.shortfall);
      expect(player!.last_revenue).toBe(row.revenue);
      expect(player!.last_penalty).toBe(row.penalty);
    }
  });

  it("price series has one point per executed trade, in order", () => {
    const model = foldAll();
    expect(model.prices).toEqual(expected.trades.map((t) => t.unit_price));
  });

  it("final scores match the server's ranking", () => {
    const model = foldAll();
    expect(model.scores).toEqual(expected.scores);
  });
});

describe("reducer details", () => {
  const startIndex = frames.findIndex((f) => f.type === "game_started");

  function foldTo(count: number): Model {
    let model = initialModel();
    for (const frame of frames.slice(0, count)) model = reduce(model, frame);
    return model;
  }

  it("a server_seq gap flags desync and applies nothing", () => {
    const model = foldTo(startIndex + 1);
    const skipped = frames[startIndex + 2]!; // leaves a hole at startIndex + 1
    const after = reduce(model, skipped);
    expect(after.desynced).toBe(true);
    expect({ ...after, desynced: false }).toEqual({ ...model, desynced: false });
  });

  it("parcel deltas touch exactly the listed parcels and refresh production", () => {
    const index = frames.findIndex((f) => f.type === "parcel_changed");
    expect(index).toBeGreaterThan(startIndex);
    const frame = frames[index]!;
    if (frame.type !== "parcel_changed") throw new Error("unreachable");
    const before = foldTo(index);
    const after = reduce(before, frame);

    const touched = new Set(frame.affected_credit_values.map((c) => c.parcel_id));
    for (const parcel of after.parcels) {
      const old = before.parcels.find((p) => p.parcel_id === parcel.parcel_id)!;
      if (parcel.parcel_id === frame.parcel_id) expect(parcel.land_use).toBe(frame.use);
      else expect(parcel.land_use).toBe(old.land_use);
      if (touched.has(parcel.parcel_id)) {
        const want = frame.affected_credit_values.find((c) => c.parcel_id === parcel.parcel_id)!;
        expect(parcel.credits).toBe(want.credits);
      } else {
        expect(parcel.credits).toBe(old.credits);
      }
    }
    for (const player of after.players) {
      const derived = after.parcels
        .filter((p) => p.owner === player.player_id && p.land_use === "conservation")
        .reduce((sum, p) => sum + p.credits, 0);
      expect(player.production).toBe(derived);
    }
  });

  it("trade execution appends a price point and shrinks the offer", () => {
    const index = frames.findIndex((f) => f.type === "trade_executed");
    const frame = frames[index]!;
    if (frame.type !== "trade_executed") throw new Error("unreachable");
    const before = foldTo(index);
    const after = reduce(before, frame);
    expect(after.prices).toEqual([...before.prices, frame.trade.unit_price]);
    const remaining = after.offers.find((o) => o.offer_id === frame.trade.offer_id);
    const was = before.offers.find((o) => o.offer_id === frame.trade.offer_id)!;
    if (was.quantity === frame.trade.quantity) expect(remaining).toBeUndefined();
    else expect(remaining!.quantity).toBe(was.quantity - frame.trade.quantity);
  });
});

describe("decode strictness", () => {
  it("rejects frames the reducer must never see", () => {
    for (const junk of ["", "not json", "[1,2]", '{"type":"mystery","server_seq":1}', '{"player_id":1}']) {
      expect(() => decode(junk), JSON.stringify(junk)).toThrow(DecodeFailure);
    }
  });

  it("rejects a known type with a missing field", () => {
    expect(() => decode('{"type":"welcome","server_seq":3}')).toThrow(DecodeFailure);
  });
});
