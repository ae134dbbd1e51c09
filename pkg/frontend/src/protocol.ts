/** Wire types and codec for the newline-delimited game protocol.
 *
 * Mirrors the server's message catalog: flat JSON objects with a "type"
 * discriminator, snake_case field names, integer money and credits. The
 * client decodes server messages strictly (unknown type or missing field is
 * a structured error, never an exception escaping into the view) and builds
 * client messages through small constructor functions so client_seq handling
 * stays in one place.
 */

export const PROTOCOL_VERSION = 1;
export const DEFAULT_PORT = 7654;

export type LandUse = "conservation" | "agriculture";
export type Side = "sell" | "buy";
export type OfferStatus = "open" | "cancelled" | "filled";

export interface Rules {
  width: number;
  height: number;
  neighborhood: "moore8" | "von_neumann4";
  bonus_weight: number;
  obligation: number;
  penalty_rate: number;
  tick_seconds: number;
  total_ticks: number;
  base_credit_range: [number, number];
  agri_revenue_range: [number, number];
  initial_cash: number;
  allocation_mode: "interleaved" | "blocks";
  landscape_seed: number;
}

export interface ParcelDoc {
  parcel_id: number;
  row: number;
  col: number;
  owner: number;
  land_use: LandUse;
  base_credit: number;
  agri_revenue: number;
  credits: number;
}

export interface PlayerDoc {
  player_id: number;
  name: string;
  cash: number;
  net_traded: number;
  production: number;
}

export interface OfferDoc {
  offer_id: number;
  maker: number;
  side: Side;
  quantity: number;
  unit_price: number;
  status: OfferStatus;
}

export interface TradeDoc {
  trade_id: number;
  offer_id: number;
  seller: number;
  buyer: number;
  quantity: number;
  unit_price: number;
  tick_at: number;
  seq: number;
}

export interface Snapshot {
  game_id: number;
  rules: Rules;
  tick: number;
  phase: string;
  landscape: { width: number; height: number; parcels: ParcelDoc[] };
  players: PlayerDoc[];
  offers: OfferDoc[];
  trades: TradeDoc[];
}

export interface Balance {
  player_id: number;
  production: number;
  net_traded: number;
  cash: number;
}

export interface TickEntry {
  player_id: number;
  revenue: number;
  penalty: number;
}

export interface Score {
  player_id: number;
  cash: number;
}

export type ServerMessage =
  | { type: "welcome"; player_id: number; server_seq: number }
  | { type: "game_created"; game_id: number; rules: Rules; server_seq: number }
  | { type: "lobby_update"; game_id: number; players: { player_id: number; name: string }[]; server_seq: number }
  | { type: "game_started"; snapshot: Snapshot; server_seq: number }
  | { type: "parcel_changed"; parcel_id: number; use: LandUse;
      affected_credit_values: { parcel_id: number; credits: number }[]; server_seq: number }
  | { type: "balances_update"; balances: Balance[]; server_seq: number }
  | { type: "tick_report"; tick: number; reports: TickEntry[]; server_seq: number }
  | { type: "offer_posted"; offer: OfferDoc; server_seq: number }
  | { type: "offer_cancelled"; offer_id: number; server_seq: number }
  | { type: "trade_executed"; trade: TradeDoc; server_seq: number }
  | { type: "chat_relay"; player_id: number; text: string; server_seq: number }
  | { type: "game_over"; scores: Score[]; server_seq: number }
  | { type: "error"; code: string; message: string; client_seq: number; server_seq: number };

export type ServerType = ServerMessage["type"];

// required fields per server message type, beyond "type" itself
const REQUIRED: Record<ServerType, string[]> = {
  welcome: ["player_id", "server_seq"],
  game_created: ["game_id", "rules", "server_seq"],
  lobby_update: ["game_id", "players", "server_seq"],
  game_started: ["snapshot", "server_seq"],
  parcel_changed: ["parcel_id", "use", "affected_credit_values", "server_seq"],
  balances_update: ["balances", "server_seq"],
  tick_report: ["tick", "reports", "server_seq"],
  offer_posted: ["offer", "server_seq"],
  offer_cancelled: ["offer_id", "server_seq"],
  trade_executed: ["trade", "server_seq"],
  chat_relay: ["player_id", "text", "server_seq"],
  game_over: ["scores", "server_seq"],
  error: ["code", "message", "client_seq", "server_seq"],
};

export class DecodeFailure extends Error {}

/** Strict parse of one frame; throws DecodeFailure, never lets junk through. */
export function decode(line: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    throw new DecodeFailure("frame is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new DecodeFailure("frame is not an object");
  }
  const obj = doc as Record<string, unknown>;
  const type = obj["type"];
  if (typeof type !== "string" || !(type in REQUIRED)) {
    throw new DecodeFailure(`unknown message type ${JSON.stringify(type)}`);
  }
  for (const field of REQUIRED[type as ServerType]) {
    if (!(field in obj)) {
      throw new DecodeFailure(`${type} frame is missing ${field}`);
    }
  }
  if (typeof obj["server_seq"] !== "number") {
    throw new DecodeFailure(`${type} frame has a non-numeric server_seq`);
  }
  return obj as unknown as ServerMessage;
}

export type ClientMessage = Record<string, unknown> & { type: string; client_seq: number };

export function encode(msg: ClientMessage): string {
  return JSON.stringify(msg);
}

export const hello = (name: string, client_seq: number): ClientMessage =>
  ({ type: "hello", name, version: PROTOCOL_VERSION, client_seq });
export const createGame = (rules: Partial<Rules>, client_seq: number): ClientMessage =>
  ({ type: "create_game", rules, client_seq });
export const joinGame = (game_id: number, client_seq: number): ClientMessage =>
  ({ type: "join_game", game_id, client_seq });
export const startGame = (client_seq: number): ClientMessage =>
  ({ type: "start_game", client_seq });
export const setLandUse = (parcel_id: number, use: LandUse, client_seq: number): ClientMessage =>
  ({ type: "set_land_use", parcel_id, use, client_seq });
export const postOffer = (side: Side, quantity: number, unit_price: number, client_seq: number): ClientMessage =>
  ({ type: "post_offer", side, quantity, unit_price, client_seq });
export const cancelOffer = (offer_id: number, client_seq: number): ClientMessage =>
  ({ type: "cancel_offer", offer_id, client_seq });
export const acceptOffer = (offer_id: number, quantity: number, client_seq: number): ClientMessage =>
  ({ type: "accept_offer", offer_id, quantity, client_seq });
export const chat = (text: string, client_seq: number): ClientMessage =>
  ({ type: "chat", text, client_seq });
export const leaveGame = (client_seq: number): ClientMessage =>
  ({ type: "leave_game", client_seq });

/** Parse the create-game form: the rules file syntax, "key = value" lines. */
export function parseRulesText(text: string): Partial<Rules> {
  const ranges = new Set(["base_credit_range", "agri_revenue_range"]);
  const strings = new Set(["neighborhood", "allocation_mode"]);
  const rules: Record<string, unknown> = {};
  for (const raw of text.split("\n")) {
    const line = raw.replace(/#.*$/, "").trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`not a "key = value" line: ${raw.trim()}`);
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    if (ranges.has(key)) {
      const parts = value.split(/\s+/).map(Number);
      if (parts.length !== 2 || parts.some(Number.isNaN)) {
        throw new Error(`${key} needs two numbers, got: ${value}`);
      }
      rules[key] = parts;
    } else if (strings.has(key)) {
      rules[key] = value;
    } else {
      const num = Number(value);
      if (Number.isNaN(num)) throw new Error(`${key} needs a number, got: ${value}`);
      rules[key] = num;
    }
  }
  return rules as Partial<Rules>;
}

export const DEFAULT_RULES_TEXT = `# one "key = value" per line; omitted keys use server defaults
width = 8
height = 8
neighborhood = moore8
bonus_weight = 2
obligation = 10
penalty_rate = 3
tick_seconds = 10
total_ticks = 60
base_credit_range = 1 6
agri_revenue_range = 1 8
initial_cash = 30
allocation_mode = interleaved
landscape_seed = 1
`;
