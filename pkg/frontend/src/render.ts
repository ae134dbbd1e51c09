/** DOM rendering: a full redraw of every region from the current model.
 *
 * The layout follows the classic client window: the landscape grid on the
 * left; profits and the price chart top right; status and chat middle right;
 * the trading window bottom right. Rendering is a pure function of the model
 * plus a bag of event handlers; no game logic lives here.
 */

import { DEFAULT_RULES_TEXT, type OfferDoc, type ParcelDoc } from "./protocol.js";
import { isPendingParcel, shortfall, type Model } from "./state.js";

export interface Handlers {
  onParcelClick(parcel_id: number): void;
  onPostOffer(side: "sell" | "buy", quantity: number, unit_price: number): void;
  onAcceptOffer(offer_id: number, quantity: number): void;
  onCancelOffer(offer_id: number): void;
  onChat(text: string): void;
  onCreate(rulesText: string): void;
  onJoin(game_id: number): void;
  onStart(): void;
  onDismiss(notice_id: number): void;
}

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function playerName(model: Model, player_id: number): string {
  const player = model.players.find((p) => p.player_id === player_id);
  if (player) return player.name;
  const seat = model.lobby.find((p) => p.player_id === player_id);
  return seat ? seat.name : `#${player_id}`;
}

// --- landscape --------------------------------------------------------------

function renderParcel(model: Model, parcel: ParcelDoc, handlers: Handlers): HTMLElement {
  const own = parcel.owner === model.player_id;
  const cell = el("button", "parcel") as HTMLButtonElement;
  cell.classList.add(own ? "own" : "foreign");
  if (parcel.land_use === "conservation") cell.classList.add("conserved");
  if (isPendingParcel(model, parcel.parcel_id)) cell.classList.add("pending");
  cell.dataset["parcelId"] = String(parcel.parcel_id);
  cell.append(el("span", "credit", String(parcel.credits)));
  if (parcel.land_use === "conservation") cell.append(el("span", "tree", "\u{1F332}"));
  cell.append(el("span", "revenue", String(parcel.agri_revenue)));
  cell.title = own
    ? `parcel ${parcel.parcel_id}: click to switch to ` +
      (parcel.land_use === "agriculture" ? "conservation" : "agriculture")
    : `parcel ${parcel.parcel_id} (${playerName(model, parcel.owner)})`;
  cell.addEventListener("click", () => handlers.onParcelClick(parcel.parcel_id));
  return cell;
}

function renderGrid(model: Model, handlers: Handlers): HTMLElement {
  const grid = el("div", "grid");
  grid.style.gridTemplateColumns = `repeat(${model.gridWidth}, 1fr)`;
  for (const parcel of model.parcels) grid.append(renderParcel(model, parcel, handlers));
  return grid;
}

// --- side panels ------------------------------------------------------------

function renderProfits(model: Model): HTMLElement {
  const box = el("section", "profits");
  box.append(el("h2", undefined, "Profits"));
  const table = el("table");
  for (const player of model.players) {
    const row = el("tr");
    if (player.player_id === model.player_id) row.className = "self";
    row.append(el("td", undefined, player.name));
    row.append(el("td", "cash", String(player.cash)));
    row.append(el("td", "flows", `+${player.last_revenue}/-${player.last_penalty}`));
    table.append(row);
  }
  box.append(table);
  return box;
}

function renderChart(model: Model): HTMLElement {
  const box = el("section", "chart");
  box.append(el("h2", undefined, `Prices (${model.prices.length} trades)`));
  const w = 220;
  const h = 60;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${w} ${h}`);
  svg.setAttribute("class", "price-chart");
  if (model.prices.length > 0) {
    const top = Math.max(...model.prices, 1);
    const step = model.prices.length > 1 ? w / (model.prices.length - 1) : 0;
    const points = model.prices
      .map((price, i) => `${(i * step).toFixed(1)},${(h - (price / top) * (h - 4) - 2).toFixed(1)}`)
      .join(" ");
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", points);
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "currentColor");
    svg.append(line);
  }
  box.append(svg);
  return box;
}

function renderStatus(model: Model): HTMLElement {
  const box = el("section", "status");
  box.append(el("h2", undefined, "Status"));
  const rules = model.rules;
  const me = model.player_id;
  const self = model.players.find((p) => p.player_id === me);
  const lines = [
    `tick ${model.tick}${rules ? ` / ${rules.total_ticks}` : ""}`,
    self ? `production ${self.production}  traded ${self.net_traded >= 0 ? "+" : ""}${self.net_traded}` : "",
    rules && me !== null ? `obligation ${rules.obligation}  shortfall ${shortfall(model, me)}` : "",
    model.desynced ? "connection out of sync, refreshing..." : "",
  ];
  for (const text of lines) if (text) box.append(el("div", "status-line", text));
  return box;
}

function renderChat(model: Model, handlers: Handlers): HTMLElement {
  const box = el("section", "chat");
  box.append(el("h2", undefined, "Chat"));
  const log = el("div", "chat-log");
  for (const entry of model.chatLog.slice(-30)) {
    log.append(el("div", "chat-line", `${playerName(model, entry.player_id)}: ${entry.text}`));
  }
  box.append(log);
  const form = el("form", "chat-form") as HTMLFormElement;
  const input = el("input") as HTMLInputElement;
  input.name = "text";
  input.placeholder = "say something";
  const button = el("button", undefined, "Send") as HTMLButtonElement;
  button.type = "submit";
  form.append(input, button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (input.value.trim()) handlers.onChat(input.value.trim());
    input.value = "";
  });
  box.append(form);
  return box;
}

function renderOfferRow(model: Model, offer: OfferDoc, handlers: Handlers): HTMLElement {
  const row = el("tr", "offer");
  row.append(el("td", undefined, offer.side));
  row.append(el("td", undefined, `${offer.quantity} @ ${offer.unit_price}`));
  row.append(el("td", undefined, playerName(model, offer.maker)));
  const actions = el("td");
  if (offer.maker === model.player_id) {
    const cancel = el("button", "cancel", "cancel") as HTMLButtonElement;
    cancel.addEventListener("click", () => handlers.onCancelOffer(offer.offer_id));
    actions.append(cancel);
  } else {
    const accept = el("button", "accept", "accept") as HTMLButtonElement;
    accept.addEventListener("click", () => handlers.onAcceptOffer(offer.offer_id, offer.quantity));
    actions.append(accept);
  }
  row.append(actions);
  return row;
}

function renderMarket(model: Model, handlers: Handlers): HTMLElement {
  const box = el("section", "market");
  box.append(el("h2", undefined, "Credit trading"));
  const table = el("table", "offers");
  for (const offer of model.offers) table.append(renderOfferRow(model, offer, handlers));
  if (model.offers.length === 0) box.append(el("div", "empty", "no open offers"));
  box.append(table);
  const form = el("form", "post-form") as HTMLFormElement;
  const side = el("select") as HTMLSelectElement;
  for (const value of ["sell", "buy"]) {
    const option = el("option", undefined, value) as HTMLOptionElement;
    option.value = value;
    side.append(option);
  }
  const qty = el("input", "qty") as HTMLInputElement;
  qty.type = "number";
  qty.min = "1";
  qty.value = "1";
  const price = el("input", "price") as HTMLInputElement;
  price.type = "number";
  price.min = "0";
  price.value = "5";
  const submit = el("button", undefined, "post offer") as HTMLButtonElement;
  submit.type = "submit";
  form.append(side, qty, el("span", undefined, "@"), price, submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onPostOffer(side.value as "sell" | "buy", Number(qty.value), Number(price.value));
  });
  box.append(form);
  return box;
}

function renderNotices(model: Model, handlers: Handlers): HTMLElement {
  const box = el("div", "notices");
  for (const notice of model.notices) {
    const item = el("div", "notice");
    item.append(el("span", undefined, `${notice.code}: ${notice.message}`));
    const dismiss = el("button", "dismiss", "×") as HTMLButtonElement;
    dismiss.addEventListener("click", () => handlers.onDismiss(notice.id));
    item.append(dismiss);
    box.append(item);
  }
  return box;
}

function renderScores(model: Model): HTMLElement {
  const box = el("section", "scores");
  box.append(el("h2", undefined, "Final scores"));
  const table = el("table");
  (model.scores ?? []).forEach((score, i) => {
    const row = el("tr");
    row.append(el("td", undefined, `${i + 1}.`));
    row.append(el("td", undefined, playerName(model, score.player_id)));
    row.append(el("td", "cash", String(score.cash)));
    table.append(row);
  });
  box.append(table);
  return box;
}

function renderLobby(model: Model, handlers: Handlers): HTMLElement {
  const box = el("section", "lobby");
  box.append(el("h2", undefined, model.game_id === null ? "Lobby" : `Game ${model.game_id}`));
  if (model.game_id === null) {
    const createForm = el("form", "create-form") as HTMLFormElement;
    const rulesText = el("textarea", "rules-text") as HTMLTextAreaElement;
    rulesText.rows = 8;
    rulesText.value = DEFAULT_RULES_TEXT;
    const create = el("button", undefined, "create game") as HTMLButtonElement;
    create.type = "submit";
    createForm.append(rulesText, create);
    createForm.addEventListener("submit", (event) => {
      event.preventDefault();
      handlers.onCreate(rulesText.value);
    });
    box.append(createForm);
    const joinForm = el("form", "join-form") as HTMLFormElement;
    const gameId = el("input") as HTMLInputElement;
    gameId.type = "number";
    gameId.placeholder = "game id";
    const join = el("button", undefined, "join") as HTMLButtonElement;
    join.type = "submit";
    joinForm.append(gameId, join);
    joinForm.addEventListener("submit", (event) => {
      event.preventDefault();
      if (gameId.value) handlers.onJoin(Number(gameId.value));
    });
    box.append(joinForm);
  } else {
    const seats = el("ul", "seats");
    for (const seat of model.lobby) {
      seats.append(el("li", undefined, seat.name));
    }
    box.append(seats);
    const start = el("button", "start", "start game") as HTMLButtonElement;
    start.addEventListener("click", () => handlers.onStart());
    box.append(start);
  }
  return box;
}

// --- top level --------------------------------------------------------------

export function render(root: HTMLElement, model: Model, handlers: Handlers): void {
  root.textContent = "";
  root.append(renderNotices(model, handlers));
  if (model.phase === "connecting" || model.phase === "lobby") {
    root.append(renderLobby(model, handlers));
    return;
  }
  const main = el("div", "game");
  const left = el("div", "left");
  left.append(renderGrid(model, handlers));
  const right = el("div", "right");
  right.append(renderProfits(model), renderChart(model));
  right.append(renderStatus(model), renderChat(model, handlers));
  right.append(renderMarket(model, handlers));
  if (model.phase === "finished") right.append(renderScores(model));
  main.append(left, right);
  root.append(main);
}
