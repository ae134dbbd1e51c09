/** Interaction contract, exercised through the real DOM rendering: clicking
 * an owned parcel emits exactly one set_land_use with a fresh client_seq,
 * clicks anywhere else are inert, and an error frame renders a notice while
 * leaving the game panels' markup untouched.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";
import { Controller } from "../src/controller.js";
import { decode, type ServerMessage } from "../src/protocol.js";
import { render, type Handlers } from "../src/render.js";
import { addPending, dismissNotice, initialModel, reduce, type Model } from "../src/state.js";

const lines = readFileSync(join(process.cwd(), "test", "fixtures", "session.jsonl"), "utf8")
  .split("\n")
  .filter((l) => l.trim().length > 0);
const frames = lines.map(decode);

/** Model as of the game_started snapshot: running phase, nothing in flight. */
function modelAtStart(): Model {
  let model = initialModel();
  for (const frame of frames) {
    model = reduce(model, frame);
    if (frame.type === "game_started") break;
  }
  return model;
}

/** The main-module glue, reduced to what the tests drive. */
function mount(initial: Model) {
  const sent: string[] = [];
  let model = initial;
  const controller = new Controller((line) => sent.push(line));
  const root = document.createElement("div");
  document.body.append(root);
  const handlers: Handlers = {
    onParcelClick(parcel_id) {
      const intent = controller.clickParcel(model, parcel_id);
      if (intent) {
        model = addPending(model, intent);
        draw();
      }
    },
    onPostOffer(side, quantity, unit_price) {
      model = addPending(model, controller.post(side, quantity, unit_price));
      draw();
    },
    onAcceptOffer(offer_id, quantity) {
      model = addPending(model, controller.accept(offer_id, quantity));
      draw();
    },
    onCancelOffer(offer_id) {
      model = addPending(model, controller.cancel(offer_id));
      draw();
    },
    onChat(text) {
      controller.say(text);
    },
    onCreate() {},
    onJoin() {},
    onStart() {},
    onDismiss(id) {
      model = dismissNotice(model, id);
      draw();
    },
  };
  const draw = () => render(root, model, handlers);
  const apply = (msg: ServerMessage) => {
    model = reduce(model, msg);
    draw();
  };
  draw();
  return {
    root,
    sent,
    apply,
    get model() {
      return model;
    },
  };
}

const cell = (root: HTMLElement, parcel_id: number): HTMLElement =>
  root.querySelector(`[data-parcel-id="${parcel_id}"]`) as HTMLElement;

/** Markup of everything except the notices strip. */
const gameMarkup = (root: HTMLElement): string => (root.querySelector(".game") as HTMLElement).outerHTML;

beforeEach(() => {
  document.body.textContent = "";
});

describe("parcel clicks", () => {
  it("an owned parcel emits exactly one set_land_use with a fresh client_seq", () => {
    const view = mount(modelAtStart());
    cell(view.root, 0).click(); // parcel 0 is ours, currently conservation
    expect(view.sent).toHaveLength(1);
    const first = JSON.parse(view.sent[0]!);
    expect(first.type).toBe("set_land_use");
    expect(first.parcel_id).toBe(0);
    expect(first.use).toBe("agriculture");
    expect(typeof first.client_seq).toBe("number");

    cell(view.root, 2).click(); // another owned parcel gets the next seq
    expect(view.sent).toHaveLength(2);
    const second = JSON.parse(view.sent[1]!);
    expect(second.parcel_id).toBe(2);
    expect(second.client_seq).toBeGreaterThan(first.client_seq);
  });

  it("a parcel owned by someone else is inert", () => {
    const view = mount(modelAtStart());
    cell(view.root, 1).click(); // bob's parcel
    cell(view.root, 3).click();
    expect(view.sent).toHaveLength(0);
  });

  it("a second click while the change is in flight sends nothing", () => {
    const view = mount(modelAtStart());
    cell(view.root, 0).click();
    cell(view.root, 0).click();
    expect(view.sent).toHaveLength(1);
    expect(view.root.querySelectorAll(".parcel.pending")).toHaveLength(1);
  });

  it("the confirming parcel_changed clears the in-flight style", () => {
    const view = mount(modelAtStart());
    cell(view.root, 0).click();
    view.apply({
      type: "parcel_changed",
      parcel_id: 0,
      use: "agriculture",
      affected_credit_values: [
        { parcel_id: 0, credits: 0 },
        { parcel_id: 1, credits: 5 },
      ],
      server_seq: view.model.lastServerSeq + 1,
    });
    expect(view.root.querySelectorAll(".parcel.pending")).toHaveLength(0);
    expect(cell(view.root, 0).classList.contains("conserved")).toBe(false);
  });
});

describe("error frames", () => {
  it("render a notice and change no rendered game state", () => {
    const view = mount(modelAtStart());
    const baseline = gameMarkup(view.root);
    view.apply({
      type: "error",
      code: "would_violate_own_obligation",
      message: "the change would leave you short",
      client_seq: 7,
      server_seq: view.model.lastServerSeq + 1,
    });
    const notice = view.root.querySelector(".notice");
    expect(notice).not.toBeNull();
    expect(notice!.textContent).toContain("would_violate_own_obligation");
    expect(gameMarkup(view.root)).toBe(baseline);
  });

  it("an error for an in-flight click rolls the grid back to its pre-click markup", () => {
    const view = mount(modelAtStart());
    const baseline = gameMarkup(view.root);
    cell(view.root, 0).click();
    expect(gameMarkup(view.root)).not.toBe(baseline); // in-flight style visible
    const intent = JSON.parse(view.sent[0]!);
    view.apply({
      type: "error",
      code: "would_violate_own_obligation",
      message: "the change would leave you short",
      client_seq: intent.client_seq,
      server_seq: view.model.lastServerSeq + 1,
    });
    expect(gameMarkup(view.root)).toBe(baseline);
    expect(view.root.querySelector(".notice")).not.toBeNull();
  });

  it("notices are dismissible", () => {
    const view = mount(modelAtStart());
    view.apply({
      type: "error",
      code: "not_open",
      message: "offer 9 is not open",
      client_seq: 3,
      server_seq: view.model.lastServerSeq + 1,
    });
    (view.root.querySelector(".notice .dismiss") as HTMLElement).click();
    expect(view.root.querySelector(".notice")).toBeNull();
  });
});
