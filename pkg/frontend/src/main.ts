/** Browser entry point: wires transport, reducer, controller and renderer.
 *
 * Connection flow: pick a name, connect, Hello, then either create a game
 * from the rules form or join by id. A server_seq gap flips the model into
 * the desynced state; recovery is a reconnect plus rejoin, which yields a
 * fresh Welcome and a full snapshot on a new (seq-reset) stream.
 */

import { Controller } from "./controller.js";
import { Net } from "./net.js";
import { decode, DecodeFailure, DEFAULT_PORT, parseRulesText } from "./protocol.js";
import { dismissNotice, initialModel, reduce, type Model } from "./state.js";
import { render, type Handlers } from "./render.js";

export function boot(root: HTMLElement): void {
  const params = new URLSearchParams(window.location.search);
  const host = params.get("host") ?? window.location.hostname ?? "localhost";
  const port = params.get("port") ?? String(DEFAULT_PORT);
  const name = params.get("name") ?? `web-${Math.floor(Math.random() * 1000)}`;

  let model: Model = initialModel();
  const net = new Net(`ws://${host}:${port}/`, {
    onOpen() {
      controller.sayHello(name);
      if (rejoinTarget !== null) controller.join(rejoinTarget);
      draw();
    },
    onLine(line: string) {
      let msg;
      try {
        msg = decode(line);
      } catch (err) {
        if (err instanceof DecodeFailure) return; // drop garbage frames
        throw err;
      }
      model = reduce(model, msg);
      if (model.desynced) {
        resync();
        return;
      }
      if (msg.type === "game_started") rejoinTarget = model.game_id;
      draw();
    },
    onClose() {
      if (rejoinTarget !== null) {
        // dropped mid-game: come back for the seat
        setTimeout(resync, 500);
      }
      draw();
    },
  });
  const controller = new Controller((line) => net.send(line));
  let rejoinTarget: number | null = null;

  function resync(): void {
    model = { ...model, lastServerSeq: 0, desynced: true };
    net.disconnect();
    net.connect();
  }

  const handlers: Handlers = {
    onParcelClick(parcel_id) {
      const intent = controller.clickParcel(model, parcel_id);
      if (intent) {
        model = { ...model, pending: [...model.pending, intent] };
        draw();
      }
    },
    onPostOffer(side, quantity, unit_price) {
      const intent = controller.post(side, quantity, unit_price);
      model = { ...model, pending: [...model.pending, intent] };
      draw();
    },
    onAcceptOffer(offer_id, quantity) {
      const intent = controller.accept(offer_id, quantity);
      model = { ...model, pending: [...model.pending, intent] };
      draw();
    },
    onCancelOffer(offer_id) {
      const intent = controller.cancel(offer_id);
      model = { ...model, pending: [...model.pending, intent] };
      draw();
    },
    onChat(text) {
      controller.say(text);
    },
    onCreate(rulesText) {
      try {
        controller.create(parseRulesText(rulesText));
      } catch (err) {
        window.alert(String(err));
      }
    },
    onJoin(game_id) {
      controller.join(game_id);
    },
    onStart() {
      controller.start();
    },
    onDismiss(notice_id) {
      model = dismissNotice(model, notice_id);
      draw();
    },
  };

  function draw(): void {
    render(root, model, handlers);
  }

  draw();
  net.connect();
}

const mount = typeof document !== "undefined" ? document.getElementById("app") : null;
if (mount) boot(mount);
