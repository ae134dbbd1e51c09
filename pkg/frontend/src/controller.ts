/** Intent side of the client: builds outgoing messages with fresh sequence
 * numbers and reports what became pending, so the caller can track in-flight
 * intents. One controller per connection; client_seq is strictly increasing.
 */

import {
  acceptOffer,
  cancelOffer,
  chat,
  createGame,
  encode,
  hello,
  joinGame,
  postOffer,
  setLandUse,
  startGame,
  type ClientMessage,
  type Rules,
  type Side,
} from "./protocol.js";
import { isPendingParcel, ownParcel, type Model, type PendingIntent } from "./state.js";

export class Controller {
  private seq = 0;

  constructor(private sendLine: (line: string) => void) {}

  get lastSeq(): number {
    return this.seq;
  }

  private send(msg: ClientMessage): number {
    this.sendLine(encode(msg));
    return msg.client_seq;
  }

  private next(): number {
    return ++this.seq;
  }

  sayHello(name: string): void {
    this.send(hello(name, this.next()));
  }

  create(rules: Partial<Rules>): void {
    this.send(createGame(rules, this.next()));
  }

  join(game_id: number): void {
    this.send(joinGame(game_id, this.next()));
  }

  start(): void {
    this.send(startGame(this.next()));
  }

  say(text: string): void {
    this.send(chat(text, this.next()));
  }

  /** Click on a parcel: toggles land use if it's ours and not already in
   * flight; clicks anywhere else send nothing at all. */
  clickParcel(model: Model, parcel_id: number): PendingIntent | null {
    const parcel = ownParcel(model, parcel_id);
    if (!parcel || model.phase !== "running") return null;
    if (isPendingParcel(model, parcel_id)) return null;
    const use = parcel.land_use === "agriculture" ? "conservation" : "agriculture";
    const client_seq = this.send(setLandUse(parcel_id, use, this.next()));
    return { client_seq, kind: "set_land_use", parcel_id };
  }

  post(side: Side, quantity: number, unit_price: number): PendingIntent {
    const client_seq = this.send(postOffer(side, quantity, unit_price, this.next()));
    return { client_seq, kind: "post_offer" };
  }

  accept(offer_id: number, quantity: number): PendingIntent {
    const client_seq = this.send(acceptOffer(offer_id, quantity, this.next()));
    return { client_seq, kind: "accept_offer", offer_id };
  }

  cancel(offer_id: number): PendingIntent {
    const client_seq = this.send(cancelOffer(offer_id, this.next()));
    return { client_seq, kind: "cancel_offer", offer_id };
  }
}
