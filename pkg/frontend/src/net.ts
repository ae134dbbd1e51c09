/** WebSocket transport. One text frame carries one encoded message; the
 * server multiplexes WebSocket and raw TCP on the same port, so the URL is
 * just ws://host:port/ with no path.
 */

export interface NetEvents {
  onOpen(): void;
  onLine(line: string): void;
  onClose(): void;
}

export class Net {
  private socket: WebSocket | null = null;

  constructor(
    private readonly url: string,
    private readonly events: NetEvents,
  ) {}

  get connected(): boolean {
    return this.socket !== null && this.socket.readyState === WebSocket.OPEN;
  }

  connect(): void {
    this.disconnect();
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => this.events.onOpen();
    socket.onmessage = (event: MessageEvent) => {
      // be liberal: accept newline-batched frames from proxies
      for (const line of String(event.data).split("\n")) {
        if (line.trim()) this.events.onLine(line);
      }
    };
    socket.onclose = () => {
      if (this.socket === socket) {
        this.socket = null;
        this.events.onClose();
      }
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
  }

  send(line: string): void {
    if (this.connected) this.socket!.send(line);
  }

  disconnect(): void {
    const socket = this.socket;
    this.socket = null; // silences the onclose callback for deliberate closes
    if (socket) socket.close();
  }
}
