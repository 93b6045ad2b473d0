/** WebSocket /live client with auto-retry and sequence-tagged frames. */

import { LatentDoc } from "./lerp.js";
import { Pose } from "./state.js";

export interface LiveRequest {
  seq: number;
  latents?: LatentDoc;
  preset?: string;
  pose: Pose;
  quality?: number;
}

export interface LiveFrame {
  seq: number;
  encoding: "png" | "jpeg";
  image_b64: string;
  render_ms: number;
}

export interface LiveHandlers {
  onFrame: (frame: LiveFrame, roundTripMs: number) => void;
  onStatus?: (status: "connecting" | "open" | "closed") => void;
  onError?: (message: string) => void;
}

// minimal structural view of a WebSocket so the node test can inject "ws"
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const DEFAULT_BACKOFF_MS = [250, 500, 1000, 2000, 5000];

export class LiveClient {
  private socket: SocketLike | null = null;
  private closed = false;
  private retry = 0;
  private sentAt = new Map<number, number>();

  constructor(
    private readonly url: string,
    private readonly handlers: LiveHandlers,
    private readonly socketFactory: SocketFactory =
      (u) => new WebSocket(u) as unknown as SocketLike,
    private readonly backoffMs: number[] = DEFAULT_BACKOFF_MS,
    private readonly schedule: (fn: () => void, ms: number) => unknown =
      (fn, ms) => setTimeout(fn, ms),
  ) {}

  connect(): void {
    this.closed = false;
    this.handlers.onStatus?.("connecting");
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retry = 0;
      this.handlers.onStatus?.("open");
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onerror = () => {
      // the close handler owns reconnection
    };
    socket.onclose = () => {
      this.socket = null;
      this.handlers.onStatus?.("closed");
      if (!this.closed) {
        const delay = this.backoffMs[Math.min(this.retry, this.backoffMs.length - 1)];
        this.retry += 1;
        this.schedule(() => this.connect(), delay ?? 1000);
      }
    };
  }

  private handleMessage(raw: string): void {
    let payload: Record<string, unknown>;
    try {
      payload = JSON.parse(raw) as Record<string, unknown>;
    } catch {
      this.handlers.onError?.("malformed frame from service");
      return;
    }
    if (typeof payload.error === "string") {
      this.handlers.onError?.(payload.error);
      return;
    }
    const frame = payload as unknown as LiveFrame;
    const sent = this.sentAt.get(frame.seq);
    this.sentAt.delete(frame.seq);
    const rtt = sent === undefined ? NaN : Date.now() - sent;
    this.handlers.onFrame(frame, rtt);
  }

  send(req: LiveRequest): boolean {
    if (!this.socket) return false;
    this.sentAt.set(req.seq, Date.now());
    try {
      this.socket.send(JSON.stringify(req));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }
}
