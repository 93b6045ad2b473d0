import { describe, expect, it, vi } from "vitest";

import { LiveClient, type SocketLike } from "../src/transport.js";

class FakeSocket implements SocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  sent: string[] = [];

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.onclose?.();
  }

  emit(payload: unknown): void {
    this.onmessage?.({ data: JSON.stringify(payload) });
  }
}

function makeClient() {
  const sockets: FakeSocket[] = [];
  const frames: { seq: number }[] = [];
  const statuses: string[] = [];
  const errors: string[] = [];
  const scheduled: (() => void)[] = [];
  const client = new LiveClient(
    "ws://example/live",
    {
      onFrame: (f) => frames.push(f),
      onStatus: (s) => statuses.push(s),
      onError: (e) => errors.push(e),
    },
    () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    [10, 20],
    (fn) => {
      scheduled.push(fn);
      return 0;
    },
  );
  return { client, sockets, frames, statuses, errors, scheduled };
}

describe("LiveClient", () => {
  it("tags and delivers frames", () => {
    const { client, sockets, frames } = makeClient();
    client.connect();
    sockets[0]!.onopen?.();
    client.send({ seq: 4, preset: "zero", pose: { yaw: 0, pitch: 0, distance: 3 } } as never);
    expect(JSON.parse(sockets[0]!.sent[0]!)).toMatchObject({ seq: 4 });
    sockets[0]!.emit({ seq: 4, encoding: "png", image_b64: "aGk=", render_ms: 2 });
    expect(frames).toHaveLength(1);
    expect(frames[0]!.seq).toBe(4);
  });

  it("routes error payloads to the error handler", () => {
    const { client, sockets, errors } = makeClient();
    client.connect();
    sockets[0]!.onopen?.();
    sockets[0]!.emit({ error: "unknown preset 'x'" });
    expect(errors).toEqual(["unknown preset 'x'"]);
  });

  it("reconnects with backoff after a drop", () => {
    const { client, sockets, statuses, scheduled } = makeClient();
    client.connect();
    sockets[0]!.onopen?.();
    sockets[0]!.onclose?.();
    expect(statuses).toEqual(["connecting", "open", "closed"]);
    expect(scheduled).toHaveLength(1);
    scheduled[0]!();  // the retry timer fires
    expect(sockets).toHaveLength(2);
    sockets[1]!.onopen?.();
    expect(statuses.at(-1)).toBe("open");
  });

  it("stops reconnecting once closed by the caller", () => {
    const { client, sockets, scheduled } = makeClient();
    client.connect();
    sockets[0]!.onopen?.();
    client.close();
    expect(scheduled).toHaveLength(0);
    expect(sockets).toHaveLength(1);
  });
});
