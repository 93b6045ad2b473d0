/** Latest-request-wins rate limiter for slider/orbit event storms.
 *
 * At most one request per interval leaves the client (default 34 ms,
 * just under 30/s); a burst collapses to the first request plus one
 * trailing request carrying the newest state.
 */

export type Clock = () => number;
export type Scheduler = (fn: () => void, delayMs: number) => unknown;

export class RequestCoalescer<R> {
  private lastSentAt = -Infinity;
  private pending: R | null = null;
  private timerArmed = false;

  constructor(
    private readonly send: (req: R) => void,
    private readonly minIntervalMs = 34,
    private readonly now: Clock = () => Date.now(),
    private readonly schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
  ) {}

  submit(req: R): void {
    const elapsed = this.now() - this.lastSentAt;
    if (elapsed >= this.minIntervalMs && !this.timerArmed) {
      this.lastSentAt = this.now();
      this.send(req);
      return;
    }
    this.pending = req;
    if (!this.timerArmed) {
      this.timerArmed = true;
      this.schedule(() => this.flush(), Math.max(0, this.minIntervalMs - elapsed));
    }
  }

  private flush(): void {
    this.timerArmed = false;
    if (this.pending === null) return;
    const req = this.pending;
    this.pending = null;
    this.lastSentAt = this.now();
    this.send(req);
  }
}
