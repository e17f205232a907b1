/**
 * Fixed-interval polling with overlap protection.
 *
 * The console refreshes its series once per second. A tick that is
 * still in flight when the next interval fires is not stacked; the
 * late tick is skipped and the next interval tries again. Errors from
 * the tick are routed to an optional handler so a dropped connection
 * does not stop the loop.
 */

export type Tick = () => Promise<void>;

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(
    private readonly tick: Tick,
    private readonly intervalMs = 1000,
    private readonly onError?: (err: unknown) => void,
  ) {}

  get running(): boolean {
    return this.timer !== null;
  }

  start(): void {
    if (this.timer !== null) {
      return;
    }
    this.timer = setInterval(() => {
      void this.runOnce();
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** One tick, shared by the interval and manual refreshes. */
  async runOnce(): Promise<void> {
    if (this.inFlight) {
      return;
    }
    this.inFlight = true;
    try {
      await this.tick();
    } catch (err) {
      this.onError?.(err);
    } finally {
      this.inFlight = false;
    }
  }
}
