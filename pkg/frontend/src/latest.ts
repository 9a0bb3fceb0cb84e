// Latest-wins request guard: each panel keeps one in-flight request; starting
// a new one aborts and invalidates the old, and a stale response can never
// overwrite a newer result because its ticket no longer matches.

export const STALE = Symbol("stale");

export class LatestGuard {
  private ticket = 0;
  private controller: AbortController | null = null;

  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T | typeof STALE> {
    this.ticket += 1;
    const mine = this.ticket;
    this.controller?.abort();
    this.controller = new AbortController();
    try {
      const result = await task(this.controller.signal);
      return mine === this.ticket ? result : STALE;
    } catch (err) {
      if (mine !== this.ticket) return STALE;
      if (err instanceof DOMException && err.name === "AbortError") return STALE;
      throw err;
    }
  }
}
