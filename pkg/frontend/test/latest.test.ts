import { describe, expect, it } from "vitest";

import { LatestGuard, STALE } from "../src/latest.js";

function deferred<T>() {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

describe("LatestGuard", () => {
  it("returns results for an uncontested request", async () => {
    const guard = new LatestGuard();
    const value = await guard.run(async () => 42);
    expect(value).toBe(42);
  });

  it("marks the slower earlier request stale", async () => {
    const guard = new LatestGuard();
    const slow = deferred<string>();
    const fast = deferred<string>();
    const first = guard.run(() => slow.promise);
    const second = guard.run(() => fast.promise);
    fast.resolve("new");
    expect(await second).toBe("new");
    slow.resolve("old");
    expect(await first).toBe(STALE);
  });

  it("aborts the superseded request's signal", async () => {
    const guard = new LatestGuard();
    let firstSignal: AbortSignal | undefined;
    const hang = deferred<number>();
    const first = guard.run((signal) => {
      firstSignal = signal;
      return hang.promise;
    });
    const second = guard.run(async () => 2);
    expect(await second).toBe(2);
    expect(firstSignal?.aborted).toBe(true);
    hang.resolve(1);
    expect(await first).toBe(STALE);
  });

  it("propagates errors only from the live request", async () => {
    const guard = new LatestGuard();
    const failing = deferred<number>();
    const first = guard.run(() => failing.promise);
    const second = guard.run(async () => 7);
    failing.reject(new Error("boom"));
    expect(await first).toBe(STALE);
    expect(await second).toBe(7);
    await expect(guard.run(async () => Promise.reject(new Error("live failure")))).rejects.toThrow(
      "live failure",
    );
  });
});
