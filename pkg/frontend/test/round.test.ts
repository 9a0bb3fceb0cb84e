import { describe, expect, it } from "vitest";

import { formatPower, roundHalfEven, roundHalfEvenString } from "../src/round.js";

describe("roundHalfEven", () => {
  it("handles plain rounding away from ties", () => {
    expect(roundHalfEven(0.12349, 3)).toBe(0.123);
    expect(roundHalfEven(0.12351, 3)).toBe(0.124);
    expect(roundHalfEven(0.9996, 3)).toBe(1.0);
  });

  it("uses the double's exact decimal digits near apparent ties", () => {
    // 0.8005 as a double is 0.800499999999999989...; it rounds down.
    expect(roundHalfEven(0.8005, 3)).toBe(0.8);
    // 0.3335 as a double is 0.333500000000000018...; it rounds up.
    expect(roundHalfEven(0.3335, 3)).toBe(0.334);
    // 2.675 as a double is 2.674999999999999822...; at 2 digits it rounds down.
    expect(roundHalfEven(2.675, 2)).toBe(2.67);
  });

  it("breaks true decimal ties toward the even digit", () => {
    // dyadic values are exact decimal ties
    expect(roundHalfEven(0.0625, 3)).toBe(0.062);
    expect(roundHalfEven(0.1875, 3)).toBe(0.188);
    expect(roundHalfEven(2.5, 0)).toBe(2);
    expect(roundHalfEven(3.5, 0)).toBe(4);
  });

  it("keeps zeros and negatives sane", () => {
    expect(roundHalfEven(0, 3)).toBe(0);
    expect(roundHalfEven(-0.12351, 3)).toBe(-0.124);
    expect(roundHalfEvenString(1e-9, 3)).toBe("0.000");
  });

  it("formats power with three fixed decimals", () => {
    expect(formatPower(0.9319783027374311)).toBe("0.932");
    expect(formatPower(0.8)).toBe("0.800");
    expect(formatPower(1)).toBe("1.000");
  });
});
