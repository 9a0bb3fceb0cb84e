// Round half to even at a decimal place.  The decision is made on the exact
// decimal digits of the double (via toFixed far below the precision limit),
// so values like 0.8005 that are really 0.80050000000000004 round correctly
// and only true decimal ties fall back to the even digit.

const GUARD_DIGITS = 20;

export function roundHalfEvenString(value: number, digits: number): string {
  if (!Number.isFinite(value)) return String(value);
  const expanded = Math.abs(value).toFixed(GUARD_DIGITS);
  const [whole, frac] = expanded.split(".");
  const keep = frac.slice(0, digits);
  const tail = frac.slice(digits);
  const tie = "5" + "0".repeat(tail.length - 1);
  let carry: bigint;
  if (tail > tie) {
    carry = 1n;
  } else if (tail < tie) {
    carry = 0n;
  } else {
    const lastKept = digits === 0 ? whole[whole.length - 1] : keep[keep.length - 1];
    carry = Number(lastKept) % 2 === 0 ? 0n : 1n;
  }
  const units = BigInt(whole + keep) + carry;
  let text = units.toString().padStart(digits + 1, "0");
  if (digits > 0) {
    text = `${text.slice(0, -digits)}.${text.slice(-digits)}`;
  }
  const negative = value < 0 && Number(text) !== 0;
  return negative ? `-${text}` : text;
}

export function roundHalfEven(value: number, digits: number): number {
  return Number(roundHalfEvenString(value, digits));
}

export function formatPower(value: number): string {
  return roundHalfEvenString(value, 3);
}
