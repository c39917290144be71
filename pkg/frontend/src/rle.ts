/**
 * Run-length mask codec. Must stay byte-for-byte compatible with the server:
 * row-major scan, alternating background/foreground run lengths, first run is
 * background (possibly 0), runs sum to width*height. The shared fixture
 * corpus in shared/rle_fixtures.json pins the contract.
 */

export class RleError extends Error {}

export function decodeRle(runs: number[], height: number, width: number): Uint8Array {
  const total = height * width;
  let sum = 0;
  for (const run of runs) {
    if (!Number.isInteger(run) || run < 0) {
      throw new RleError(`bad run length ${run}`);
    }
    sum += run;
  }
  if (sum !== total) {
    throw new RleError(`runs sum to ${sum}, expected ${total} (${height}x${width})`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (value === 1) {
      out.fill(1, pos, pos + run);
    }
    pos += run;
    value = 1 - value;
  }
  return out;
}

export function encodeRle(mask: Uint8Array | number[]): number[] {
  if (mask.length === 0) {
    return [];
  }
  const runs: number[] = [];
  let value = 0;
  let run = 0;
  for (const raw of mask) {
    const pixel = raw ? 1 : 0;
    if (pixel === value) {
      run += 1;
    } else {
      runs.push(run);
      value = 1 - value;
      run = 1;
    }
  }
  runs.push(run);
  return runs;
}
