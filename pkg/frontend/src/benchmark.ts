/** Wall-clock measurement of one data encryption at a given blinding
 * width.  Informational: widths beyond the bundle's native layout produce
 * timing-only chunks that cannot verify downstream. */

import type { KeyBundle } from "./bundle.js";
import { encData, liftedBases } from "./djclient.js";

export interface BenchmarkRecord {
  r1Bits: number;
  elapsedMs: number;
  nativeWidth: boolean;
  keyBits: number;
}

export async function benchmarkEncrypt(
  bundle: KeyBundle,
  r1Bits: 512 | 1024 | 2044 | number,
): Promise<BenchmarkRecord> {
  liftedBases(bundle); // exclude the one-time base lifting from the timing
  const payload = new Uint8Array(bundle.dataBytes).fill(7);
  const started = performance.now();
  await encData(bundle, payload, { k: 1n, i: 0, n: 1 }, r1Bits);
  return {
    r1Bits,
    elapsedMs: performance.now() - started,
    nativeWidth: r1Bits === bundle.r1Bits,
    keyBits: bundle.bits,
  };
}
