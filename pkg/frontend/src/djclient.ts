/** Client-side encryption: zero chunks for cover traffic and data chunks
 * for prepared submissions, interchangeable on the wire.
 *
 * Heavy fixed exponentiations (the bases lifted to the ciphertext level)
 * are computed once per bundle and cached; per-chunk work is then a few
 * modular exponentiations with short exponents. */

import {
  bigToBytes,
  bytesToBig,
  concatBytes,
  modInverse,
  modPow,
  randBits,
} from "./bigmath.js";
import type { KeyBundle } from "./bundle.js";

export interface ChunkMeta {
  k: bigint; // 64-bit nonzero file id
  i: number;
  n: number;
}

export interface LiftedBases {
  gData: bigint;
  hData: bigint;
  gTag: bigint;
}

const liftCache = new WeakMap<KeyBundle, LiftedBases>();

export function liftedBases(bundle: KeyBundle): LiftedBases {
  let bases = liftCache.get(bundle);
  if (!bases) {
    const ns = bundle.N ** BigInt(bundle.sData);
    bases = {
      gData: modPow(bundle.g, ns, bundle.dataMod),
      hData: modPow(bundle.h, ns, bundle.dataMod),
      gTag: modPow(bundle.g, bundle.N, bundle.tagMod),
    };
    liftCache.set(bundle, bases);
  }
  return bases;
}

/** (1+N)^a mod N^(s+1) by binomial expansion: s+1 terms. */
export function powBaseOnePlusN(bundle: KeyBundle, a: bigint): bigint {
  const mod = bundle.dataMod;
  const N = bundle.N;
  let result = 1n;
  let term = 1n;
  const aa = ((a % (mod / N)) + mod / N) % (mod / N);
  for (let j = 1n; j <= BigInt(bundle.sData); j++) {
    term = (term * (((aa - j + 1n) % mod) + mod)) % mod;
    term = (term * modInverse(j, mod)) % mod;
    term = (term * N) % mod;
    result = (result + term) % mod;
  }
  return result;
}

export function packTag(bundle: KeyBundle, r0: bigint, r1: bigint): bigint {
  return (r0 << bundle.tagShift) | r1;
}

export function metaR0(meta: ChunkMeta): bigint {
  if (meta.k === 0n) throw new Error("file id 0 is reserved for zero chunks");
  return (meta.k << 64n) | (BigInt(meta.i) << 32n) | BigInt(meta.n);
}

async function chkHash(bundle: KeyBundle, m: bigint, r0: bigint): Promise<bigint> {
  const mBytes = bigToBytes(m, bundle.plainBytes);
  const r0Bytes = bigToBytes(r0, (128 + bundle.guardBits) / 8);
  const digest = await crypto.subtle.digest(
    "SHA-256",
    concatBytes(mBytes, r0Bytes) as Uint8Array<ArrayBuffer>,
  );
  return bytesToBig(new Uint8Array(digest).subarray(0, bundle.chkBits / 8));
}

export interface Chunk {
  c: bigint;
  t: bigint;
}

export function encZero(bundle: KeyBundle): Chunk {
  const bases = liftedBases(bundle);
  const r1 = randBits(bundle.r1Bits);
  const r2 = randBits(bundle.r2Bits);
  const c = modPow(bases.gData, r1, bundle.dataMod);
  const t = ((1n + r1 * bundle.N) * modPow(bases.gTag, r2, bundle.tagMod)) % bundle.tagMod;
  return { c, t };
}

/** Encrypt one payload block.  Widths other than the bundle's native r1
 * size are for timing studies only: the tag layout cannot carry them, so
 * the result will not verify downstream. */
export async function encData(
  bundle: KeyBundle,
  payload: Uint8Array,
  meta: ChunkMeta,
  r1BitsOverride?: number,
): Promise<Chunk> {
  if (payload.length > bundle.dataBytes) {
    throw new Error(`payload exceeds ${bundle.dataBytes} bytes`);
  }
  const bases = liftedBases(bundle);
  const width = r1BitsOverride ?? bundle.r1Bits;
  const m = bytesToBig(payload);
  const r0 = metaR0(meta);
  const r1 = randBits(width);
  const r2 = randBits(width);
  const chk = await chkHash(bundle, m, r0);
  let c = (powBaseOnePlusN(bundle, m) * modPow(bases.hData, chk, bundle.dataMod)) % bundle.dataMod;
  c = (c * modPow(bases.gData, r1, bundle.dataMod)) % bundle.dataMod;
  const t = ((1n + packTag(bundle, r0, r1) * bundle.N) * modPow(bases.gTag, r2, bundle.tagMod)) % bundle.tagMod;
  return { c, t };
}

export function serializeChunk(bundle: KeyBundle, chunk: Chunk): Uint8Array {
  const cWidth = ((bundle.sData + 1) * bundle.bits) / 8;
  const tWidth = (2 * bundle.bits) / 8;
  return concatBytes(bigToBytes(chunk.c, cWidth), bigToBytes(chunk.t, tWidth));
}
