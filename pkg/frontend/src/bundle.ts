/** Parser for the published key bundle (magic "ALK1"): everything a
 * submitting client needs, served as one static file. */

import { bytesToBig } from "./bigmath.js";

export interface KeyBundle {
  N: bigint;
  sData: number;
  g: bigint;
  h: bigint;
  guardBits: number;
  r1Bits: number;
  r2Bits: number;
  envPublic: Uint8Array;
  sealedLen: number;
  bits: number;
  plainBytes: number;
  dataBytes: number;
  chunkBytes: number;
  chkBits: number;
  tagShift: bigint;
  dataMod: bigint;
  tagMod: bigint;
}

function readFields(data: Uint8Array, count: number): Uint8Array[] {
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const fields: Uint8Array[] = [];
  let off = 0;
  for (let j = 0; j < count; j++) {
    if (off + 4 > data.length) throw new Error("truncated bundle");
    const len = view.getUint32(off);
    off += 4;
    if (off + len > data.length) throw new Error("truncated bundle");
    fields.push(data.subarray(off, off + len));
    off += len;
  }
  if (off !== data.length) throw new Error("trailing bytes in bundle");
  return fields;
}

export function parseBundle(data: Uint8Array): KeyBundle {
  const magic = new TextDecoder().decode(data.subarray(0, 4));
  if (magic !== "ALK1") throw new Error("not a key bundle");
  const f = readFields(data.subarray(4), 9);
  const N = bytesToBig(f[0]);
  const sData = Number(bytesToBig(f[1]));
  const bits = N.toString(2).length;
  const plainBytes = (sData * bits) / 8;
  const r1Bits = Number(bytesToBig(f[5]));
  const guardBits = Number(bytesToBig(f[4]));
  return {
    N,
    sData,
    g: bytesToBig(f[2]),
    h: bytesToBig(f[3]),
    guardBits,
    r1Bits,
    r2Bits: Number(bytesToBig(f[6])),
    envPublic: new Uint8Array(f[7]),
    sealedLen: Number(bytesToBig(f[8])),
    bits,
    plainBytes,
    dataBytes: plainBytes - 1,
    chunkBytes: ((sData + 3) * bits) / 8,
    chkBits: bits / 16,
    tagShift: BigInt(r1Bits + guardBits),
    dataMod: N ** BigInt(sData + 1),
    tagMod: N * N,
  };
}
