/** BigInt helpers shared by the client-side encryption code. */

export function modPow(base: bigint, exponent: bigint, modulus: bigint): bigint {
  if (modulus <= 0n) throw new Error("modulus must be positive");
  if (exponent < 0n) throw new Error("negative exponent");
  let result = 1n;
  let b = base % modulus;
  let e = exponent;
  while (e > 0n) {
    if (e & 1n) result = (result * b) % modulus;
    b = (b * b) % modulus;
    e >>= 1n;
  }
  return result;
}

/** Modular inverse via extended Euclid; throws when gcd != 1. */
export function modInverse(a: bigint, modulus: bigint): bigint {
  let [old_r, r] = [((a % modulus) + modulus) % modulus, modulus];
  let [old_s, s] = [1n, 0n];
  while (r !== 0n) {
    const q = old_r / r;
    [old_r, r] = [r, old_r - q * r];
    [old_s, s] = [s, old_s - q * s];
  }
  if (old_r !== 1n) throw new Error("not invertible");
  return ((old_s % modulus) + modulus) % modulus;
}

export function bytesToBig(bytes: Uint8Array): bigint {
  let v = 0n;
  for (const byte of bytes) v = (v << 8n) | BigInt(byte);
  return v;
}

export function bigToBytes(value: bigint, width: number): Uint8Array {
  const out = new Uint8Array(width);
  let v = value;
  for (let j = width - 1; j >= 0; j--) {
    out[j] = Number(v & 0xffn);
    v >>= 8n;
  }
  if (v !== 0n) throw new Error(`value does not fit in ${width} bytes`);
  return out;
}

/** Uniform random bigint of exactly the requested bit budget (may have
 * leading zero bits); uses the runtime's cryptographic generator. */
export function randBits(bits: number): bigint {
  const bytes = new Uint8Array(Math.ceil(bits / 8));
  crypto.getRandomValues(bytes);
  const excess = bytes.length * 8 - bits;
  if (excess > 0) bytes[0] &= 0xff >> excess;
  return bytesToBig(bytes);
}

export function concatBytes(...parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

const B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

/** Standard base64, portable across browser and node without Buffer. */
export function base64Encode(bytes: Uint8Array): string {
  let out = "";
  for (let j = 0; j < bytes.length; j += 3) {
    const a = bytes[j];
    const b = j + 1 < bytes.length ? bytes[j + 1] : 0;
    const c = j + 2 < bytes.length ? bytes[j + 2] : 0;
    out += B64[a >> 2] + B64[((a & 3) << 4) | (b >> 4)];
    out += j + 1 < bytes.length ? B64[((b & 15) << 2) | (c >> 6)] : "=";
    out += j + 2 < bytes.length ? B64[c & 63] : "=";
  }
  return out;
}
