/** Hybrid seal for outgoing chunks: X25519 encapsulation, HKDF-SHA256,
 * AES-256-GCM, one fresh keypair per seal.  WebCrypto only, so the same
 * code runs headless and in a browser worker. */

import { concatBytes } from "./bigmath.js";

const VERSION = 1;
const INFO = new TextEncoder().encode("coverpipe-envelope-v1");

// WebCrypto's lib types insist on Uint8Array<ArrayBuffer>; ours are always
// freshly allocated, so the cast is sound
const buf = (u: Uint8Array) => u as Uint8Array<ArrayBuffer>;

export async function sealChunk(envPublic: Uint8Array, chunkBytes: Uint8Array): Promise<Uint8Array> {
  const recipient = await crypto.subtle.importKey("raw", buf(envPublic), "X25519", true, []);
  const eph = (await crypto.subtle.generateKey("X25519", true, ["deriveBits"])) as CryptoKeyPair;
  const ephPub = new Uint8Array(await crypto.subtle.exportKey("raw", eph.publicKey));
  const shared = new Uint8Array(
    await crypto.subtle.deriveBits({ name: "X25519", public: recipient }, eph.privateKey, 256),
  );
  const hkdfKey = await crypto.subtle.importKey("raw", buf(shared), "HKDF", false, ["deriveBits"]);
  const keyBits = await crypto.subtle.deriveBits(
    {
      name: "HKDF",
      hash: "SHA-256",
      salt: new Uint8Array(0),
      info: buf(concatBytes(INFO, ephPub, envPublic)),
    },
    hkdfKey,
    256,
  );
  const aes = await crypto.subtle.importKey("raw", keyBits, "AES-GCM", false, ["encrypt"]);
  const body = new Uint8Array(
    await crypto.subtle.encrypt(
      { name: "AES-GCM", iv: new Uint8Array(12), additionalData: new Uint8Array([VERSION]) },
      aes,
      buf(chunkBytes),
    ),
  );
  return concatBytes(new Uint8Array([VERSION]), ephPub, body);
}
