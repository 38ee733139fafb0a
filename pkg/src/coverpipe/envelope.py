"""Outer envelope for chunks on the public network.

Chunks are additively malleable by design, so anyone who can see them could
fold a captured submission into their own and learn from what gets published
whether it carried data.  The envelope closes that channel: every submission
travels as a hybrid authenticated encryption (X25519 key encapsulation,
HKDF-SHA256, AES-256-GCM) under the relay tier's public key, removed only
where that key lives.  A fresh encapsulation keypair per seal makes every
output unique; sealing never reuses a derived key, so the fixed zero nonce is
sound.  Every sealed blob has the same length for equal-length inputs, and
any bit flip anywhere makes open_sealed reject.

Rejections are silent by contract (None, no error detail): a sender must not
be able to learn anything from the fate of a submission.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

VERSION = 1
ENCAP_BYTES = 32
TAG_BYTES = 16
OVERHEAD = 1 + ENCAP_BYTES + TAG_BYTES
_NONCE = b"\x00" * 12
_INFO = b"coverpipe-envelope-v1"

# parsed private keys are reused millions of times on the relay tier
_PRIV_CACHE: dict[bytes, tuple[X25519PrivateKey, bytes]] = {}


@dataclass(frozen=True)
class EnvKeyPair:
    """Raw X25519 keypair; 32 bytes each side."""

    public: bytes
    private: bytes


def env_keygen(rng: random.Random | None = None) -> EnvKeyPair:
    """Generate an envelope keypair.  A seeded rng gives a reproducible pair
    (simulation use); the default draws from the system rng."""
    if rng is None:
        priv = X25519PrivateKey.generate()
    else:
        priv = X25519PrivateKey.from_private_bytes(rng.getrandbits(256).to_bytes(32, "big"))
    return EnvKeyPair(
        public=priv.public_key().public_bytes_raw(),
        private=priv.private_bytes_raw(),
    )


def sealed_len(chunk_len: int) -> int:
    """Wire size of a sealed chunk: version byte, encapsulation, body, tag."""
    return OVERHEAD + chunk_len


def _derive_key(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    # HKDF-SHA256 (zero salt, one output block): extract then a single expand
    prk = hmac.new(b"\x00" * 32, shared, hashlib.sha256).digest()
    return hmac.new(prk, _INFO + eph_pub + recipient_pub + b"\x01", hashlib.sha256).digest()


def seal(public: bytes, data: bytes, rng: random.Random | None = None) -> bytes:
    """Seal `data` to the holder of `public`.  Fresh encapsulation per call;
    two seals of the same input never match."""
    if rng is None:
        eph = X25519PrivateKey.generate()
    else:
        eph = X25519PrivateKey.from_private_bytes(rng.getrandbits(256).to_bytes(32, "big"))
    eph_pub = eph.public_key().public_bytes_raw()
    shared = eph.exchange(X25519PublicKey.from_public_bytes(public))
    key = _derive_key(shared, eph_pub, public)
    body = AESGCM(key).encrypt(_NONCE, data, bytes([VERSION]))
    return bytes([VERSION]) + eph_pub + body


def open_sealed(private: bytes, sealed: bytes) -> bytes | None:
    """Recover the sealed data, or None for anything that is not an intact
    seal under this key (tampering, truncation, wrong key, wrong version).
    No error detail escapes; callers drop rejects silently."""
    if len(sealed) < OVERHEAD or sealed[0] != VERSION:
        return None
    eph_pub = sealed[1 : 1 + ENCAP_BYTES]
    try:
        cached = _PRIV_CACHE.get(private)
        if cached is None:
            priv = X25519PrivateKey.from_private_bytes(private)
            cached = (priv, priv.public_key().public_bytes_raw())
            _PRIV_CACHE[private] = cached
        priv, recipient_pub = cached
        shared = priv.exchange(X25519PublicKey.from_public_bytes(eph_pub))
        key = _derive_key(shared, eph_pub, recipient_pub)
        return AESGCM(key).decrypt(_NONCE, sealed[1 + ENCAP_BYTES :], bytes([VERSION]))
    except (InvalidTag, ValueError):
        return None
