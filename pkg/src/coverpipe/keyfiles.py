"""On-disk key bundle formats.

Public bundle ("ALK1"): everything a submitting client needs, in one file
that can be served statically: the encryption modulus and bases, the tag
layout, the envelope public key, and the published sealed-chunk length.
Fields are big-endian with a 4-byte length prefix each, in fixed order.

Secret files: "ALKD" holds the decryptor's factorization (plus the public
fields so it loads standalone); "ALKA" holds the relay tier's envelope
private key.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from gmpy2 import mpz

from . import envelope
from .djcrypto import DjPrivateKey, DjPublicKey

BUNDLE_MAGIC = b"ALK1"
DECRYPTOR_MAGIC = b"ALKD"
AGGREGATOR_MAGIC = b"ALKA"


@dataclass(frozen=True)
class PublicBundle:
    """Parsed ALK1 file: submission key material plus wire constants."""

    pk: DjPublicKey
    env_public: bytes
    sealed_len: int


def _pack_fields(fields: list[bytes]) -> bytes:
    out = bytearray()
    for f in fields:
        out += struct.pack(">I", len(f)) + f
    return bytes(out)


def _unpack_fields(data: bytes, count: int) -> list[bytes]:
    fields = []
    off = 0
    for _ in range(count):
        if off + 4 > len(data):
            raise ValueError("truncated key file")
        (n,) = struct.unpack_from(">I", data, off)
        off += 4
        if off + n > len(data):
            raise ValueError("truncated key file")
        fields.append(data[off : off + n])
        off += n
    if off != len(data):
        raise ValueError("trailing bytes in key file")
    return fields


def _int_bytes(x) -> bytes:
    x = int(x)
    return x.to_bytes(max(1, (x.bit_length() + 7) // 8), "big")


def bundle_to_bytes(pk: DjPublicKey, env_public: bytes) -> bytes:
    fields = [
        _int_bytes(pk.N),
        _int_bytes(pk.s_data),
        _int_bytes(pk.g),
        _int_bytes(pk.h),
        _int_bytes(pk.guard_bits),
        _int_bytes(pk.r1_bits),
        _int_bytes(pk.r2_bits),
        env_public,
        _int_bytes(envelope.sealed_len(pk.chunk_bytes)),
    ]
    return BUNDLE_MAGIC + _pack_fields(fields)


def bundle_from_bytes(data: bytes) -> PublicBundle:
    if data[:4] != BUNDLE_MAGIC:
        raise ValueError("not a public key bundle")
    f = _unpack_fields(data[4:], 9)
    pk = DjPublicKey(
        N=mpz(int.from_bytes(f[0], "big")),
        s_data=int.from_bytes(f[1], "big"),
        g=mpz(int.from_bytes(f[2], "big")),
        h=mpz(int.from_bytes(f[3], "big")),
        guard_bits=int.from_bytes(f[4], "big"),
        r1_bits=int.from_bytes(f[5], "big"),
        r2_bits=int.from_bytes(f[6], "big"),
    )
    sealed = int.from_bytes(f[8], "big")
    if sealed != envelope.sealed_len(pk.chunk_bytes):
        raise ValueError("sealed length does not match key parameters")
    return PublicBundle(pk=pk, env_public=f[7], sealed_len=sealed)


def decryptor_secret_to_bytes(sk: DjPrivateKey) -> bytes:
    pk = sk.public
    fields = [
        _int_bytes(sk.p),
        _int_bytes(sk.q),
        _int_bytes(pk.s_data),
        _int_bytes(pk.g),
        _int_bytes(pk.h),
        _int_bytes(pk.guard_bits),
        _int_bytes(pk.r1_bits),
        _int_bytes(pk.r2_bits),
    ]
    return DECRYPTOR_MAGIC + _pack_fields(fields)


def decryptor_secret_from_bytes(data: bytes) -> DjPrivateKey:
    if data[:4] != DECRYPTOR_MAGIC:
        raise ValueError("not a decryptor secret file")
    f = _unpack_fields(data[4:], 8)
    p = mpz(int.from_bytes(f[0], "big"))
    q = mpz(int.from_bytes(f[1], "big"))
    pk = DjPublicKey(
        N=p * q,
        s_data=int.from_bytes(f[2], "big"),
        g=mpz(int.from_bytes(f[3], "big")),
        h=mpz(int.from_bytes(f[4], "big")),
        guard_bits=int.from_bytes(f[5], "big"),
        r1_bits=int.from_bytes(f[6], "big"),
        r2_bits=int.from_bytes(f[7], "big"),
    )
    return DjPrivateKey(p=p, q=q, public=pk)


def aggregator_secret_to_bytes(env_private: bytes) -> bytes:
    return AGGREGATOR_MAGIC + _pack_fields([env_private])


def aggregator_secret_from_bytes(data: bytes) -> bytes:
    if data[:4] != AGGREGATOR_MAGIC:
        raise ValueError("not an aggregator secret file")
    return _unpack_fields(data[4:], 1)[0]


def write(path: str | Path, data: bytes) -> None:
    Path(path).write_bytes(data)


def read(path: str | Path) -> bytes:
    return Path(path).read_bytes()
