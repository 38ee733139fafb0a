"""coverpipe: an unobservable disclosure submission pipeline.

Submissions hide inside ubiquitous cover traffic as aggregatable encryptions
of zero; relays fold the flood into per-epoch buckets a single trusted
decryptor can drain over a household downlink, and the analytics module
carries the closed-form capacity arithmetic the design rests on.
"""

from .djcrypto import (
    Chunk,
    ChunkMeta,
    DjPrivateKey,
    DjPublicKey,
    aggregate,
    chunk_from_bytes,
    chunk_to_bytes,
    dec_vrfy,
    enc_data,
    enc_zero,
    identity_chunk,
    is_white,
    keygen,
    psi,
    psi_inv,
)
from .envelope import EnvKeyPair, env_keygen, open_sealed, seal, sealed_len

__all__ = [
    "Chunk",
    "ChunkMeta",
    "DjPrivateKey",
    "DjPublicKey",
    "EnvKeyPair",
    "aggregate",
    "chunk_from_bytes",
    "chunk_to_bytes",
    "dec_vrfy",
    "enc_data",
    "enc_zero",
    "env_keygen",
    "identity_chunk",
    "is_white",
    "keygen",
    "open_sealed",
    "psi",
    "psi_inv",
    "seal",
    "sealed_len",
]
