"""Disclosure preparation and reassembly.

Sender side: a file gets a 40-byte header (length + digest, the whole-message
integrity check), is split into fixed-size blocks, fountain-encoded with
enough spare packets to survive the assumed loss, and each packet is
encrypted and sealed.  The output manifest is the substitution queue an
instrumented client drains one sealed chunk at a time.

Receiver side: verified plaintexts arrive as (payload, meta) pairs in any
order, possibly duplicated across aggregation sets; a per-file decoder
regenerates each packet's coefficients from the metadata and emits the file
once the rank closes, rejecting it if the digest does not match.
"""

from __future__ import annotations

import hashlib
import math
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path

from . import envelope
from .djcrypto import ChunkMeta, DjPublicKey, chunk_to_bytes, enc_data
from .fountain import Decoder, FountainPacket, SourceBlockSet

HEADER_BYTES = 40  # 8-byte length + 32-byte digest
MANIFEST_MAGIC = b"ALKM"
DEFAULT_DELTA = 2.0 ** -20


def block_count(file_len: int, block_size: int) -> int:
    """Blocks needed for a file once the header is prepended."""
    return -(-(file_len + HEADER_BYTES) // block_size)


def packet_count(n: int, rho: float, delta: float = DEFAULT_DELTA) -> int:
    """Packets to emit: the decode threshold n + log2(1/delta), scaled up by
    the assumed end-to-end recovery probability rho."""
    return math.ceil((n + math.log2(1.0 / delta)) / rho)


@dataclass
class Manifest:
    """Prepared submission: ell sealed chunks and a cursor, each chunk used
    at most once."""

    k: int
    n: int
    n2: int
    sealed: list[bytes]
    cursor: int = 0

    @property
    def exhausted(self) -> bool:
        return self.cursor >= self.n2

    def to_bytes(self) -> bytes:
        if not self.sealed:
            raise ValueError("empty manifest")
        head = struct.pack(">QIIII", self.k, self.n, self.n2, self.cursor, len(self.sealed[0]))
        return MANIFEST_MAGIC + head + b"".join(self.sealed)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Manifest":
        if data[:4] != MANIFEST_MAGIC:
            raise ValueError("not a manifest file")
        k, n, n2, cursor, width = struct.unpack_from(">QIIII", data, 4)
        body = data[4 + 24 :]
        if width == 0 or len(body) != n2 * width:
            raise ValueError("manifest length mismatch")
        sealed = [body[j * width : (j + 1) * width] for j in range(n2)]
        return cls(k=k, n=n, n2=n2, sealed=sealed, cursor=cursor)

    def save(self, path: str | Path) -> None:
        tmp = Path(str(path) + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        return cls.from_bytes(Path(path).read_bytes())


def prepare_file(file_bytes: bytes, pk: DjPublicKey, env_public: bytes,
                 rho: float = 0.9, delta: float = DEFAULT_DELTA,
                 rng: random.Random | None = None) -> Manifest:
    """Turn a file into its sealed submission queue."""
    if not file_bytes:
        raise ValueError("refusing to prepare an empty file")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must be in (0, 1]")
    rng = rng or random.SystemRandom()
    block_size = pk.data_bytes
    header = struct.pack(">Q", len(file_bytes)) + hashlib.sha256(file_bytes).digest()
    data = header + file_bytes
    n = block_count(len(file_bytes), block_size)
    if n >= 1 << 32:
        raise ValueError("file too large")
    data += b"\x00" * (n * block_size - len(data))
    blocks = SourceBlockSet([data[j * block_size : (j + 1) * block_size] for j in range(n)])
    k = 0
    while k == 0:
        k = rng.getrandbits(64)
    n2 = packet_count(n, rho, delta)
    sealed = []
    for i in range(n2):
        packet = blocks.encode(k, i)
        chunk = enc_data(pk, packet.payload, ChunkMeta(k=k, i=i, n=n), rng)
        sealed.append(envelope.seal(env_public, chunk_to_bytes(pk, chunk), rng))
    return Manifest(k=k, n=n, n2=n2, sealed=sealed)


def next_chunk(manifest: Manifest) -> bytes | None:
    """The next unused sealed chunk, or None once all n2 are spent."""
    if manifest.exhausted:
        return None
    sealed = manifest.sealed[manifest.cursor]
    manifest.cursor += 1
    return sealed


@dataclass
class _FileState:
    decoder: Decoder
    seen: set = field(default_factory=set)


class ReassemblyStore:
    """Per-file decoders keyed by file id.

    Completed files verify their digest before release; a mismatch discards
    the file and reports corruption (an anomaly worth alarming on, since
    verified chunks should never assemble into a bad file).  Safe for
    concurrent use across distinct file ids; serialize per id.
    """

    def __init__(self, block_size: int):
        self.block_size = block_size
        self._files: dict[int, _FileState] = {}
        self.completed: dict[int, bytes] = {}
        self.corrupted: set = set()

    def add(self, payload: bytes, meta: ChunkMeta):
        """Feed one verified plaintext.  Returns (status, file_bytes) where
        status is one of new, duplicate, complete, corrupt; file_bytes is set
        only on complete."""
        k = meta.k
        if k in self.completed or k in self.corrupted:
            return "duplicate", None
        state = self._files.get(k)
        if state is None:
            state = _FileState(decoder=Decoder(k, meta.n, self.block_size))
            self._files[k] = state
        if meta.i in state.seen:
            return "duplicate", None
        state.seen.add(meta.i)
        state.decoder.add(FountainPacket(meta.i, payload))
        if not state.decoder.decodable:
            return "new", None
        blocks = state.decoder.finish()
        del self._files[k]
        data = b"".join(blocks)
        (length,) = struct.unpack_from(">Q", data, 0)
        digest = data[8:HEADER_BYTES]
        if length > len(data) - HEADER_BYTES:
            self.corrupted.add(k)
            return "corrupt", None
        file_bytes = data[HEADER_BYTES : HEADER_BYTES + length]
        if hashlib.sha256(file_bytes).digest() != digest:
            self.corrupted.add(k)
            return "corrupt", None
        self.completed[k] = file_bytes
        return "complete", file_bytes


def reassemble_add(store: ReassemblyStore, payload: bytes, meta: ChunkMeta):
    return store.add(payload, meta)
