"""Random linear fountain code over GF(2).

A file split into n equal blocks is encoded into arbitrarily many packets,
each the XOR of a pseudorandom subset of blocks.  The subset is derived
deterministically from (file id, packet index, n), so a receiver that learns
those three values from a chunk's metadata can regenerate the coefficient
vector without any coefficient bits on the wire.  Any n linearly independent
packets reconstruct the blocks exactly; random vectors reach full rank after
about n + log2(1/delta) receptions with failure probability delta.

Rows live as Python ints (bit j set = block j included), which makes row
reduction a single XOR.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass


def coeff_vector(k: int, i: int, n: int) -> int:
    """Deterministic nonzero coefficient row for packet i of file k."""
    if n < 1:
        raise ValueError("n must be >= 1")
    nbytes = (n + 7) // 8
    retry = 0
    while True:
        seed = struct.pack(">QIII", k, i, n, retry)
        vec = int.from_bytes(hashlib.shake_256(seed).digest(nbytes), "big")
        vec &= (1 << n) - 1
        if vec:
            return vec
        retry += 1


@dataclass(frozen=True)
class FountainPacket:
    index: int
    payload: bytes


class SourceBlockSet:
    """n equal-size blocks ready for encoding."""

    def __init__(self, blocks: list[bytes]):
        if not blocks:
            raise ValueError("need at least one block")
        size = len(blocks[0])
        if any(len(b) != size for b in blocks):
            raise ValueError("blocks must be equal size")
        self.block_size = size
        self.n = len(blocks)
        self._ints = [int.from_bytes(b, "big") for b in blocks]

    def encode(self, k: int, i: int) -> FountainPacket:
        vec = coeff_vector(k, i, self.n)
        acc = 0
        j = 0
        while vec:
            if vec & 1:
                acc ^= self._ints[j]
            vec >>= 1
            j += 1
        return FountainPacket(i, acc.to_bytes(self.block_size, "big"))


def encode_packet(blocks: SourceBlockSet, k: int, i: int) -> FountainPacket:
    return blocks.encode(k, i)


class Decoder:
    """Incremental GF(2) elimination for one file.

    Single-owner mutable state: callers serialize access per file id.
    """

    def __init__(self, k: int, n: int, block_size: int):
        self.k = k
        self.n = n
        self.block_size = block_size
        self._pivots: dict[int, tuple[int, int]] = {}  # top bit -> (vec, payload)

    @property
    def rank(self) -> int:
        return len(self._pivots)

    @property
    def decodable(self) -> bool:
        return self.rank == self.n

    def add(self, packet: FountainPacket) -> bool:
        """Fold one packet in; True if it increased the rank."""
        if len(packet.payload) != self.block_size:
            raise ValueError("payload size mismatch")
        vec = coeff_vector(self.k, packet.index, self.n)
        return self.add_row(vec, int.from_bytes(packet.payload, "big"))

    def add_row(self, vec: int, payload: int) -> bool:
        while vec:
            top = vec.bit_length() - 1
            got = self._pivots.get(top)
            if got is None:
                self._pivots[top] = (vec, payload)
                return True
            vec ^= got[0]
            payload ^= got[1]
        return False

    def finish(self) -> list[bytes] | None:
        """The original blocks if rank == n, else None (need more packets)."""
        if not self.decodable:
            return None
        rows = dict(self._pivots)
        for top in sorted(rows):
            vec, payload = rows[top]
            low = vec & ~(1 << top)
            while low:
                b = low.bit_length() - 1
                bvec, bpay = rows[b]
                vec ^= bvec
                payload ^= bpay
                low = vec & ~(1 << top)
            rows[top] = (vec, payload)
        return [rows[j][1].to_bytes(self.block_size, "big") for j in range(self.n)]
