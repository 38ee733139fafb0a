"""Decryptor tier: tree decryption, deduplication, reassembly.

Testing whether an aggregate is empty costs one short tag decryption, a full
decryption many times more, and almost every bucket in cover traffic is
empty.  The tree walk exploits that: leaves are the epoch's aggregates,
inner nodes their running products, and the walk prunes any subtree whose
root tag shows an empty sum.  Only left children are ever decrypted; a right
child's tag value is the parent's minus the sibling's, exact integer
arithmetic because the tag fields cannot carry into each other.  Non-empty
leaves get the one full decryption they deserve; invalid ones (collisions)
are counted and dropped, an expected event, not an error.

Chunks recovered from several aggregation sets deduplicate on (file id,
index) before reassembly.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from pathlib import Path

from .disclosure import ReassemblyStore
from .djcrypto import (
    Chunk,
    ChunkMeta,
    DjPrivateKey,
    aggregate,
    chunk_from_bytes,
    dec_vrfy_with_tag,
    identity_chunk,
    is_white,
    tag_r0_field,
)
from .relay import (
    FRAME_AGGREGATE,
    FRAME_EPOCH_MARK,
    decode_aggregate_frame,
    recv_frame,
)

DEFAULT_TREE_HEIGHT = 8


@dataclass
class DecTree:
    """Full binary tree in heap layout; node = product of its children."""

    height: int
    nodes: list  # 2^(height+1) - 1 chunks, nodes[0] is the root
    provenance: list  # per leaf: (epoch, set, bucket) or None for padding

    @property
    def leaf_base(self) -> int:
        return (1 << self.height) - 1


@dataclass
class TreeStats:
    tag_decryptions: int = 0
    full_decryptions: int = 0
    invalid_leaves: int = 0

    def add(self, other: "TreeStats"):
        self.tag_decryptions += other.tag_decryptions
        self.full_decryptions += other.full_decryptions
        self.invalid_leaves += other.invalid_leaves


@dataclass(frozen=True)
class RecoveredChunk:
    payload: bytes
    meta: ChunkMeta
    provenance: tuple


def build_tree(pk, leaves: list[Chunk], height: int = DEFAULT_TREE_HEIGHT,
               provenance: list | None = None) -> DecTree:
    """Pad to 2^height leaves with identities and fill inner products."""
    capacity = 1 << height
    if len(leaves) > capacity:
        raise ValueError(f"more than {capacity} leaves")
    padded = list(leaves) + [identity_chunk()] * (capacity - len(leaves))
    prov = list(provenance or [None] * len(leaves))
    prov += [None] * (capacity - len(prov))
    nodes = [None] * (2 * capacity - 1)
    base = capacity - 1
    for j, chunk in enumerate(padded):
        nodes[base + j] = chunk
    for idx in range(base - 1, -1, -1):
        nodes[idx] = aggregate(pk, nodes[2 * idx + 1], nodes[2 * idx + 2])
    return DecTree(height=height, nodes=nodes, provenance=prov)


def tree_decrypt(sk: DjPrivateKey, tree: DecTree) -> tuple[list[RecoveredChunk], TreeStats]:
    """Walk the tree, recover every verifiable non-empty leaf."""
    pk = sk.public
    stats = TreeStats()
    recovered: list[RecoveredChunk] = []
    base = tree.leaf_base

    white, root_value = is_white(sk, tree.nodes[0])
    stats.tag_decryptions += 1
    if white:
        return recovered, stats

    def visit_leaf(idx: int, tag_value: int):
        result = dec_vrfy_with_tag(sk, tree.nodes[idx], tag_value)
        stats.full_decryptions += 1
        if result is None:
            stats.invalid_leaves += 1
            return
        payload, meta = result
        if meta.is_white:
            return
        recovered.append(RecoveredChunk(payload, meta, tree.provenance[idx - base] or ()))

    stack = [(0, root_value)]
    while stack:
        idx, value = stack.pop()
        if idx >= base:
            visit_leaf(idx, value)
            continue
        left, right = 2 * idx + 1, 2 * idx + 2
        lwhite, lvalue = is_white(sk, tree.nodes[left])
        stats.tag_decryptions += 1
        rvalue = value - lvalue  # exact: guard bits absorb all carries
        if not lwhite:
            stack.append((left, lvalue))
        if tag_r0_field(pk, rvalue) != 0:
            stack.append((right, rvalue))
    return recovered, stats


def group_into_trees(aggregates: list[tuple[int, int, Chunk]], height: int):
    """Split one epoch's (set, bucket, chunk) list into tree-sized slices."""
    capacity = 1 << height
    for off in range(0, len(aggregates), capacity):
        batch = aggregates[off : off + capacity]
        yield [c for _, _, c in batch], [(s, b) for s, b, _ in batch]


def process_epoch(sk: DjPrivateKey, epoch: int,
                  aggregates: list[tuple[int, int, Chunk]],
                  seen: set, height: int = DEFAULT_TREE_HEIGHT,
                  ) -> tuple[list[RecoveredChunk], TreeStats, int]:
    """Tree-decrypt one epoch and deduplicate on (k, i) across sets and
    epochs.  Returns (fresh chunks, stats, duplicate count)."""
    pk = sk.public
    stats = TreeStats()
    fresh: list[RecoveredChunk] = []
    duplicates = 0
    for leaves, prov in group_into_trees(aggregates, height):
        prov = [(epoch, s, b) for s, b in prov]
        tree = build_tree(pk, leaves, height, prov)
        recovered, tstats = tree_decrypt(sk, tree)
        stats.add(tstats)
        for item in recovered:
            key = (item.meta.k, item.meta.i)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            fresh.append(item)
    return fresh, stats, duplicates


# ---------------------------------------------------------------------------
# expected-count oracle used by the service's anomaly alarm

def expected_invalid_fraction(k: int, bucket_count: int, split_count: int) -> float:
    """Analytic fraction of data chunks lost to collisions at gray rate k."""
    if k <= 1:
        return 0.0
    per_set = bucket_count / split_count
    p_alone = (1.0 - 1.0 / per_set) ** (k - 1)
    return (1.0 - p_alone) ** split_count


@dataclass
class DecryptorMetrics:
    epochs: int = 0
    aggregates: int = 0
    recovered: int = 0
    duplicates: int = 0
    blacks: int = 0
    files_complete: int = 0
    files_corrupt: int = 0
    tag_decryptions: int = 0
    full_decryptions: int = 0
    black_alarm: bool = False

    def status_lines(self) -> list[str]:
        return [
            f"epochs={self.epochs}",
            f"aggregates={self.aggregates}",
            f"recovered={self.recovered}",
            f"duplicates={self.duplicates}",
            f"blacks={self.blacks}",
            f"files_complete={self.files_complete}",
            f"files_corrupt={self.files_corrupt}",
            f"tag_decryptions={self.tag_decryptions}",
            f"full_decryptions={self.full_decryptions}",
            f"black_alarm={'yes' if self.black_alarm else 'no'}",
        ]


class DecryptorEngine:
    """Frame-level consumer shared by the socket service and the simulator:
    collects aggregates until the epoch marker, then decrypts, deduplicates,
    reassembles, and updates metrics."""

    def __init__(self, sk: DjPrivateKey, height: int = DEFAULT_TREE_HEIGHT,
                 out_dir: str | Path | None = None, alarm_factor: float = 3.0):
        self.sk = sk
        self.height = height
        self.out_dir = Path(out_dir) if out_dir else None
        self.alarm_factor = alarm_factor
        self.metrics = DecryptorMetrics()
        self.store = ReassemblyStore(sk.public.data_bytes)
        self.seen: set = set()
        self._pending: list[tuple[int, int, Chunk]] = []
        self._config_guess: tuple[int, int] | None = None
        self.recovered_log: list[RecoveredChunk] = []

    def handle_frame(self, ftype: int, payload: bytes) -> None:
        if ftype == FRAME_AGGREGATE:
            epoch, set_idx, bucket, data = decode_aggregate_frame(payload)
            self._pending.append((set_idx, bucket, chunk_from_bytes(self.sk.public, data)))
        elif ftype == FRAME_EPOCH_MARK:
            (epoch,) = struct.unpack(">Q", payload)
            self.finish_epoch(epoch)
        # hello and unknown types ignored

    def add_aggregate(self, set_idx: int, bucket: int, chunk: Chunk) -> None:
        """In-process feed, bypassing the wire codec."""
        self._pending.append((set_idx, bucket, chunk))

    def finish_epoch(self, epoch: int) -> list[RecoveredChunk]:
        aggregates, self._pending = self._pending, []
        m = self.metrics
        m.epochs += 1
        m.aggregates += len(aggregates)
        fresh, stats, dups = process_epoch(self.sk, epoch, aggregates, self.seen, self.height)
        m.recovered += len(fresh)
        m.duplicates += dups
        m.blacks += stats.invalid_leaves
        m.tag_decryptions += stats.tag_decryptions
        m.full_decryptions += stats.full_decryptions
        self._update_alarm(stats, len(fresh))
        for item in fresh:
            self.recovered_log.append(item)
            status, file_bytes = self.store.add(item.payload, item.meta)
            if status == "complete":
                m.files_complete += 1
                if self.out_dir is not None:
                    self.out_dir.mkdir(parents=True, exist_ok=True)
                    (self.out_dir / f"{item.meta.k:016x}.bin").write_bytes(file_bytes)
            elif status == "corrupt":
                m.files_corrupt += 1
        return fresh

    def _update_alarm(self, stats: TreeStats, fresh: int):
        # collisions beyond alarm_factor x the analytic expectation for the
        # observed gray rate suggest someone is burning bandwidth on purpose
        k = fresh + stats.invalid_leaves
        if k < 2 or self._config_guess is None:
            return
        bucket_count, split_count = self._config_guess
        expect = expected_invalid_fraction(k, bucket_count, split_count) * k
        if stats.invalid_leaves > self.alarm_factor * max(expect, 1.0):
            self.metrics.black_alarm = True

    def set_epoch_shape(self, bucket_count: int, split_count: int):
        self._config_guess = (bucket_count, split_count)


class DecryptorService:
    """Socket front end: one listener for aggregator frames, one line-based
    status endpoint that dumps current counters per connection."""

    def __init__(self, listen, status_listen, sk: DjPrivateKey,
                 out_dir: str | Path | None = None, height: int = DEFAULT_TREE_HEIGHT):
        import socket as _socket

        self.engine = DecryptorEngine(sk, height=height, out_dir=out_dir)
        self._stop = threading.Event()
        self._listener = _socket.create_server(listen)
        self._status = _socket.create_server(status_listen)
        self._lock = threading.Lock()
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    @property
    def status_port(self) -> int:
        return self._status.getsockname()[1]

    def start(self):
        self._threads = [
            threading.Thread(target=self._accept_loop, daemon=True),
            threading.Thread(target=self._status_loop, daemon=True),
        ]
        for t in self._threads:
            t.start()

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_conn, args=(conn,), daemon=True).start()

    def _serve_conn(self, conn):
        with conn:
            while not self._stop.is_set():
                frame = recv_frame(conn)
                if frame is None:
                    return
                with self._lock:
                    self.engine.handle_frame(*frame)

    def _status_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._status.accept()
            except OSError:
                return
            with conn:
                with self._lock:
                    lines = self.engine.metrics.status_lines()
                try:
                    conn.sendall(("\n".join(lines) + "\n").encode())
                except OSError:
                    pass

    def stop(self):
        self._stop.set()
        self._listener.close()
        self._status.close()
