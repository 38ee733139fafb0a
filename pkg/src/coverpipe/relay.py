"""Relay tier: guards and aggregators.

Guards face the public: they accept ad-style HTTP posts, strip the transport
encoding, and forward fixed-length sealed chunks upstream.  They hold no
keys, answer every request identically (204, empty), and drop anything
malformed without a trace, so no sender can learn whether a submission was
accepted.

Aggregators hold the envelope key.  Each incoming chunk is unsealed and
multiplied into one uniformly random bucket per aggregation set; once per
epoch the grid is flushed downstream as one frame per bucket plus an epoch
marker, and reset to identities.  Identity-initialized buckets are valid
white aggregates, so untouched buckets decrypt as empty.

Inter-tier transport is a length-prefixed frame stream over one persistent
connection per peer.  If the downstream peer is unavailable the aggregator
buffers at most one flushed epoch and then drops the oldest, keeping memory
bounded.
"""

from __future__ import annotations

import base64
import binascii
import random
import socket
import struct
import threading
from collections import deque
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import envelope
from .djcrypto import (
    Chunk,
    DjPublicKey,
    aggregate,
    chunk_from_bytes,
    chunk_to_bytes,
    identity_chunk,
)

PROTOCOL_VERSION = 1

FRAME_HELLO = 0x00
FRAME_CHUNK = 0x01
FRAME_AGGREGATE = 0x02
FRAME_EPOCH_MARK = 0x03

AGG_HEADER = struct.Struct(">QHI")  # epoch, set, bucket


# ---------------------------------------------------------------------------
# frame codec

def encode_frame(ftype: int, payload: bytes) -> bytes:
    return struct.pack(">IB", len(payload), ftype) + payload


def recv_exact(sock: socket.socket, size: int) -> bytes | None:
    buf = b""
    while len(buf) < size:
        part = sock.recv(size - len(buf))
        if not part:
            return None
        buf += part
    return buf


def recv_frame(sock: socket.socket, max_payload: int = 1 << 24) -> tuple[int, bytes] | None:
    head = recv_exact(sock, 5)
    if head is None:
        return None
    length, ftype = struct.unpack(">IB", head)
    if length > max_payload:
        return None
    payload = recv_exact(sock, length) if length else b""
    if payload is None:
        return None
    return ftype, payload


def hello_frame() -> bytes:
    return encode_frame(FRAME_HELLO, bytes([PROTOCOL_VERSION]))


def encode_aggregate_frame(epoch: int, set_idx: int, bucket: int, chunk_bytes: bytes) -> bytes:
    return encode_frame(FRAME_AGGREGATE, AGG_HEADER.pack(epoch, set_idx, bucket) + chunk_bytes)


def decode_aggregate_frame(payload: bytes) -> tuple[int, int, int, bytes]:
    epoch, set_idx, bucket = AGG_HEADER.unpack_from(payload, 0)
    return epoch, set_idx, bucket, payload[AGG_HEADER.size :]


# ---------------------------------------------------------------------------
# guard

def guard_decode(body: bytes, sealed_len: int) -> bytes | None:
    """Strip the transport encoding from a request body.  Returns the sealed
    chunk, or None for anything that is not exactly one well-formed chunk."""
    try:
        decoded = base64.b64decode(body, validate=True)
    except (binascii.Error, ValueError):
        return None
    if len(decoded) != sealed_len:
        return None
    return decoded


def guard_handle(body: bytes, sealed_len: int) -> bytes | None:
    """Guard logic for one request: a CHUNK frame to forward, or None to
    silently drop.  The HTTP response is identical either way."""
    decoded = guard_decode(body, sealed_len)
    if decoded is None:
        return None
    return encode_frame(FRAME_CHUNK, decoded)


# ---------------------------------------------------------------------------
# aggregation grid

@dataclass(frozen=True)
class EpochConfig:
    epoch_duration: float = 1.0
    bucket_count: int = 768
    split_count: int = 1

    def __post_init__(self):
        if self.bucket_count < 1 or self.split_count < 1:
            raise ValueError("bucket_count and split_count must be >= 1")
        if self.bucket_count % self.split_count:
            raise ValueError("split_count must divide bucket_count")

    @property
    def buckets_per_set(self) -> int:
        return self.bucket_count // self.split_count


@dataclass
class GridStats:
    ingested: int = 0
    rejected: int = 0
    flushed_epochs: int = 0


class BucketGrid:
    """Per-epoch aggregation state: split_count independent sets of buckets.

    ingest() may be called from many connections; mutation is serialized
    behind one lock so flush() observes a quiescent grid.
    """

    def __init__(self, pk: DjPublicKey, config: EpochConfig, rng: random.Random | None = None):
        self.pk = pk
        self.config = config
        self.rng = rng or random.SystemRandom()
        self.stats = GridStats()
        self._lock = threading.Lock()
        self._reset()

    def _reset(self):
        self._grid = [
            [identity_chunk() for _ in range(self.config.buckets_per_set)]
            for _ in range(self.config.split_count)
        ]
        self.counts = [
            [0] * self.config.buckets_per_set for _ in range(self.config.split_count)
        ]

    def ingest_chunk(self, chunk: Chunk) -> None:
        with self._lock:
            for s in range(self.config.split_count):
                b = self.rng.randrange(self.config.buckets_per_set)
                self._grid[s][b] = aggregate(self.pk, self._grid[s][b], chunk)
                self.counts[s][b] += 1
            self.stats.ingested += 1

    def ingest_sealed(self, sealed: bytes, env_private: bytes) -> None:
        """Open the envelope and fold the chunk in; rejects vanish silently."""
        data = envelope.open_sealed(env_private, sealed)
        if data is None or len(data) != self.pk.chunk_bytes:
            self.stats.rejected += 1
            return
        self.ingest_chunk(chunk_from_bytes(self.pk, data))

    def flush(self) -> list[tuple[int, int, Chunk]]:
        """Drain the grid: (set, bucket, chunk) per bucket, then reset."""
        with self._lock:
            out = [
                (s, b, self._grid[s][b])
                for s in range(self.config.split_count)
                for b in range(self.config.buckets_per_set)
            ]
            self._reset()
            self.stats.flushed_epochs += 1
            return out


def agg_ingest(grid: BucketGrid, frame_payload: bytes, env_private: bytes) -> None:
    grid.ingest_sealed(frame_payload, env_private)


def agg_flush(grid: BucketGrid, epoch: int) -> list[bytes]:
    """Encode one epoch's frames: every bucket, then the epoch marker."""
    frames = [
        encode_aggregate_frame(epoch, s, b, chunk_to_bytes(grid.pk, chunk))
        for s, b, chunk in grid.flush()
    ]
    frames.append(encode_frame(FRAME_EPOCH_MARK, struct.pack(">Q", epoch)))
    return frames


# ---------------------------------------------------------------------------
# socket services

class _Upstream:
    """Persistent frame connection with bounded buffering (one epoch)."""

    def __init__(self, addr: tuple[str, int]):
        self.addr = addr
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()
        self._pending: deque[list[bytes]] = deque(maxlen=1)

    def _connect(self):
        if self._sock is None:
            s = socket.create_connection(self.addr, timeout=5)
            s.sendall(hello_frame())
            self._sock = s

    def send_frames(self, frames: list[bytes]) -> bool:
        with self._lock:
            batches = list(self._pending) + [frames]
            self._pending.clear()
            try:
                self._connect()
                for batch in batches:
                    for f in batch:
                        self._sock.sendall(f)
                return True
            except OSError:
                if self._sock is not None:
                    try:
                        self._sock.close()
                    except OSError:
                        pass
                    self._sock = None
                self._pending.extend(batches[-1:])
                return False

    def close(self):
        with self._lock:
            if self._sock is not None:
                try:
                    self._sock.close()
                except OSError:
                    pass
                self._sock = None


class GuardService:
    """HTTP endpoint POST /a -> 204, forwarding valid chunks upstream."""

    def __init__(self, listen: tuple[str, int], upstream: tuple[str, int], sealed_len: int):
        self.sealed_len = sealed_len
        self.upstream = _Upstream(upstream)
        service = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def do_POST(self):
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    body = self.rfile.read(length) if length else b""
                except (ValueError, OSError):
                    body = b""
                frame = guard_handle(body, service.sealed_len)
                if frame is not None:
                    service.upstream.send_frames([frame])
                # a fixed byte-for-byte response: no date, no server banner,
                # nothing that varies with the request or its fate
                self.send_response_only(204)
                self.send_header("Content-Length", "0")
                self.end_headers()

            def log_message(self, *args):  # counters only, no request detail
                pass

        self._server = ThreadingHTTPServer(listen, Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self):
        self._thread.start()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        self.upstream.close()


class AggregatorService:
    """Accepts guard connections, aggregates per epoch, flushes downstream."""

    def __init__(self, listen: tuple[str, int], upstream: tuple[str, int],
                 pk: DjPublicKey, env_private: bytes, config: EpochConfig,
                 rng: random.Random | None = None):
        self.pk = pk
        self.env_private = env_private
        self.config = config
        self.grid = BucketGrid(pk, config, rng)
        self.upstream = _Upstream(upstream)
        self.epoch = 0
        self._stop = threading.Event()
        self._listener = socket.create_server(listen)
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    def start(self):
        self._threads = [
            threading.Thread(target=self._accept_loop, daemon=True),
            threading.Thread(target=self._flush_loop, daemon=True),
        ]
        for t in self._threads:
            t.start()

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            t.start()

    def _serve_conn(self, conn: socket.socket):
        with conn:
            while not self._stop.is_set():
                frame = recv_frame(conn)
                if frame is None:
                    return
                ftype, payload = frame
                if ftype == FRAME_CHUNK:
                    self.grid.ingest_sealed(payload, self.env_private)
                # unknown types dropped

    def _flush_loop(self):
        while not self._stop.wait(self.config.epoch_duration):
            self.flush_epoch()

    def flush_epoch(self):
        frames = agg_flush(self.grid, self.epoch)
        self.epoch += 1
        self.upstream.send_frames(frames)

    def stop(self):
        self._stop.set()
        self._listener.close()
        self.upstream.close()
