"""Deterministic end-to-end traffic simulation.

Drives the whole pipeline at desk scale: simulated browsers emit zero chunks
under Poisson arrivals, simulated submitters drain prepared manifests, and
everything flows client -> guard -> aggregator -> decryptor.  The in-process
topology advances a logical epoch clock (wall-clock independent, bit-for-bit
reproducible from the seed and a ground-truth ledger makes recovery claims
checkable); the sockets topology runs the real services on localhost to
exercise framing and backpressure.

measure_recovery is the no-crypto fast path: pure balls-into-bins Monte
Carlo over the bucket grid, for sweeping the recovery surface quickly.
"""

from __future__ import annotations

import base64
import hashlib
import random
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import envelope
from .decryptor import DecryptorEngine
from .disclosure import Manifest, next_chunk, prepare_file
from .djcrypto import chunk_to_bytes, enc_zero, keygen
from .fountain import SourceBlockSet
from .relay import BucketGrid, EpochConfig, guard_decode


@dataclass
class SimConfig:
    seed: int = 0
    users: float = 0.0
    transmissions_per_user_day: float = 50.0
    active_window_hours: float = 11.0
    white_rate_per_sec: float | None = None  # overrides the users-derived rate
    whistleblowers: int = 0
    whistleblower_file_bytes: int = 10240
    gray_rate_per_sec: float = 0.0
    epochs: int = 10
    epoch_config: EpochConfig = field(default_factory=EpochConfig)
    topology: str = "in-process"
    loss_rate: float = 0.0
    rho: float = 0.9
    delta: float = 2.0 ** -20
    key_bits: int = 512
    s_data: int = 2
    tree_height: int = 8
    white_pool: int = 0  # 0 = fresh zero chunk per cover event
    gray_per_epoch: int | None = None  # fixed-rate submitter instead of Poisson

    @property
    def white_rate(self) -> float:
        if self.white_rate_per_sec is not None:
            return self.white_rate_per_sec
        if self.users <= 0:
            return 0.0
        return (self.users * self.transmissions_per_user_day
                / (self.active_window_hours * 3600.0))


@dataclass
class TrafficSchedule:
    white_counts: np.ndarray
    gray_counts: np.ndarray


def gen_schedule(config: SimConfig) -> TrafficSchedule:
    """Poisson arrivals per epoch for cover and data traffic.  A fixed
    gray_per_epoch overrides the Poisson draw (steady submitter model)."""
    rng = np.random.default_rng(config.seed)
    dur = config.epoch_config.epoch_duration
    lam_white = config.white_rate * dur
    if config.gray_per_epoch is not None:
        gray = np.full(config.epochs, config.gray_per_epoch, dtype=np.int64)
    else:
        gray = rng.poisson(config.gray_rate_per_sec * dur, config.epochs)
    return TrafficSchedule(
        white_counts=rng.poisson(lam_white, config.epochs),
        gray_counts=gray,
    )


@dataclass
class Metrics:
    sent_white: int = 0
    sent_gray: int = 0
    lost: int = 0
    delivered_gray: int = 0
    recovered: int = 0
    duplicates: int = 0
    blacks: int = 0
    soundness_errors: int = 0
    files_expected: int = 0
    files_complete: int = 0
    per_chunk_recovery: float = 0.0
    throughput_chunks_per_sec: float = 0.0
    latency_epochs_p50: float = 0.0
    latency_epochs_p95: float = 0.0
    valid: bool = True

    def summary(self) -> str:
        rows = [
            ("white sent", self.sent_white),
            ("gray sent", self.sent_gray),
            ("lost in transit", self.lost),
            ("gray delivered", self.delivered_gray),
            ("recovered (unique)", self.recovered),
            ("duplicates dropped", self.duplicates),
            ("black aggregates", self.blacks),
            ("soundness errors", self.soundness_errors),
            ("files expected", self.files_expected),
            ("files complete", self.files_complete),
            ("per-chunk recovery", f"{self.per_chunk_recovery:.4f}"),
            ("throughput chunks/s", f"{self.throughput_chunks_per_sec:.0f}"),
            ("latency epochs p50/p95",
             f"{self.latency_epochs_p50:.0f}/{self.latency_epochs_p95:.0f}"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)

    def record_lines(self) -> list[str]:
        return [f"{k}={v}" for k, v in self.__dict__.items()]


class _GroundTruth:
    """What every data chunk should decrypt to, derivable from the file."""

    def __init__(self, file_bytes: bytes, manifest: Manifest, block_size: int):
        header = struct.pack(">Q", len(file_bytes)) + hashlib.sha256(file_bytes).digest()
        data = header + file_bytes
        data += b"\x00" * (manifest.n * block_size - len(data))
        self.blocks = SourceBlockSet(
            [data[j * block_size:(j + 1) * block_size] for j in range(manifest.n)])
        self.k = manifest.k
        self.file_bytes = file_bytes

    def payload(self, i: int) -> bytes:
        return self.blocks.encode(self.k, i).payload


def run_sim(config: SimConfig) -> Metrics:
    if config.topology == "sockets":
        return run_sim_sockets(config)
    if config.topology != "in-process":
        raise ValueError(f"unknown topology {config.topology!r}")
    rng = random.Random(config.seed)
    pk, sk = keygen(config.key_bits, config.s_data, rng)
    env = envelope.env_keygen(rng)
    sealed_len = envelope.sealed_len(pk.chunk_bytes)

    manifests: list[Manifest] = []
    truths: dict[int, _GroundTruth] = {}
    for _ in range(config.whistleblowers):
        file_bytes = rng.randbytes(config.whistleblower_file_bytes)
        manifest = prepare_file(file_bytes, pk, env.public,
                                rho=config.rho, delta=config.delta, rng=rng)
        manifests.append(manifest)
        truths[manifest.k] = _GroundTruth(file_bytes, manifest, pk.data_bytes)

    pool: list[bytes] = []
    if config.white_pool > 0:
        pool = [envelope.seal(env.public, chunk_to_bytes(pk, enc_zero(pk, rng)), rng)
                for _ in range(config.white_pool)]

    schedule = gen_schedule(config)
    grid = BucketGrid(pk, config.epoch_config, rng)
    engine = DecryptorEngine(sk, height=config.tree_height)
    engine.set_epoch_shape(config.epoch_config.bucket_count, config.epoch_config.split_count)

    metrics = Metrics(files_expected=len(manifests))
    sent_epoch: dict[tuple[int, int], int] = {}
    latencies: list[int] = []
    next_manifest = 0
    t0 = time.perf_counter()
    processed = 0

    def submit(sealed: bytes) -> bool:
        # client -> guard -> aggregator, with simulated transit loss
        if config.loss_rate and rng.random() < config.loss_rate:
            metrics.lost += 1
            return False
        body = base64.b64encode(sealed)
        decoded = guard_decode(body, sealed_len)
        if decoded is None:
            return False
        grid.ingest_sealed(decoded, env.private)
        return True

    for epoch in range(config.epochs):
        for _ in range(int(schedule.white_counts[epoch])):
            sealed = (pool[rng.randrange(len(pool))] if pool
                      else envelope.seal(env.public, chunk_to_bytes(pk, enc_zero(pk, rng)), rng))
            metrics.sent_white += 1
            submit(sealed)
            processed += 1
        for _ in range(int(schedule.gray_counts[epoch])):
            sealed = None
            for _ in range(len(manifests) or 1):
                if not manifests:
                    break
                manifest = manifests[next_manifest % len(manifests)]
                next_manifest += 1
                sealed = next_chunk(manifest)
                if sealed is not None:
                    cursor = manifest.cursor - 1
                    sent_epoch[(manifest.k, cursor)] = epoch
                    break
            if sealed is None:
                continue
            metrics.sent_gray += 1
            if submit(sealed):
                metrics.delivered_gray += 1
            processed += 1
        for set_idx, bucket, chunk in grid.flush():
            engine.add_aggregate(set_idx, bucket, chunk)
        fresh = engine.finish_epoch(epoch)
        for item in fresh:
            latencies.append(epoch - sent_epoch.get((item.meta.k, item.meta.i), epoch))
            truth = truths.get(item.meta.k)
            if truth is None or truth.payload(item.meta.i) != item.payload:
                metrics.soundness_errors += 1

    elapsed = time.perf_counter() - t0
    m = engine.metrics
    metrics.recovered = m.recovered
    metrics.duplicates = m.duplicates
    metrics.blacks = m.blacks
    metrics.files_complete = m.files_complete
    denominator = metrics.delivered_gray if config.loss_rate else metrics.sent_gray
    metrics.per_chunk_recovery = metrics.recovered / denominator if denominator else 0.0
    metrics.throughput_chunks_per_sec = processed / elapsed if elapsed > 0 else 0.0
    if latencies:
        metrics.latency_epochs_p50 = float(np.percentile(latencies, 50))
        metrics.latency_epochs_p95 = float(np.percentile(latencies, 95))
    for k, truth in truths.items():
        if k in engine.store.completed:
            if engine.store.completed[k] != truth.file_bytes:
                metrics.soundness_errors += 1
                metrics.valid = False
    if metrics.soundness_errors:
        metrics.valid = False
    return metrics


def run_sim_sockets(config: SimConfig) -> Metrics:
    """The same experiment over real localhost services.  Epochs advance on
    the wall clock, so results are not seed-deterministic; use small volumes.
    Exercises HTTP decoding, framing, and the service threads end to end."""
    import http.client

    from .decryptor import DecryptorService
    from .relay import AggregatorService, GuardService

    rng = random.Random(config.seed)
    pk, sk = keygen(config.key_bits, config.s_data, rng)
    env = envelope.env_keygen(rng)
    sealed_len = envelope.sealed_len(pk.chunk_bytes)

    manifests = []
    truths = {}
    for _ in range(config.whistleblowers):
        file_bytes = rng.randbytes(config.whistleblower_file_bytes)
        manifest = prepare_file(file_bytes, pk, env.public,
                                rho=config.rho, delta=config.delta, rng=rng)
        manifests.append(manifest)
        truths[manifest.k] = _GroundTruth(file_bytes, manifest, pk.data_bytes)

    decryptor = DecryptorService(("127.0.0.1", 0), ("127.0.0.1", 0), sk,
                                 height=config.tree_height)
    decryptor.start()
    aggregator = AggregatorService(("127.0.0.1", 0), ("127.0.0.1", decryptor.port),
                                   pk, env.private, config.epoch_config, rng)
    aggregator.start()
    guard = GuardService(("127.0.0.1", 0), ("127.0.0.1", aggregator.port), sealed_len)
    guard.start()

    metrics = Metrics(files_expected=len(manifests))
    schedule = gen_schedule(config)
    next_manifest = 0
    t0 = time.perf_counter()
    try:
        conn = http.client.HTTPConnection("127.0.0.1", guard.port, timeout=10)
        for epoch in range(config.epochs):
            epoch_end = time.perf_counter() + config.epoch_config.epoch_duration
            for _ in range(int(schedule.white_counts[epoch])):
                sealed = envelope.seal(env.public, chunk_to_bytes(pk, enc_zero(pk, rng)), rng)
                metrics.sent_white += 1
                if config.loss_rate and rng.random() < config.loss_rate:
                    metrics.lost += 1
                    continue
                conn.request("POST", "/a", base64.b64encode(sealed))
                conn.getresponse().read()
            for _ in range(int(schedule.gray_counts[epoch])):
                sealed = None
                for _ in range(len(manifests) or 1):
                    if not manifests:
                        break
                    manifest = manifests[next_manifest % len(manifests)]
                    next_manifest += 1
                    sealed = next_chunk(manifest)
                    if sealed is not None:
                        break
                if sealed is None:
                    continue
                metrics.sent_gray += 1
                if config.loss_rate and rng.random() < config.loss_rate:
                    metrics.lost += 1
                    continue
                conn.request("POST", "/a", base64.b64encode(sealed))
                conn.getresponse().read()
                metrics.delivered_gray += 1
            remaining = epoch_end - time.perf_counter()
            if remaining > 0:
                time.sleep(remaining)
        # let the tail epoch flush and drain
        time.sleep(config.epoch_config.epoch_duration * 2 + 0.2)
        conn.close()
    finally:
        guard.stop()
        aggregator.stop()
        decryptor.stop()

    elapsed = time.perf_counter() - t0
    engine = decryptor.engine
    metrics.recovered = engine.metrics.recovered
    metrics.duplicates = engine.metrics.duplicates
    metrics.blacks = engine.metrics.blacks
    metrics.files_complete = engine.metrics.files_complete
    for item in engine.recovered_log:
        truth = truths.get(item.meta.k)
        if truth is None or truth.payload(item.meta.i) != item.payload:
            metrics.soundness_errors += 1
    for k, truth in truths.items():
        completed = engine.store.completed.get(k)
        if completed is not None and completed != truth.file_bytes:
            metrics.soundness_errors += 1
    denominator = metrics.delivered_gray if config.loss_rate else metrics.sent_gray
    metrics.per_chunk_recovery = metrics.recovered / denominator if denominator else 0.0
    total = metrics.sent_white + metrics.sent_gray - metrics.lost
    metrics.throughput_chunks_per_sec = total / elapsed if elapsed > 0 else 0.0
    if metrics.soundness_errors:
        metrics.valid = False
    return metrics


def measure_recovery(k_gray: int, bucket_count: int, split_count: int = 1,
                     trials: int = 1000, seed: int = 0) -> float:
    """Balls-into-bins Monte Carlo of the per-chunk recovery probability:
    no crypto, just bucket placement, for fast parameter sweeps."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if k_gray < 1:
        raise ValueError("k_gray must be >= 1")
    per_set = bucket_count // split_count
    rng = np.random.default_rng(seed)
    recovered = 0
    for _ in range(trials):
        alone_any = np.zeros(k_gray, dtype=bool)
        for _ in range(split_count):
            buckets = rng.integers(0, per_set, k_gray)
            counts = np.bincount(buckets, minlength=per_set)
            alone_any |= counts[buckets] == 1
        recovered += int(alone_any.sum())
    return recovered / (trials * k_gray)


def measure_ingest_throughput(n_chunks: int = 2000, key_bits: int = 512,
                              s_data: int = 2, seed: int = 0) -> dict:
    """Benchmark the aggregator hot path (envelope open + bucket multiply) on
    this hardware.  Reported for reference; rates are machine-specific."""
    rng = random.Random(seed)
    pk, _sk = keygen(key_bits, s_data, rng)
    env = envelope.env_keygen(rng)
    sealed = [envelope.seal(env.public, chunk_to_bytes(pk, enc_zero(pk, rng)), rng)
              for _ in range(min(n_chunks, 500))]
    grid = BucketGrid(pk, EpochConfig(), rng)
    t0 = time.perf_counter()
    for j in range(n_chunks):
        grid.ingest_sealed(sealed[j % len(sealed)], env.private)
    elapsed = time.perf_counter() - t0
    return {
        "chunks": n_chunks,
        "seconds": elapsed,
        "chunks_per_sec": n_chunks / elapsed,
        "key_bits": key_bits,
        "chunk_bytes": pk.chunk_bytes,
    }
