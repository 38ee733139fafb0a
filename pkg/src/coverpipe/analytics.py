"""Closed-form capacity, recovery, and cost arithmetic.

Everything here is deterministic algebra over the deployment parameters: how
many front-line servers a user population needs, how many data chunks per
second survive aggregation, how many concurrent submitters a fixed decryptor
downlink supports, what the tree walk saves over decrypting every bucket,
and what ad-revenue markup pays for the hardware.  The simulation harness
cross-checks the probabilistic formulas empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DAYS_PER_MONTH = 365.0 / 12.0


def p_recover(k: int, bucket_count: int, split_count: int = 1) -> float:
    """Probability that one of k simultaneous data chunks lands alone in at
    least one of split_count independent sets of buckets."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if bucket_count < 1 or split_count < 1 or bucket_count % split_count:
        raise ValueError("split_count must divide bucket_count")
    per_set = bucket_count // split_count
    if per_set < 2:
        return 1.0 if k == 1 else 0.0
    p_alone = (1.0 - 1.0 / per_set) ** (k - 1)
    return 1.0 - (1.0 - p_alone) ** split_count


def gray_capacity(bucket_count: int, split_count: int = 1, target: float = 0.9) -> int:
    """Largest simultaneous data-chunk rate whose recovery probability still
    rounds to the target contour."""
    per_set = bucket_count / split_count
    p_alone_needed = 1.0 - (1.0 - target) ** (1.0 / split_count)
    k = 1.0 + math.log(p_alone_needed) / math.log(1.0 - 1.0 / per_set)
    return round(k)


def expected_decryptions(n_tree: int, p: float) -> tuple[float, float]:
    """Expected decryptions for one tree of height n_tree whose leaves are
    each non-empty with probability p, and the same normalized by the 2^n
    cost of decrypting every leaf."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    total = 1.0
    for i in range(1, n_tree + 1):
        total += 0.5 * (2 ** i) * (1.0 - (1.0 - p) ** (2 ** (n_tree + 1 - i)))
    return total, total / (2 ** n_tree)


def safe_rate(capacity: float) -> int:
    """Largest mean Poisson rate whose two-sigma excursion stays within
    capacity: solve r + 2*sqrt(r) = capacity and floor."""
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    root = math.sqrt(1.0 + capacity) - 1.0
    r = int(root * root)
    while r + 2.0 * math.sqrt(r) > capacity:
        r -= 1
    while (r + 1) + 2.0 * math.sqrt(r + 1) <= capacity:
        r += 1
    return r


def peak_load(users: float, per_day: float, window_hours: float,
              sigmas: float = 3.0) -> tuple[float, float]:
    """Mean request rate over the active window, and the rate not exceeded
    at `sigmas` standard deviations (normal approximation to Poisson)."""
    if window_hours <= 0:
        raise ValueError("window_hours must be positive")
    mean = users * per_day / (window_hours * 3600.0)
    peak = mean + sigmas * math.sqrt(mean)
    return mean, peak


@dataclass(frozen=True)
class CapacityParams:
    users: float = 138e6
    transmissions_per_user_day: float = 50.0
    active_window_hours: float = 11.0
    time_zones: int = 3
    reqs_per_guard_sec: float = 8000.0
    bucket_count: int = 768
    split_count: int = 1
    decryptor_mbps: float = 18.0
    chunk_bytes: int = 3072
    base64_request_bytes: int = 4496
    blocks_per_file: int = 911
    transmissions_per_file: int = 1010
    recovery_target: float = 0.9
    sigmas: float = 3.0


@dataclass(frozen=True)
class CapacityReport:
    mean_load: float
    peak_load: float
    guard_units: int
    aggregator_units: int
    aggregate_rate: float
    gray_capacity: int
    safe_gray_rate: int
    concurrent_whistleblowers: float
    disclosures_per_day: float
    submission_days: float
    daily_load_per_user_kb: float

    def records(self) -> list[tuple[str, float]]:
        return [
            ("mean_load_reqs_per_sec", self.mean_load),
            ("peak_load_reqs_per_sec", self.peak_load),
            ("guard_units", self.guard_units),
            ("aggregator_units", self.aggregator_units),
            ("aggregate_rate_per_sec", self.aggregate_rate),
            ("gray_capacity_per_sec", self.gray_capacity),
            ("safe_gray_rate_per_sec", self.safe_gray_rate),
            ("concurrent_whistleblowers", self.concurrent_whistleblowers),
            ("disclosures_per_day", self.disclosures_per_day),
            ("submission_days", self.submission_days),
            ("daily_load_per_user_kb", self.daily_load_per_user_kb),
        ]


def capacity_report(params: CapacityParams = CapacityParams()) -> CapacityReport:
    """The full sizing chain: population load -> relay units, and decryptor
    downlink -> aggregate rate -> recoverable data rate -> safe sending rate
    -> concurrent submitters and throughput."""
    mean, peak = peak_load(params.users, params.transmissions_per_user_day,
                           params.active_window_hours, params.sigmas)
    units = math.ceil(peak / params.reqs_per_guard_sec)
    # downlink is quoted in binary megabits: 18 Mb/s over 3072-byte chunks
    # is exactly 768 aggregates per second
    aggregate_rate = params.decryptor_mbps * (1 << 20) / 8.0 / params.chunk_bytes
    k_max = gray_capacity(params.bucket_count, params.split_count, params.recovery_target)
    safe = safe_rate(k_max)
    window_sec = params.active_window_hours * 3600.0
    concurrent = safe * window_sec / params.transmissions_per_user_day
    disclosures = concurrent * params.transmissions_per_user_day / params.blocks_per_file
    days = params.transmissions_per_file / params.transmissions_per_user_day
    per_user_kb = params.transmissions_per_user_day * params.base64_request_bytes / 1024.0
    return CapacityReport(
        mean_load=mean,
        peak_load=peak,
        guard_units=units,
        aggregator_units=units,
        aggregate_rate=aggregate_rate,
        gray_capacity=k_max,
        safe_gray_rate=safe,
        concurrent_whistleblowers=concurrent,
        disclosures_per_day=disclosures,
        submission_days=days,
        daily_load_per_user_kb=per_user_kb,
    )


def break_even(users: float, ads_per_user_day: float, payout_cpm: float,
               unit_cost_usd_month: float, units: int) -> dict:
    """Required ad markup fraction to cover infrastructure: daily cost of
    guards plus aggregators over daily impression payout."""
    if users <= 0 or ads_per_user_day <= 0 or payout_cpm <= 0:
        raise ValueError("inputs must be positive")
    daily_infra = units * 2 * unit_cost_usd_month / DAYS_PER_MONTH
    daily_payout = users * ads_per_user_day / 1000.0 * payout_cpm
    return {
        "daily_infra_usd": daily_infra,
        "daily_payout_usd": daily_payout,
        "markup": daily_infra / daily_payout,
    }


# ---------------------------------------------------------------------------
# grids for external plotting

def recovery_grid(ks: list[int], bucket_counts: list[int], split_count: int = 1):
    """Rows of (k, bucket_count, probability) spanning the recovery surface."""
    return [
        (k, m, p_recover(k, m, split_count))
        for k in ks
        for m in bucket_counts
        if m % split_count == 0
    ]


def savings_curve(n_tree: int, ps: list[float]):
    """Rows of (p, normalized expected decryptions) for one tree height."""
    return [(p, expected_decryptions(n_tree, p)[1]) for p in ps]


def report_text(report: CapacityReport, be: dict | None = None) -> str:
    lines = ["capacity report", "-" * 40]
    lines += [f"{name:34s} {value:>12.2f}" if isinstance(value, float)
              else f"{name:34s} {value:>12d}"
              for name, value in report.records()]
    if be is not None:
        lines += ["", "break-even", "-" * 40]
        lines.append(f"{'daily_infra_usd':34s} {be['daily_infra_usd']:>12.2f}")
        lines.append(f"{'daily_payout_usd':34s} {be['daily_payout_usd']:>12.2f}")
        lines.append(f"{'markup_percent':34s} {be['markup'] * 100:>12.4f}")
    return "\n".join(lines)
