"""Aggregatable dual-component encryption.

Each ciphertext ("chunk") is a pair of encryptions under the same modulus N:
a data component c in Z*_{N^(sData+1)} carrying the payload, and a short tag
component t in Z*_{N^2} carrying a structured additive value.  Multiplying
chunks componentwise adds their plaintexts, so any number of zero-encryptions
can be folded into a data chunk without destroying it.  The tag value packs a
128-bit chunk identifier r0 above a blinding scalar r1, each padded with
guard zero bits that absorb additive carries for up to 2^guard_bits
aggregations.  A Pedersen-style commitment h^chk * g^r1 folded into the data
component's randomness binds the two components together: decryption recovers
the randomness, recomputes chk from the plaintext, and rejects anything whose
commitment does not match (a "black" collision of two data chunks).

All operations are pure and key objects are immutable after creation, so
unrestricted concurrent use is safe.  Callers supply their own rng handles
(`random.Random` compatible; defaults to `random.SystemRandom`).
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import gcd, invert, lcm, mpz, powmod

DEFAULT_MODULUS_BITS = 2048
DEFAULT_DATA_EXPONENT = 9
GUARD_BITS = 40
R0_BITS = 128  # 64-bit file id || 32-bit index || 32-bit block count

_SUPPORTED_BITS = (512, 1024, 2048)
_WINDOW = 8  # fixed-base window width


def _system_rng() -> random.Random:
    return random.SystemRandom()


# ---------------------------------------------------------------------------
# key material


@dataclass(eq=False)
class DjPublicKey:
    """Public key: modulus, data-space exponent, commitment bases, tag layout."""

    N: mpz
    s_data: int
    g: mpz
    h: mpz
    guard_bits: int = GUARD_BITS
    r1_bits: int = 512
    r2_bits: int = 512
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def bits(self) -> int:
        return self.N.bit_length()

    @property
    def chk_bits(self) -> int:
        return self.bits // 16

    @property
    def plain_bytes(self) -> int:
        """Width of the data plaintext space in bytes (sData * |N| bits)."""
        return self.s_data * self.bits // 8

    @property
    def data_bytes(self) -> int:
        """Usable payload bytes per chunk; one byte below the plaintext width
        so every payload stays strictly below N^sData."""
        return self.plain_bytes - 1

    @property
    def chunk_bytes(self) -> int:
        return (self.s_data + 3) * self.bits // 8

    @property
    def tag_shift(self) -> int:
        """Bit position of the r0 field inside the tag value."""
        return self.r1_bits + self.guard_bits

    def npow(self, j: int) -> mpz:
        key = ("npow", j)
        if key not in self._cache:
            self._cache[key] = self.N ** j
        return self._cache[key]

    @property
    def data_mod(self) -> mpz:
        return self.npow(self.s_data + 1)

    @property
    def tag_mod(self) -> mpz:
        return self.npow(2)

    @property
    def fb_g_data(self) -> "_FixedBase":
        # g lifted to the data level: (g^r)^(N^s) == fb.pow(r) mod N^(s+1).
        # This table is the zero-encryption hot path; a wide window keeps the
        # per-call multiplication count low at production key size.
        if "g_data" not in self._cache:
            lift = powmod(self.g, self.npow(self.s_data), self.data_mod)
            window = 10 if self.bits >= 2048 else _WINDOW
            self._cache["g_data"] = _FixedBase(lift, self.data_mod, self.r1_bits, window)
        return self._cache["g_data"]

    @property
    def fb_h_data(self) -> "_FixedBase":
        if "h_data" not in self._cache:
            lift = powmod(self.h, self.npow(self.s_data), self.data_mod)
            self._cache["h_data"] = _FixedBase(lift, self.data_mod, self.chk_bits)
        return self._cache["h_data"]

    @property
    def fb_g_tag(self) -> "_FixedBase":
        if "g_tag" not in self._cache:
            lift = powmod(self.g, self.N, self.tag_mod)
            self._cache["g_tag"] = _FixedBase(lift, self.tag_mod, self.r2_bits)
        return self._cache["g_tag"]


@dataclass(eq=False)
class DjPrivateKey:
    """Factorization of N plus the derived decryption exponent."""

    p: mpz
    q: mpz
    public: DjPublicKey
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def lam(self) -> mpz:
        if "lam" not in self._cache:
            self._cache["lam"] = lcm(self.p - 1, self.q - 1)
        return self._cache["lam"]

    def _inv_lam(self, s: int) -> mpz:
        key = ("invlam", s)
        if key not in self._cache:
            self._cache[key] = invert(self.lam, self.public.npow(s))
        return self._cache[key]

    def _root_exp(self, s: int) -> mpz:
        # exponent that undoes b -> b^(N^s) inside Z*_N
        key = ("root", s)
        if key not in self._cache:
            self._cache[key] = invert(self.public.npow(s) % self.lam, self.lam)
        return self._cache[key]

    def _crt(self, s: int) -> tuple[mpz, mpz, mpz]:
        # prime-power halves of N^(s+1) and the lift from p-part to both
        key = ("crt", s)
        if key not in self._cache:
            pp = self.p ** (s + 1)
            qq = self.q ** (s + 1)
            self._cache[key] = (pp, qq, invert(pp, qq))
        return self._cache[key]

    def powmod_half_size(self, u: mpz, e: mpz, s: int) -> mpz:
        """u^e mod N^(s+1) via the factorization: two half-size
        exponentiations recombined, a keyholder-only speedup."""
        pp, qq, inv_pp = self._crt(s)
        up = powmod(u % pp, e, pp)
        uq = powmod(u % qq, e, qq)
        return up + pp * ((uq - up) * inv_pp % qq)


@dataclass(frozen=True)
class ChunkMeta:
    """Chunk identity: file id k (nonzero 64-bit), index i, block count n."""

    k: int
    i: int
    n: int

    def __post_init__(self):
        if not (0 <= self.k < 1 << 64 and 0 <= self.i < 1 << 32 and 0 <= self.n < 1 << 32):
            raise ValueError("meta field out of range")

    @property
    def r0(self) -> int:
        return (self.k << 64) | (self.i << 32) | self.n

    @classmethod
    def from_r0(cls, r0: int) -> "ChunkMeta":
        if not 0 <= r0 < 1 << R0_BITS:
            raise ValueError("r0 out of range")
        return cls(r0 >> 64, (r0 >> 32) & 0xFFFFFFFF, r0 & 0xFFFFFFFF)

    @property
    def is_white(self) -> bool:
        return self.k == 0


WHITE_META = ChunkMeta(0, 0, 0)


@dataclass(frozen=True)
class Chunk:
    """One dual-component ciphertext."""

    c: mpz
    t: mpz


def identity_chunk() -> Chunk:
    """Multiplicative identity; a valid white aggregate of zero chunks."""
    return Chunk(mpz(1), mpz(1))


# ---------------------------------------------------------------------------
# fixed-base exponentiation tables

class _FixedBase:
    """Windowed fixed-base exponentiation: one table row per exponent digit,
    so pow() costs at most one multiplication per digit."""

    __slots__ = ("base", "mod", "window", "mask", "rows")

    def __init__(self, base: mpz, mod: mpz, exp_bits: int, window: int = _WINDOW):
        self.base = base
        self.mod = mod
        self.window = window
        self.mask = (1 << window) - 1
        self.rows = []
        b = base
        for _ in range((exp_bits + window - 1) // window):
            row = [mpz(1), b]
            acc = b
            for _ in range(2, 1 << window):
                acc = acc * b % mod
                row.append(acc)
            self.rows.append(row)
            b = acc * b % mod

    def pow(self, e) -> mpz:
        if e < 0 or (e >> (len(self.rows) * self.window)) != 0:
            return powmod(self.base, e, self.mod)
        e = int(e)
        acc = mpz(1)
        for row in self.rows:
            d = e & self.mask
            if d:
                acc = acc * row[d] % self.mod
            e >>= self.window
        return acc


# ---------------------------------------------------------------------------
# prime generation

def _small_primes(limit: int = 20000) -> np.ndarray:
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    for i in range(2, int(limit ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i:: i] = False
    return np.nonzero(sieve)[0][1:].astype(np.int64)  # odd primes only


_SIEVE_PRIMES = _small_primes()


def _safe_prime(bits: int, rng: random.Random) -> mpz:
    """p = 2q + 1 with q prime, p of exactly `bits` bits and top two bits set."""
    while True:
        q0 = mpz(rng.getrandbits(bits - 1))
        q0 |= (mpz(3) << (bits - 3)) | 3  # top two bits, q = 3 mod 4
        residues = np.array([int(q0 % int(r)) for r in _SIEVE_PRIMES], dtype=np.int64)
        for step in range(0, 1 << 17, 1):
            r = (residues + 4 * step) % _SIEVE_PRIMES
            if np.any(r == 0) or np.any((2 * r + 1) % _SIEVE_PRIMES == 0):
                continue
            q = q0 + 4 * step
            if q.bit_length() != bits - 1:
                break
            if gmpy2.is_prime(q) and gmpy2.is_prime(2 * q + 1):
                return 2 * q + 1


def keygen(bits: int = DEFAULT_MODULUS_BITS, s_data: int = DEFAULT_DATA_EXPONENT,
           rng: random.Random | None = None) -> tuple[DjPublicKey, DjPrivateKey]:
    """Generate a key pair.  bits is the modulus size (512 is the toy/test
    size, 2048 the production default); s_data sets the payload capacity to
    s_data * bits / 8 - 1 bytes."""
    if bits not in _SUPPORTED_BITS:
        raise ValueError(f"modulus size must be one of {_SUPPORTED_BITS}")
    if s_data < 1:
        raise ValueError("s_data must be >= 1")
    rng = rng or _system_rng()
    p = _safe_prime(bits // 2, rng)
    q = _safe_prime(bits // 2, rng)
    while q == p:
        q = _safe_prime(bits // 2, rng)
    N = p * q
    while True:
        a = mpz(rng.randrange(2, int(N - 1)))
        if gcd(a, N) == 1:
            break
    g = a * a % N
    x = rng.randrange(1, int(N // 4))
    h = powmod(g, x, N)
    # the 512-bit blinding width only fits the tag space of >= 1024-bit keys
    r1_bits = 512 if bits - 2 * GUARD_BITS - R0_BITS - 1 >= 512 else 256
    pk = DjPublicKey(N=N, s_data=s_data, g=g, h=h, guard_bits=GUARD_BITS,
                     r1_bits=r1_bits, r2_bits=r1_bits)
    sk = DjPrivateKey(p=p, q=q, public=pk)
    return pk, sk


# ---------------------------------------------------------------------------
# the isomorphism and its inverse

def _pow_base1N(pk: DjPublicKey, s: int, a) -> mpz:
    """(1+N)^a mod N^(s+1) by binomial expansion; only s+1 terms survive."""
    N = pk.N
    mod = pk.npow(s + 1)
    a = mpz(a) % pk.npow(s)
    result = mpz(1)
    term = mpz(1)
    for j in range(1, s + 1):
        term = term * ((a - j + 1) % mod) % mod
        term = term * _inv_small(pk, j, mod) % mod
        term = term * N % mod
        result = (result + term) % mod
    return result


def _inv_small(pk: DjPublicKey, j: int, mod: mpz) -> mpz:
    key = ("invj", j, mod.bit_length())
    if key not in pk._cache:
        pk._cache[key] = invert(mpz(j), mod)
    return pk._cache[key]


def _dlog_base1N(pk: DjPublicKey, s: int, u: mpz):
    """Recover a from u = (1+N)^a mod N^(s+1); None if u is not in the coset."""
    N = pk.N
    a = mpz(0)
    for j in range(1, s + 1):
        nj = pk.npow(j)
        t1, rem = divmod((u % pk.npow(j + 1)) - 1, N)
        if rem:
            return None
        t2 = a
        run = a
        for k in range(2, j + 1):
            run = run - 1
            t2 = t2 * run % nj
            t1 = (t1 - t2 * pk.npow(k - 1) * _inv_fact(pk, k, nj)) % nj
        a = t1
    return a


def _inv_fact(pk: DjPublicKey, k: int, mod: mpz) -> mpz:
    key = ("invfact", k, mod.bit_length())
    if key not in pk._cache:
        pk._cache[key] = invert(mpz(math.factorial(k)), mod)
    return pk._cache[key]


def psi(pk: DjPublicKey, s: int, a, b) -> mpz:
    """The group isomorphism (a, b) -> (1+N)^a * b^(N^s) mod N^(s+1)."""
    a = mpz(a)
    b = mpz(b)
    if not 0 <= a < pk.npow(s):
        raise ValueError("plaintext out of range")
    if gcd(b, pk.N) != 1:
        raise ValueError("b is not a unit mod N")
    mod = pk.npow(s + 1)
    return _pow_base1N(pk, s, a) * powmod(b, pk.npow(s), mod) % mod


def _psi_inv_value(sk: DjPrivateKey, s: int, u) -> mpz:
    """Plaintext half of psi_inv; skips the root extraction for b."""
    pk = sk.public
    u = mpz(u)
    mod = pk.npow(s + 1)
    if not 0 < u < mod or gcd(u, pk.N) != 1:
        raise ValueError("not a unit")
    ul = sk.powmod_half_size(u, sk.lam, s)
    alam = _dlog_base1N(pk, s, ul)
    if alam is None:
        raise ValueError("not in the image of psi")
    return alam * sk._inv_lam(s) % pk.npow(s)


def psi_inv(sk: DjPrivateKey, s: int, u) -> tuple[mpz, mpz]:
    """Invert psi: returns (a, b) with b reduced into Z*_N.

    Raises ValueError if u is not a valid group element (a tampered or
    malformed ciphertext)."""
    pk = sk.public
    u = mpz(u)
    a = _psi_inv_value(sk, s, u)
    v = u * _pow_base1N(pk, s, -a) % pk.npow(s + 1)
    b = sk.powmod_half_size(v % pk.N, sk._root_exp(s), 0)
    return a, b


# ---------------------------------------------------------------------------
# tag layout

def tag_pack(pk: DjPublicKey, r0: int, r1: int) -> int:
    return (r0 << pk.tag_shift) | r1


def tag_r0_field(pk: DjPublicKey, value) -> int:
    """The r0 field of a tag value, guard bits included so that sums of up to
    2^guard_bits chunks extract to the exact integer sum of their r0 values."""
    return int(value >> pk.tag_shift) & ((1 << (R0_BITS + pk.guard_bits)) - 1)


def tag_r1_field(pk: DjPublicKey, value) -> int:
    return int(value) & ((1 << pk.tag_shift) - 1)


# ---------------------------------------------------------------------------
# encryption, aggregation, decryption

def chk_hash(pk: DjPublicKey, m, r0: int) -> int:
    """Commitment exponent: hash of the fixed-width (m, r0) serialization,
    truncated to |N|/16 bits."""
    m_bytes = int(m).to_bytes(pk.plain_bytes, "big")
    r0_bytes = int(r0).to_bytes((R0_BITS + pk.guard_bits) // 8, "big")
    digest = hashlib.sha256(m_bytes + r0_bytes).digest()
    return int.from_bytes(digest[: pk.chk_bits // 8], "big")


def enc_data(pk: DjPublicKey, payload: bytes, meta: ChunkMeta,
             rng: random.Random | None = None) -> Chunk:
    """Encrypt a payload block under the chunk identity `meta` (meta.k != 0)."""
    if len(payload) > pk.data_bytes:
        raise ValueError(f"payload exceeds {pk.data_bytes} bytes")
    if meta.k == 0:
        raise ValueError("file id 0 is reserved for zero chunks")
    rng = rng or _system_rng()
    m = mpz(int.from_bytes(payload, "big"))
    r0 = meta.r0
    r1 = rng.getrandbits(pk.r1_bits)
    r2 = rng.getrandbits(pk.r2_bits)
    chk = chk_hash(pk, m, r0)
    c = _pow_base1N(pk, pk.s_data, m) * pk.fb_h_data.pow(chk) % pk.data_mod
    c = c * pk.fb_g_data.pow(r1) % pk.data_mod
    t = (1 + tag_pack(pk, r0, r1) * pk.N) * pk.fb_g_tag.pow(r2) % pk.tag_mod
    return Chunk(c, t)


def enc_zero(pk: DjPublicKey, rng: random.Random | None = None) -> Chunk:
    """Encrypt a zero: the cover chunk every regular submission carries."""
    rng = rng or _system_rng()
    r1 = rng.getrandbits(pk.r1_bits)
    r2 = rng.getrandbits(pk.r2_bits)
    c = pk.fb_g_data.pow(r1)
    t = (1 + r1 * pk.N) * pk.fb_g_tag.pow(r2) % pk.tag_mod
    return Chunk(c, t)


def aggregate(pk: DjPublicKey, x: Chunk, y: Chunk) -> Chunk:
    """Componentwise product; decrypts to the sum of the plaintexts."""
    # identity operands are common (freshly reset buckets); skip the big muls
    if x.c == 1 and x.t == 1:
        return y
    if y.c == 1 and y.t == 1:
        return x
    return Chunk(x.c * y.c % pk.data_mod, x.t * y.t % pk.tag_mod)


def is_white(sk: DjPrivateKey, chunk: Chunk) -> tuple[bool, int]:
    """Cheap test on the tag only: white iff the r0 field is zero.  Returns
    the full tag value as well, for the tree-decryption subtraction trick."""
    value = _psi_inv_value(sk, 1, chunk.t)
    return tag_r0_field(sk.public, value) == 0, int(value)


def dec_vrfy(sk: DjPrivateKey, chunk: Chunk):
    """Full decryption with verification.

    Returns (payload_bytes, meta) on success; meta.is_white marks a zero
    aggregate.  Returns None for anything invalid: black collisions, field
    overflow, or tampering."""
    try:
        tag_value, _ = psi_inv(sk, 1, chunk.t)
    except ValueError:
        return None
    return dec_vrfy_with_tag(sk, chunk, int(tag_value))


def dec_vrfy_with_tag(sk: DjPrivateKey, chunk: Chunk, tag_value: int):
    """dec_vrfy for callers that already derived the tag value (the
    decryption tree computes right-child tags by subtraction)."""
    pk = sk.public
    try:
        m, bc = psi_inv(sk, pk.s_data, chunk.c)
    except ValueError:
        return None
    r0 = tag_r0_field(pk, tag_value)
    r1 = tag_r1_field(pk, tag_value)
    if m == 0 and r0 == 0:
        chk = 0
    else:
        chk = chk_hash(pk, m, r0)
    expect = powmod(pk.h, chk, pk.N) * powmod(pk.g, r1, pk.N) % pk.N
    if bc != expect:
        return None
    if m == 0 and r0 == 0:
        return b"\x00" * pk.data_bytes, WHITE_META
    if r0 >= (1 << R0_BITS) or m >= (1 << (8 * pk.data_bytes)):
        return None
    meta = ChunkMeta.from_r0(r0)
    if meta.k == 0:
        return None
    return int(m).to_bytes(pk.data_bytes, "big"), meta


# ---------------------------------------------------------------------------
# serialization

def chunk_to_bytes(pk: DjPublicKey, chunk: Chunk) -> bytes:
    c_width = (pk.s_data + 1) * pk.bits // 8
    t_width = 2 * pk.bits // 8
    return int(chunk.c).to_bytes(c_width, "big") + int(chunk.t).to_bytes(t_width, "big")


def chunk_from_bytes(pk: DjPublicKey, data: bytes) -> Chunk:
    c_width = (pk.s_data + 1) * pk.bits // 8
    t_width = 2 * pk.bits // 8
    if len(data) != c_width + t_width:
        raise ValueError(f"chunk must be {c_width + t_width} bytes")
    return Chunk(mpz(int.from_bytes(data[:c_width], "big")),
                 mpz(int.from_bytes(data[c_width:], "big")))
