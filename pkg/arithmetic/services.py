from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from django.conf import settings

from arithmetic.summation import compensated_cumsum, compensated_sum
from core.exceptions import DomainError, RangeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrimeTable:
    limit: int
    primes: np.ndarray
    log_p: np.ndarray
    recip_prefix: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.primes, self.log_p, self.recip_prefix):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return int(self.primes.size)

    def index_range(self, lower: int, upper: int) -> tuple[int, int]:
        """Indices ``start:stop`` of the primes p with lower < p <= upper."""
        start = int(np.searchsorted(self.primes, lower, side="right"))
        stop = int(np.searchsorted(self.primes, upper, side="right"))
        return start, max(start, stop)

    def prefix_at(self, stop: int) -> float:
        """Sum of 1/p over the first ``stop`` primes."""
        return float(self.recip_prefix[stop - 1]) if stop > 0 else 0.0

    def is_prime(self, n: int) -> bool:
        if n > self.limit:
            raise RangeError(f"{n} exceeds the table limit {self.limit}")
        idx = int(np.searchsorted(self.primes, n, side="left"))
        return idx < self.primes.size and int(self.primes[idx]) == n


@dataclass(frozen=True)
class Factorization:
    pairs: tuple[tuple[int, int], ...]

    @property
    def value(self) -> int:
        out = 1
        for prime, exponent in self.pairs:
            out *= prime**exponent
        return out

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(prime for prime, _ in self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def _simple_sieve(limit: int) -> np.ndarray:
    if limit < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p : limit + 1 : p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def _segmented_sieve(limit: int, segment_odd_count: int) -> np.ndarray:
    base = _simple_sieve(math.isqrt(limit) + 1)
    odd_base = base[base > 2]
    chunks = [np.array([2], dtype=np.int64)]
    span = 2 * segment_odd_count
    low = 3
    while low <= limit:
        high = min(low + span, limit + 1)
        odd_count = (high - low + 1) // 2
        mask = np.ones(odd_count, dtype=bool)
        for p in odd_base.tolist():
            p2 = p * p
            if p2 >= high:
                break
            start = max(p2, ((low + p - 1) // p) * p)
            if start % 2 == 0:
                start += p
            if start >= high:
                continue
            mask[(start - low) // 2 :: p] = False
        chunks.append(low + 2 * np.flatnonzero(mask).astype(np.int64))
        low += 2 * odd_count
    primes = np.concatenate(chunks)
    return primes[primes <= limit]


def sieve_primes(limit: int, cap: Optional[int] = None) -> PrimeTable:
    cap = int(cap if cap is not None else getattr(settings, "LSL_PRIME_LIMIT_CAP", 10**8))
    if not 2 <= limit <= cap:
        raise RangeError(f"prime limit must lie in [2, {cap}], got {limit}")
    threshold = int(getattr(settings, "LSL_SEGMENT_THRESHOLD", 10**7))
    if limit > threshold:
        segment = int(getattr(settings, "LSL_SEGMENT_SIZE", 2**21))
        logger.info("sieve_primes: segmented sieve to %d (segment=%d)", limit, segment)
        primes = _segmented_sieve(limit, segment)
    else:
        primes = _simple_sieve(limit)
    as_float = primes.astype(np.float64)
    return PrimeTable(
        limit=int(limit),
        primes=primes,
        log_p=np.log(as_float),
        recip_prefix=compensated_cumsum(1.0 / as_float),
    )


@lru_cache(maxsize=8)
def prime_table(limit: int) -> PrimeTable:
    """Shared, cached table; PrimeTable is immutable so sharing is safe."""
    return sieve_primes(max(2, int(limit)))


def factorize(n: int) -> Factorization:
    if n <= 0:
        raise DomainError(f"factorize needs n >= 1, got {n}")
    pairs: list[tuple[int, int]] = []
    remaining = int(n)
    divisor = 2
    while divisor * divisor <= remaining:
        if remaining % divisor == 0:
            exponent = 0
            while remaining % divisor == 0:
                remaining //= divisor
                exponent += 1
            pairs.append((divisor, exponent))
        divisor += 1 if divisor == 2 else 2
    if remaining > 1:
        pairs.append((remaining, 1))
    return Factorization(pairs=tuple(pairs))


def totient(n: int) -> int:
    result = int(n)
    for prime, _ in factorize(n):
        result -= result // prime
    return result


def has_cyclic_unit_group(q: int) -> bool:
    if q in (1, 2, 4):
        return True
    factors = factorize(q).pairs
    return len(factors) == 1 and factors[0][0] != 2


def primitive_root(q: int) -> int:
    """Smallest generator of the unit group mod q."""
    if q < 2 or not has_cyclic_unit_group(q):
        raise DomainError(f"the unit group mod {q} is not cyclic")
    if q == 2:
        return 1
    order = totient(q)
    prime_divisors = factorize(order).primes
    for g in range(2, q):
        if math.gcd(g, q) != 1:
            continue
        if all(pow(g, order // r, q) != 1 for r in prime_divisors):
            return g
    raise DomainError(f"no primitive root found mod {q}")


def crt(residues: Sequence[int], moduli: Sequence[int]) -> tuple[int, int]:
    """Solve r = residues[i] (mod moduli[i]); returns (r, product of moduli)."""
    if len(residues) != len(moduli):
        raise DomainError("residues and moduli must have equal length")
    total_modulus = 1
    for m in moduli:
        if m < 1:
            raise DomainError(f"modulus must be positive, got {m}")
        if math.gcd(total_modulus, m) != 1:
            raise DomainError("moduli must be pairwise coprime")
        total_modulus *= m
    result = 0
    for r, m in zip(residues, moduli):
        if m == 1:
            continue
        partial = total_modulus // m
        result += r * partial * pow(partial, -1, m)
    return result % total_modulus, total_modulus


def sum_reciprocal_primes(D: int, x: int, table: PrimeTable) -> float:
    """L = sum of 1/p over primes D < p <= x, in ascending order."""
    if D < 1:
        raise DomainError(f"D must be >= 1, got {D}")
    if D > x:
        raise DomainError(f"empty interval: D={D} exceeds x={x}")
    if x > table.limit:
        raise RangeError(f"x={x} exceeds the prime table limit {table.limit}")
    start, stop = table.index_range(D, x)
    return compensated_sum(1.0 / table.primes[start:stop].astype(np.float64)).real
