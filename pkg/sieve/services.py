from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from arithmetic.services import sum_reciprocal_primes
from arithmetic.summation import compensated_sum
from characters.services import Character
from core.exceptions import DomainError
from core.parallel import parallel_map
from euler.services import (
    CoefficientVector,
    LemmaScanReport,
    SumSpec,
    char_prime_sum,
    lemma_sup_scan,
    rectangle_max,
)
from sieve.linalg import EigenPair, top_eigenpair

logger = logging.getLogger(__name__)

PASS_TOLERANCE = 1e-9
DUALITY_TOLERANCE = 1e-8
PROBE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class DeltaRow:
    character: Character
    shift: float
    cutoff: int


@dataclass(frozen=True)
class DeltaMatrix:
    """delta[j, p] = chi_j(p) p^(-1/2 - i t_j) for D < p <= y_j, else 0.

    Row j is supported on a prefix of the prime columns, so only the row
    parameters and the per-row stop index are stored.
    """

    spec: SumSpec
    rows: tuple[DeltaRow, ...]
    primes: np.ndarray
    log_p: np.ndarray
    stops: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.rows)

    def row(self, j: int) -> np.ndarray:
        spec_row = self.rows[j]
        stop = self.stops[j]
        values = np.zeros(self.primes.size, dtype=np.complex128)
        primes = self.primes[:stop]
        logs = self.log_p[:stop]
        values[:stop] = spec_row.character.values_at(primes) * np.exp(-(0.5 + 1j * spec_row.shift) * logs)
        return values

    def entry(self, j: int, p: int) -> complex:
        idx = int(np.searchsorted(self.primes, p))
        if idx >= self.primes.size or int(self.primes[idx]) != p:
            return 0j
        return complex(self.row(j)[idx])

    def dense(self) -> np.ndarray:
        return np.array([self.row(j) for j in range(self.k)]).reshape(self.k, self.primes.size)


@dataclass(frozen=True)
class SyntheticDelta:
    """Arbitrary dense rows, for self-tests that bypass the p^(-1/2) weights."""

    entries: np.ndarray

    @property
    def k(self) -> int:
        return int(self.entries.shape[0])

    def dense(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.complex128)


def build_delta(
    characters: Sequence[Character],
    shifts: Sequence[float],
    cutoffs: Sequence[int],
    spec: SumSpec,
    *,
    allow_duplicates: bool = False,
) -> DeltaMatrix:
    k = len(characters)
    if k < 1 or len(shifts) != k or len(cutoffs) != k:
        raise DomainError("characters, shifts and cutoffs need equal lengths k >= 1")
    if any(chi.modulus != spec.D for chi in characters):
        raise DomainError(f"all characters must be taken mod D={spec.D}")
    if not allow_duplicates and len(set(characters)) != k:
        raise DomainError("characters must be pairwise distinct")
    for t in shifts:
        if abs(t) > spec.t_max:
            raise DomainError(f"|t|={abs(t)} exceeds D^B={spec.t_max}")
    for y in cutoffs:
        if not spec.D < y <= spec.x:
            raise DomainError(f"cutoff {y} outside ({spec.D}, {spec.x}]")
    table = spec.table()
    start, stop = table.index_range(spec.D, spec.x)
    primes = table.primes[start:stop]
    stops = tuple(int(np.searchsorted(primes, y, side="right")) for y in cutoffs)
    rows = tuple(DeltaRow(chi, float(t), int(y)) for chi, t, y in zip(characters, shifts, cutoffs))
    return DeltaMatrix(spec, rows, primes, table.log_p[start:stop], stops)


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray

    @property
    def k(self) -> int:
        return int(self.entries.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).real

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def quadratic_form(self, b: Sequence[complex]) -> float:
        """sum_p |sum_j b_j delta_{j,p}|^2 = sum_{j,l} b_j conj(b_l) M_{jl}."""
        b = np.asarray(b, dtype=np.complex128)
        return float((b @ self.entries @ b.conj()).real)

    def expanded_form(self, b: Sequence[float]) -> float:
        """Diagonal part plus twice the real cross terms, for real b."""
        b = np.asarray(b, dtype=np.float64)
        total = float(np.sum(b**2 * self.diagonal))
        for j in range(self.k):
            for ell in range(j + 1, self.k):
                total += 2.0 * b[j] * b[ell] * float(self.entries[j, ell].real)
        return total


def gram_matrix(delta: DeltaMatrix | SyntheticDelta) -> GramMatrix:
    """M_{jl} = sum_p delta_{j,p} conj(delta_{l,p})."""
    if isinstance(delta, SyntheticDelta):
        dense = delta.dense()
        return GramMatrix(dense @ dense.conj().T)
    spec = delta.spec
    table = spec.table()
    ones = CoefficientVector.ones(table, spec.D, spec.x)
    k = delta.k
    entries = np.zeros((k, k), dtype=np.complex128)
    for j, row in enumerate(delta.rows):
        entries[j, j] = sum_reciprocal_primes(spec.D, row.cutoff, table)
    pairs = [(j, ell) for j in range(k) for ell in range(j + 1, k)]

    def cross(pair: tuple[int, int]) -> complex:
        rj, rl = delta.rows[pair[0]], delta.rows[pair[1]]
        psi = rj.character * rl.character.conjugate()
        return char_prime_sum(psi, ones, spec.D, min(rj.cutoff, rl.cutoff), 1 + 1j * (rj.shift - rl.shift))

    for (j, ell), value in zip(pairs, parallel_map(cross, pairs)):
        entries[j, ell] = value
        entries[ell, j] = np.conj(value)
    return GramMatrix(entries)


def cross_term(chi_j: Character, chi_l: Character, t_j: float, t_l: float, y: int, spec: SumSpec) -> float:
    """Re sum_{D<p<=y} chi_j conj(chi_l)(p) p^(-1 - i t_j + i t_l)."""
    if chi_j == chi_l:
        raise DomainError("cross terms need two distinct characters")
    psi = chi_j * chi_l.conjugate()
    ones = CoefficientVector.ones(spec.table(), spec.D, spec.x)
    return char_prime_sum(psi, ones, spec.D, y, 1 + 1j * (t_j - t_l)).real


def product_characters(characters: Sequence[Character]) -> list[Character]:
    """Distinct chi_j conj(chi_l), j != l, one of each conjugate pair."""
    seen: set[Character] = set()
    out: list[Character] = []
    for j, chi in enumerate(characters):
        for ell, other in enumerate(characters):
            if j == ell or chi == other:
                continue
            psi = chi * other.conjugate()
            if psi in seen or psi.conjugate() in seen:
                continue
            seen.add(psi)
            out.append(psi)
    return out


@dataclass(frozen=True)
class ConstantEstimate:
    c1_hat: float
    L: float
    scans: tuple[LemmaScanReport, ...] = field(default_factory=tuple)

    @property
    def c_default(self) -> float:
        return 4.0 * self.c1_hat


def scan_cross_constant(
    spec: SumSpec,
    characters: Sequence[Character],
    *,
    divisor: Optional[float] = None,
    refine: bool = True,
) -> ConstantEstimate:
    distinct = list(dict.fromkeys(characters))
    if len(distinct) < 2:
        raise DomainError("estimating c1 needs at least two distinct characters")
    L = sum_reciprocal_primes(spec.D, spec.x, spec.table())
    scans = tuple(
        lemma_sup_scan(psi, spec, [spec.D], None, t_max=2.0 * spec.t_max, divisor=divisor, refine=refine)
        for psi in product_characters(distinct)
    )
    c1_hat = max([0.0] + [scan.empirical_max for scan in scans])
    logger.info("c1 estimate for D=%d, x=%d over %d product characters: %.6f", spec.D, spec.x, len(scans), c1_hat)
    return ConstantEstimate(c1_hat, L, scans)


def estimate_c1(D: int, spec: SumSpec, characters: Sequence[Character], **kwargs) -> float:
    """Empirical stand-in for the cross-term constant: max(0, scanned cross terms)."""
    if D != spec.D:
        raise DomainError(f"D={D} does not match the sum spec D={spec.D}")
    return scan_cross_constant(spec, characters, **kwargs).c1_hat


@dataclass(frozen=True)
class FourWaySplit:
    parts: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    magnitudes: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    phases: tuple[float, float, float, float] = (0.0, math.pi, math.pi / 2, -math.pi / 2)

    def total(self) -> np.ndarray:
        return self.parts[0] + self.parts[1] + self.parts[2] + self.parts[3]


def four_way_split(b: Sequence[complex]) -> FourWaySplit:
    """max(Re b,0) + min(Re b,0) + i max(Im b,0) + i min(Im b,0)."""
    b = np.asarray(b, dtype=np.complex128)
    re_pos = np.maximum(b.real, 0.0)
    re_neg = np.minimum(b.real, 0.0)
    im_pos = np.maximum(b.imag, 0.0)
    im_neg = np.minimum(b.imag, 0.0)
    parts = (re_pos + 0j, re_neg + 0j, 1j * im_pos, 1j * im_neg)
    magnitudes = (re_pos, -re_neg, im_pos, -im_neg)
    return FourWaySplit(parts, magnitudes)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + PASS_TOLERANCE


def real_coefficient_bound(gram: GramMatrix, b: Sequence[float], L: float, c1: float) -> BoundCheck:
    b = np.asarray(b, dtype=np.float64)
    return BoundCheck(gram.quadratic_form(b), (L + (gram.k - 1) * c1) * float(np.sum(b**2)))


def four_way_bound(gram: GramMatrix, b: Sequence[complex], L: float, c1: float) -> tuple[BoundCheck, BoundCheck]:
    """(|form(b)| vs 4 * sum of per-part forms, and vs 4 (L + (k-1) c1) ||b||^2)."""
    split = four_way_split(b)
    lhs = gram.quadratic_form(b)
    per_part = sum(gram.quadratic_form(m) for m in split.magnitudes)
    norm = float(np.sum(np.abs(np.asarray(b)) ** 2))
    return BoundCheck(lhs, 4.0 * per_part), BoundCheck(lhs, 4.0 * (L + (gram.k - 1) * c1) * norm)


@dataclass(frozen=True)
class DualityReport:
    k: int
    columns: int
    lambda_max: float
    lambda_dual: float
    pullback_ratio: float
    max_trial_ratio: float
    trials: int
    seed: int
    passed: bool


def _relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def duality_check(delta: DeltaMatrix | SyntheticDelta, trials: int, seed: int) -> DualityReport:
    """Compare the k x k Gram norm with the prime-side bilinear form."""
    if trials < 1:
        raise DomainError("duality_check needs trials >= 1")
    gram = gram_matrix(delta)
    dense = delta.dense()
    pair = top_eigenpair(gram.entries, seed=seed)
    rng = np.random.default_rng(seed)
    if pair.value <= 0:
        return DualityReport(delta.k, dense.shape[1], 0.0, 0.0, 1.0, 0.0, trials, seed, True)

    pullback = dense.conj().T @ pair.vector
    lambda_dual = float(np.linalg.norm(dense @ pullback) ** 2 / np.linalg.norm(pullback) ** 2)
    pullback_ratio = lambda_dual / pair.value

    max_ratio = 0.0
    for _ in range(trials):
        a = rng.standard_normal(dense.shape[1]) + 1j * rng.standard_normal(dense.shape[1])
        value = float(np.linalg.norm(dense @ a) ** 2) / (pair.value * float(np.linalg.norm(a) ** 2))
        max_ratio = max(max_ratio, value)
    passed = (
        _relative_gap(pair.value, lambda_dual) <= DUALITY_TOLERANCE
        and max_ratio <= 1.0 + PROBE_TOLERANCE
    )
    return DualityReport(
        delta.k, dense.shape[1], pair.value, lambda_dual, pullback_ratio, max_ratio, trials, seed, passed
    )


@dataclass(frozen=True)
class SelftestReport:
    seed: int
    matrices: int
    probes: int
    fixture_lambda: float
    worst_probe_excess: float
    worst_pullback_gap: float
    passed: bool


def duality_selftest(seed: int, matrices: int = 500, probes: int = 1000, max_k: int = 8, max_columns: int = 200) -> SelftestReport:
    """Synthetic oracle suite for the duality principle."""
    fixture = SyntheticDelta(np.array([[1.0, 0.0], [0.0, 2.0]], dtype=np.complex128))
    fixture_lambda = top_eigenpair(gram_matrix(fixture).entries, seed=seed).value
    rng = np.random.default_rng(seed)
    worst_excess = 0.0
    worst_gap = 0.0
    for index in range(matrices):
        k = int(rng.integers(1, max_k + 1))
        n = int(rng.integers(k, max_columns + 1))
        dense = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
        pair = top_eigenpair(dense @ dense.conj().T, seed=seed + index)
        pullback = dense.conj().T @ pair.vector
        dual = float(np.linalg.norm(dense @ pullback) ** 2 / np.linalg.norm(pullback) ** 2)
        worst_gap = max(worst_gap, _relative_gap(pair.value, dual))
        sample = rng.standard_normal((n, probes)) + 1j * rng.standard_normal((n, probes))
        sample /= np.linalg.norm(sample, axis=0)
        quotients = np.sum(np.abs(dense @ sample) ** 2, axis=0)
        worst_excess = max(worst_excess, float(quotients.max()) / pair.value - 1.0)
    passed = (
        abs(fixture_lambda - 4.0) <= DUALITY_TOLERANCE
        and worst_excess <= PROBE_TOLERANCE
        and worst_gap <= DUALITY_TOLERANCE
    )
    return SelftestReport(seed, matrices, probes, fixture_lambda, worst_excess, worst_gap, passed)


@dataclass(frozen=True)
class CharacterWitness:
    character_index: int
    character: str
    y_star: int
    t_star: float
    sigma_star: float
    value: float


@dataclass(frozen=True)
class VerificationReport:
    d: int
    x: int
    b_exponent: float
    k: int
    lhs: float
    rhs: float
    ratio: float
    c_used: float
    c1_hat: Optional[float]
    L: float
    weighted_norm: float
    rhs_dual_display: Optional[float]
    lambda_max: Optional[float]
    seed: Optional[int]
    witnesses: tuple[CharacterWitness, ...]
    passed: bool
    variant: str = "theorem"


def _check_characters(characters: Sequence[Character], spec: SumSpec) -> None:
    if not characters:
        raise DomainError("at least one character is required")
    if any(chi.modulus != spec.D for chi in characters):
        raise DomainError(f"all characters must be taken mod D={spec.D}")
    if len(set(characters)) != len(characters):
        raise DomainError("characters must be pairwise distinct")


def default_c1(characters: Sequence[Character], spec: SumSpec, with_conjugates: bool) -> float:
    pool = list(characters)
    if with_conjugates:
        pool += [chi.conjugate() for chi in characters]
    pool = list(dict.fromkeys(pool))
    if len(pool) < 2:
        return 0.0
    return scan_cross_constant(spec, pool).c1_hat


def _witness_lambda(characters: Sequence[Character], witnesses, spec: SumSpec) -> Optional[float]:
    if spec.D == spec.x or any(w.value == 0 for w in witnesses):
        return None
    delta = build_delta(characters, [w.t_star for w in witnesses], [w.y_star for w in witnesses], spec)
    return top_eigenpair(gram_matrix(delta).entries).value


def _verify(
    a: CoefficientVector,
    characters: Sequence[Character],
    spec: SumSpec,
    c: Optional[float],
    *,
    real_part: bool,
    seed: Optional[int],
    c1_hat: Optional[float],
) -> VerificationReport:
    _check_characters(characters, spec)
    if a.primes.size and a.is_zero:
        raise DomainError("coefficient vector is identically zero")
    k = len(characters)
    if c is None:
        if c1_hat is None:
            c1_hat = default_c1(characters, spec, with_conjugates=real_part)
        c = 4.0 * c1_hat
    if c < 0:
        raise DomainError(f"c must be non-negative, got {c}")
    witnesses = [rectangle_max(chi, a, spec, real_part=real_part) for chi in characters]
    lhs = compensated_sum([w.value**2 for w in witnesses]).real
    L = sum_reciprocal_primes(spec.D, spec.x, spec.table())
    norm = a.weighted_norm()
    if real_part:
        rhs = 2.0 * (L + k * c) * norm
        rhs_dual = None
    else:
        rhs = (4.0 * L + (k - 1) * c) * norm
        rhs_dual = (4.0 * L + k * c) * norm
    ratio = lhs / rhs if rhs > 0 else 0.0
    report = VerificationReport(
        d=spec.D,
        x=spec.x,
        b_exponent=spec.B,
        k=k,
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        c_used=float(c),
        c1_hat=c1_hat,
        L=L,
        weighted_norm=norm,
        rhs_dual_display=rhs_dual,
        lambda_max=None if real_part else _witness_lambda(characters, witnesses, spec),
        seed=seed,
        witnesses=tuple(
            CharacterWitness(chi.index, chi.label, w.y_star, w.t_star, w.sigma_star, w.value)
            for chi, w in zip(characters, witnesses)
        ),
        passed=lhs <= rhs * (1.0 + PASS_TOLERANCE),
        variant="re-variant" if real_part else "theorem",
    )
    logger.info("%s D=%d x=%d k=%d ratio=%.6f passed=%s", report.variant, spec.D, spec.x, k, ratio, report.passed)
    return report


def verify_theorem(
    a: CoefficientVector,
    characters: Sequence[Character],
    spec: SumSpec,
    c: Optional[float] = None,
    *,
    seed: Optional[int] = None,
    c1_hat: Optional[float] = None,
) -> VerificationReport:
    """lhs = sum_j (rectangle max)^2 against (4L + (k-1)c) sum |a_p|^2 / p.

    Works in the rescaled form directly (a_p rather than a_p p^(-1/2)).
    ``c`` defaults to 4 * c1_hat.
    """
    return _verify(a, characters, spec, c, real_part=False, seed=seed, c1_hat=c1_hat)


def variant_re_bound(
    a: CoefficientVector,
    characters: Sequence[Character],
    spec: SumSpec,
    c: Optional[float] = None,
    *,
    seed: Optional[int] = None,
    c1_hat: Optional[float] = None,
) -> VerificationReport:
    """Re-part variant: rhs = 2(L + k c) sum |a_p|^2 / p.

    Conjugate pairs may both be listed; they are not merged.
    """
    return _verify(a, characters, spec, c, real_part=True, seed=seed, c1_hat=c1_hat)


@dataclass(frozen=True)
class ExtremalReport:
    k: int
    lambda_max: float
    L: float
    c1_hat: float
    ratio_to_bound: float
    ratio_to_L: float
    max_diagonal_ratio: float
    lambda_without_cross_terms: float
    shifts: tuple[float, ...]
    cutoffs: tuple[int, ...]
    pullback_primes: np.ndarray
    pullback_values: np.ndarray
    eigen: EigenPair


def extremal_ratio(
    characters: Sequence[Character],
    spec: SumSpec,
    shifts: Sequence[float],
    cutoffs: Sequence[int],
    *,
    c1_hat: Optional[float] = None,
    allow_duplicates: bool = False,
) -> ExtremalReport:
    """Slack data: lambda_max against L and against L + (k-1) c1_hat."""
    delta = build_delta(characters, shifts, cutoffs, spec, allow_duplicates=allow_duplicates)
    gram = gram_matrix(delta)
    pair = top_eigenpair(gram.entries)
    L = sum_reciprocal_primes(spec.D, spec.x, spec.table())
    if c1_hat is None:
        distinct = list(dict.fromkeys(characters))
        c1_hat = scan_cross_constant(spec, distinct).c1_hat if len(distinct) >= 2 else 0.0
    bound = L + (delta.k - 1) * c1_hat
    pullback = delta.dense().conj().T @ pair.vector
    norm = np.linalg.norm(pullback)
    if norm > 0:
        pullback = pullback / norm
    diagonal_max = float(gram.diagonal.max())
    return ExtremalReport(
        k=delta.k,
        lambda_max=pair.value,
        L=L,
        c1_hat=c1_hat,
        ratio_to_bound=pair.value / bound if bound > 0 else 0.0,
        ratio_to_L=pair.value / L if L > 0 else 0.0,
        max_diagonal_ratio=diagonal_max / L if L > 0 else 0.0,
        lambda_without_cross_terms=diagonal_max,
        shifts=tuple(float(t) for t in shifts),
        cutoffs=tuple(int(y) for y in cutoffs),
        pullback_primes=delta.primes,
        pullback_values=pullback,
        eigen=pair,
    )
