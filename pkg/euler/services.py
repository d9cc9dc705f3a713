from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, TextIO

import numpy as np
from django.conf import settings

from arithmetic.services import PrimeTable, prime_table
from arithmetic.summation import compensated_cumsum, compensated_sum
from characters.services import Character
from core.exceptions import ConfigError, DomainError, RangeError
from core.parallel import parallel_map
from euler.grids import golden_section_max, sigma_grid, t_grid, t_spacing

logger = logging.getLogger(__name__)

# Relative gap below which two scan values count as a tie.
TIE_TOLERANCE = 1e-12
ABEL_FACTOR = 2.0
ABEL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class SumSpec:
    D: int
    x: int
    B: float
    sigma_max: Optional[float] = None

    def __post_init__(self) -> None:
        if not 1 <= self.D <= self.x:
            raise DomainError(f"need 1 <= D <= x, got D={self.D}, x={self.x}")
        if not self.B > 0:
            raise RangeError(f"B must be positive, got {self.B}")
        if self.sigma_max is not None and self.sigma_max < 1:
            raise RangeError(f"sigma_max must be >= 1, got {self.sigma_max}")

    @property
    def t_max(self) -> float:
        return float(self.D) ** self.B

    def table(self) -> PrimeTable:
        return prime_table(self.x)


@dataclass(frozen=True)
class CoefficientVector:
    """Coefficients a_p on the primes D < p <= x (zero where not given)."""

    D: int
    x: int
    primes: np.ndarray
    log_p: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if not (self.primes.shape == self.log_p.shape == self.values.shape):
            raise DomainError("primes, logs and values must align")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("coefficients must be finite")

    @classmethod
    def from_table(cls, table: PrimeTable, D: int, x: int, values=None) -> "CoefficientVector":
        if x > table.limit:
            raise RangeError(f"x={x} exceeds the prime table limit {table.limit}")
        start, stop = table.index_range(D, x)
        primes = table.primes[start:stop]
        if values is None:
            values = np.ones(primes.size, dtype=np.complex128)
        values = np.asarray(values, dtype=np.complex128)
        return cls(D, x, primes, table.log_p[start:stop], values)

    @classmethod
    def ones(cls, table: PrimeTable, D: int, x: int) -> "CoefficientVector":
        return cls.from_table(table, D, x)

    @classmethod
    def random_complex(cls, table: PrimeTable, D: int, x: int, rng: np.random.Generator) -> "CoefficientVector":
        start, stop = table.index_range(D, x)
        n = stop - start
        return cls.from_table(table, D, x, rng.standard_normal(n) + 1j * rng.standard_normal(n))

    @classmethod
    def random_real(cls, table: PrimeTable, D: int, x: int, rng: np.random.Generator) -> "CoefficientVector":
        start, stop = table.index_range(D, x)
        return cls.from_table(table, D, x, rng.standard_normal(stop - start))

    @classmethod
    def from_mapping(cls, table: PrimeTable, D: int, x: int, mapping: Mapping[int, complex]) -> "CoefficientVector":
        start, stop = table.index_range(D, x)
        base = cls.from_table(table, D, x, np.zeros(stop - start))
        values = base.values.copy()
        for p, value in mapping.items():
            idx = int(np.searchsorted(base.primes, p))
            if idx >= base.primes.size or int(base.primes[idx]) != int(p):
                raise DomainError(f"{p} is not a prime in ({D}, {x}]")
            values[idx] = complex(value)
        return cls(D, x, base.primes, base.log_p, values)

    @property
    def entries(self) -> dict[int, complex]:
        return {int(p): complex(v) for p, v in zip(self.primes, self.values)}

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def weighted_norm(self) -> float:
        """Sum of |a_p|^2 / p."""
        return compensated_sum(np.abs(self.values) ** 2 / self.primes.astype(np.float64)).real

    def abs_tail(self, sigma: float) -> float:
        """Sum of |a_p| p^-sigma."""
        return compensated_sum(np.abs(self.values) * np.exp(-sigma * self.log_p)).real

    def scaled(self, factor: complex) -> "CoefficientVector":
        return CoefficientVector(self.D, self.x, self.primes, self.log_p, self.values * factor)

    def conjugate(self) -> "CoefficientVector":
        return CoefficientVector(self.D, self.x, self.primes, self.log_p, self.values.conj())


def read_coefficient_file(path: Path | str, table: PrimeTable, D: int, x: int) -> CoefficientVector:
    """Parse "p re im" lines; primes must lie in (D, x]."""
    mapping: dict[int, complex] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read coefficient file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ConfigError(f"{path}:{lineno}: expected 'p re im', got {line!r}")
        try:
            p, re_part, im_part = int(parts[0]), float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        if p in mapping:
            raise ConfigError(f"{path}:{lineno}: prime {p} listed twice")
        mapping[p] = complex(re_part, im_part)
    try:
        return CoefficientVector.from_mapping(table, D, x, mapping)
    except DomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def char_prime_sum(chi: Character, a: CoefficientVector, w: int, y: int, s: complex) -> complex:
    """Sum of a_p chi(p) p^-s over w < p <= y, ascending, compensated."""
    if not a.D <= w <= y <= a.x:
        raise RangeError(f"need D <= w <= y <= x, got D={a.D}, w={w}, y={y}, x={a.x}")
    if complex(s).real < 1:
        raise RangeError(f"Re(s) must be >= 1, got {s}")
    start = int(np.searchsorted(a.primes, w, side="right"))
    stop = int(np.searchsorted(a.primes, y, side="right"))
    if stop <= start:
        return 0j
    primes = a.primes[start:stop]
    terms = a.values[start:stop] * chi.values_at(primes) * np.exp(-complex(s) * a.log_p[start:stop])
    return compensated_sum(terms)


@dataclass(frozen=True)
class RectangleMaxWitness:
    value: float
    y_star: int
    t_star: float
    sigma_star: float
    refined: bool = False


class _RectangleScanner:
    """max over y of |prefix sum| for rows of t at fixed sigma."""

    def __init__(self, chi: Character, a: CoefficientVector, real_part: bool = False):
        self.a = a
        self.chi_values = chi.values_at(a.primes)
        self.real_part = real_part

    def terms(self, sigma: float, t_values: np.ndarray) -> np.ndarray:
        damped = self.a.values * np.exp(-sigma * self.a.log_p)
        phase = np.exp(-1j * np.outer(t_values, self.a.log_p))
        if self.real_part:
            return damped * (self.chi_values * phase).real
        return (damped * self.chi_values) * phase

    def profile(self, sigma: float, t_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        magnitudes = np.abs(compensated_cumsum(self.terms(sigma, np.atleast_1d(t_values))))
        best = np.argmax(magnitudes, axis=1)
        return magnitudes[np.arange(best.size), best], best

    def value_at(self, sigma: float, t: float) -> tuple[float, int]:
        values, idx = self.profile(sigma, np.array([t]))
        return float(values[0]), int(idx[0])


def _chunks(n: int) -> list[tuple[int, int]]:
    rows = max(1, int(getattr(settings, "LSL_T_CHUNK_ROWS", 64)))
    return [(start, min(start + rows, n)) for start in range(0, n, rows)]


def _scan_sigmas(scanner: _RectangleScanner, sigmas: Sequence[float], grid: np.ndarray):
    items = [(sigma, start, stop) for sigma in sigmas for start, stop in _chunks(grid.size)]
    results = parallel_map(lambda item: scanner.profile(item[0], grid[item[1] : item[2]]), items)
    table: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for (sigma, _start, _stop), (values, idx) in zip(items, results):
        prev = table.get(sigma)
        table[sigma] = (values, idx) if prev is None else (
            np.concatenate([prev[0], values]),
            np.concatenate([prev[1], idx]),
        )
    return table


def default_sigma_max(a: CoefficientVector, m1: float, fraction: Optional[float] = None) -> float:
    """Smallest sigma on the geometric grid with sum |a_p| p^-sigma < fraction * m1."""
    fraction = float(fraction if fraction is not None else getattr(settings, "LSL_SIGMA_TAIL_FRACTION", 1e-3))
    if m1 <= 0 or a.primes.size == 0:
        return 1.0
    scale = 1.0 / math.log(a.x + 2)
    for k in range(0, 64):
        sigma = 1.0 + (2**k - 1) * scale
        if a.abs_tail(sigma) < fraction * m1:
            return sigma
    return 1.0 + (2**64 - 1) * scale


def rectangle_max(
    chi: Character,
    a: CoefficientVector,
    spec: SumSpec,
    *,
    real_part: bool = False,
    sigmas: Optional[Sequence[float]] = None,
    divisor: Optional[float] = None,
    refine: bool = True,
) -> RectangleMaxWitness:
    """Approximate max of |sum_{D<p<=y} a_p chi(p) p^-s| over y <= x and the rectangle.

    Every prime y is covered through prefix sums. t runs over the symmetric
    grid of ``t_grid`` followed by golden-section refinement around the best
    cell. Ties resolve to the smallest t, then y, then sigma.
    """
    if (a.D, a.x) != (spec.D, spec.x):
        raise DomainError("coefficient range does not match the sum spec")
    if a.primes.size == 0:
        return RectangleMaxWitness(0.0, spec.x, 0.0, 1.0)
    if a.is_zero:
        raise DomainError("coefficient vector is identically zero")

    grid = t_grid(spec.t_max, spec.x, divisor)
    scanner = _RectangleScanner(chi, a, real_part=real_part)
    table = _scan_sigmas(scanner, [1.0], grid)
    if sigmas is None:
        sigma_max = spec.sigma_max or default_sigma_max(a, float(table[1.0][0].max()))
        sigmas = sigma_grid(spec.x, sigma_max).tolist()
    sigmas = sorted(float(s) for s in sigmas)
    remaining = [s for s in sigmas if s not in table]
    if remaining:
        table.update(_scan_sigmas(scanner, remaining, grid))

    best_value = max(float(table[s][0].max()) for s in sigmas)
    floor = best_value * (1.0 - TIE_TOLERANCE)
    candidates = []
    for sigma in sigmas:
        values, idx = table[sigma]
        for row in np.flatnonzero(values >= floor):
            candidates.append((float(grid[row]), int(a.primes[idx[row]]), sigma, float(values[row])))
    t_star, y_star, sigma_star, value = min(candidates)
    witness = RectangleMaxWitness(value, y_star, t_star, sigma_star)

    if refine and grid.size > 1:
        h = t_spacing(spec.x, divisor)
        lo, hi = max(-spec.t_max, t_star - h), min(spec.t_max, t_star + h)
        t_ref, _ = golden_section_max(lambda t: scanner.value_at(sigma_star, t)[0], lo, hi)
        ref_value, ref_idx = scanner.value_at(sigma_star, t_ref)
        if ref_value > value * (1.0 + TIE_TOLERANCE):
            witness = RectangleMaxWitness(ref_value, int(a.primes[ref_idx]), t_ref, sigma_star, refined=True)
    logger.debug("rectangle_max %s: %s", chi.label, witness)
    return witness


@dataclass(frozen=True)
class LemmaProfileRow:
    w: int
    y: int
    t: float
    sigma: float
    re_value: float
    abs_value: float


@dataclass(frozen=True)
class LemmaScanReport:
    character: str
    D: int
    x: int
    B: float
    t_max: float
    t_spacing: float
    grid_max: float
    empirical_max: float
    w_star: int
    y_star: int
    t_star: float
    refined: bool
    profile: tuple[LemmaProfileRow, ...] = field(default_factory=tuple)


def _validate_grid(name: str, grid: Sequence[int], spec: SumSpec) -> np.ndarray:
    values = np.array(sorted({int(v) for v in grid}), dtype=np.int64)
    if values.size == 0:
        raise DomainError(f"{name} is empty")
    if values[0] < spec.D or values[-1] > spec.x:
        raise RangeError(f"{name} must lie within [{spec.D}, {spec.x}]")
    return values


def lemma_sup_scan(
    chi: Character,
    spec: SumSpec,
    w_grid: Sequence[int],
    y_grid: Optional[Sequence[int]] = None,
    *,
    t_max: Optional[float] = None,
    divisor: Optional[float] = None,
    refine: bool = True,
) -> LemmaScanReport:
    """Empirical sup of Re sum_{w<p<=y} chi(p) p^(-1-it) over the grids.

    ``y_grid=None`` scans every prime cutoff. Pairs with y <= w are empty
    sums and contribute 0.
    """
    if chi.is_principal:
        raise DomainError("the boundedness claim excludes the principal character")
    table = spec.table()
    ones = CoefficientVector.ones(table, spec.D, spec.x)
    ws = _validate_grid("w_grid", w_grid, spec)
    ys = _validate_grid("y_grid", y_grid, spec) if y_grid is not None else np.append(ones.primes, spec.x)
    t_max = float(spec.t_max if t_max is None else t_max)
    grid = t_grid(t_max, spec.x, divisor)
    h = t_spacing(spec.x, divisor)
    logger.info("lemma_sup_scan %s: x=%d, %d t-points, %d w, %d y", chi.label, spec.x, grid.size, ws.size, ys.size)

    chi_values = chi.values_at(ones.primes)
    damped = chi_values * np.exp(-ones.log_p)
    w_pos = np.searchsorted(ones.primes, ws, side="right")
    y_pos = np.searchsorted(ones.primes, ys, side="right")
    valid = ys[None, :] > ws[:, None]

    def scan_chunk(bounds: tuple[int, int]):
        t_values = grid[bounds[0] : bounds[1]]
        prefix = compensated_cumsum(damped * np.exp(-1j * np.outer(t_values, ones.log_p)))
        prefix = np.concatenate([np.zeros((t_values.size, 1), dtype=np.complex128), prefix], axis=1)
        rows = np.arange(t_values.size)
        at_y = prefix[:, y_pos]
        best_re = np.zeros((t_values.size, ws.size))
        best_y = np.zeros((t_values.size, ws.size), dtype=np.int64)
        best_abs = np.zeros((t_values.size, ws.size))
        for i, start in enumerate(w_pos.tolist()):
            diff = at_y - prefix[:, start, None]
            real = np.where(valid[i][None, :], diff.real, 0.0)
            j = np.argmax(real, axis=1)
            best_re[:, i] = real[rows, j]
            best_y[:, i] = j
            best_abs[:, i] = np.where(valid[i, j], np.abs(diff[rows, j]), 0.0)
        return best_re, best_y, best_abs

    results = parallel_map(scan_chunk, _chunks(grid.size))
    best_re = np.concatenate([r[0] for r in results])
    best_y = np.concatenate([r[1] for r in results])
    best_abs = np.concatenate([r[2] for r in results])

    profile = []
    for i, w in enumerate(ws.tolist()):
        row = int(np.argmax(best_re[:, i]))
        j = int(best_y[row, i])
        profile.append(
            LemmaProfileRow(w, int(ys[j]), float(grid[row]), 1.0, float(best_re[row, i]), float(best_abs[row, i]))
        )
    per_t = best_re.max(axis=1)
    row = int(np.argmax(per_t))
    i = int(np.argmax(best_re[row]))
    grid_max = float(per_t[row])
    w_star, y_star, t_star = int(ws[i]), int(ys[best_y[row, i]]), float(grid[row])
    empirical, refined = grid_max, False

    if refine and y_star > w_star and grid.size > 1:
        lo_idx = int(np.searchsorted(ones.primes, w_star, side="right"))
        hi_idx = int(np.searchsorted(ones.primes, y_star, side="right"))
        segment_logs = ones.log_p[lo_idx:hi_idx]
        segment = damped[lo_idx:hi_idx]

        def real_sum(t: float) -> float:
            return compensated_sum(segment * np.exp(-1j * t * segment_logs)).real

        t_ref, _ = golden_section_max(real_sum, max(-t_max, t_star - h), min(t_max, t_star + h))
        value = real_sum(t_ref)
        if value > grid_max + TIE_TOLERANCE * max(1.0, abs(grid_max)):
            empirical, t_star, refined = value, t_ref, True

    return LemmaScanReport(
        character=chi.label,
        D=spec.D,
        x=spec.x,
        B=spec.B,
        t_max=t_max,
        t_spacing=h,
        grid_max=grid_max,
        empirical_max=empirical,
        w_star=w_star,
        y_star=y_star,
        t_star=t_star,
        refined=refined,
        profile=tuple(profile),
    )


@dataclass(frozen=True)
class AbelReport:
    character: str
    m1: float
    m_rect: float
    ratio: float
    bound_factor: float
    passed: bool
    witness_sigma1: RectangleMaxWitness
    witness_rect: RectangleMaxWitness


def abel_reduction_check(chi: Character, a: CoefficientVector, spec: SumSpec) -> AbelReport:
    """Compare the full-rectangle max against the sigma = 1 max."""
    at_one = rectangle_max(chi, a, spec, sigmas=[1.0])
    full = rectangle_max(chi, a, spec)
    if at_one.value > 0:
        ratio = full.value / at_one.value
    else:
        ratio = 1.0
    passed = full.value <= ABEL_FACTOR * at_one.value + ABEL_TOLERANCE
    return AbelReport(chi.label, at_one.value, full.value, ratio, ABEL_FACTOR, passed, at_one, full)


def write_scan_profile(reports: Sequence[LemmaScanReport], stream: TextIO) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["w", "y", "t", "sigma", "re_value", "abs_value", "character"])
    count = 0
    for report in reports:
        for row in report.profile:
            writer.writerow(
                [row.w, row.y, repr(row.t), repr(row.sigma), repr(row.re_value), repr(row.abs_value), report.character]
            )
            count += 1
    return count
