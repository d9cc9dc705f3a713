"""Dirichlet characters mod D.

A character is stored as an exponent vector against a fixed generator basis
of the unit group. Each prime-power component keeps a discrete-log table;
the value at n is a root of unity of order dividing the group exponent.
For 2^e with e >= 3 the component splits into the pair (-1 of cycle 2,
5 of cycle 2^(e-2)).
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from arithmetic.services import crt, factorize, primitive_root, totient
from core.exceptions import DomainError, RangeError

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class BasisComponent:
    prime: int
    prime_power: int
    generator: int
    cycle_length: int
    dlog: np.ndarray


@dataclass(frozen=True, eq=False)
class UnitGroupBasis:
    modulus: int
    components: tuple[BasisComponent, ...]
    exponent: int
    roots: np.ndarray

    def __eq__(self, other: object) -> bool:
        return isinstance(other, UnitGroupBasis) and other.modulus == self.modulus

    def __hash__(self) -> int:
        return hash(("UnitGroupBasis", self.modulus))

    @property
    def cycle_lengths(self) -> tuple[int, ...]:
        return tuple(c.cycle_length for c in self.components)

    @property
    def order(self) -> int:
        return math.prod(self.cycle_lengths)

    @property
    def generators(self) -> tuple[int, ...]:
        """Component generators lifted to units mod D (1 on the other components)."""
        moduli = [prime**power for prime, power in factorize(self.modulus)]
        lifted = []
        for component in self.components:
            residues = [component.generator if m == component.prime_power else 1 for m in moduli]
            value, _ = crt(residues, moduli)
            lifted.append(value)
        return tuple(lifted)


def _cyclic_component(prime: int, prime_power: int) -> BasisComponent:
    generator = primitive_root(prime_power)
    cycle = totient(prime_power)
    dlog = np.full(prime_power, -1, dtype=np.int64)
    value = 1
    for k in range(cycle):
        dlog[value] = k
        value = value * generator % prime_power
    return BasisComponent(prime, prime_power, generator, cycle, dlog)


def _two_power_components(prime_power: int) -> tuple[BasisComponent, BasisComponent]:
    cycle = prime_power // 4
    sign = np.full(prime_power, -1, dtype=np.int64)
    five = np.full(prime_power, -1, dtype=np.int64)
    value = 1
    for k in range(cycle):
        sign[value], sign[prime_power - value] = 0, 1
        five[value], five[prime_power - value] = k, k
        value = value * 5 % prime_power
    return (
        BasisComponent(2, prime_power, prime_power - 1, 2, sign),
        BasisComponent(2, prime_power, 5, cycle, five),
    )


def _roots_of_unity(exponent: int) -> np.ndarray:
    roots = np.exp(2j * np.pi * np.arange(exponent) / exponent)
    exact = (1.0 + 0j, 1j, -1.0 + 0j, -1j)
    for k in range(exponent):
        if (4 * k) % exponent == 0:
            roots[k] = exact[4 * k // exponent]
    return roots


@lru_cache(maxsize=256)
def unit_group_basis(D: int) -> UnitGroupBasis:
    if D < 1:
        raise DomainError(f"modulus must be >= 1, got {D}")
    components: list[BasisComponent] = []
    for prime, power in factorize(D):
        prime_power = prime**power
        if prime == 2 and power == 1:
            continue
        if prime == 2 and power >= 3:
            components.extend(_two_power_components(prime_power))
        else:
            components.append(_cyclic_component(prime, prime_power))
    exponent = math.lcm(*(c.cycle_length for c in components)) if components else 1
    return UnitGroupBasis(D, tuple(components), exponent, _roots_of_unity(exponent))


@dataclass(frozen=True, eq=False)
class Character:
    basis: UnitGroupBasis
    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        lengths = self.basis.cycle_lengths
        if len(self.exponents) != len(lengths):
            raise DomainError("exponent vector does not match the generator basis")
        if any(not 0 <= e < n for e, n in zip(self.exponents, lengths)):
            raise RangeError(f"exponents {self.exponents} out of range for cycles {lengths}")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Character)
            and other.modulus == self.modulus
            and other.exponents == self.exponents
        )

    def __hash__(self) -> int:
        return hash((self.modulus, self.exponents))

    def __repr__(self) -> str:
        return f"Character({self.label})"

    @property
    def modulus(self) -> int:
        return self.basis.modulus

    @property
    def label(self) -> str:
        return f"{self.modulus}:" + ".".join(str(e) for e in self.exponents)

    @property
    def index(self) -> int:
        """Position in ``character_group(D)``."""
        position = 0
        for e, n in zip(self.exponents, self.basis.cycle_lengths):
            position = position * n + e
        return position

    def values_at(self, ns: Union[Sequence[int], np.ndarray]) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        basis = self.basis
        numerator = np.zeros(ns.shape, dtype=np.int64)
        for component, e in zip(basis.components, self.exponents):
            if e == 0:
                continue
            logs = component.dlog[np.mod(ns, component.prime_power)]
            numerator += e * logs * (basis.exponent // component.cycle_length)
        values = basis.roots[np.mod(numerator, basis.exponent)]
        if basis.modulus > 1:
            values = np.where(np.gcd(ns, basis.modulus) == 1, values, 0j)
        return values

    def __call__(self, n: int) -> complex:
        if n < 1:
            raise DomainError(f"characters are evaluated at n >= 1, got {n}")
        return complex(self.values_at([n])[0])

    def conjugate(self) -> "Character":
        flipped = tuple((-e) % n for e, n in zip(self.exponents, self.basis.cycle_lengths))
        return Character(self.basis, flipped)

    def __mul__(self, other: "Character") -> "Character":
        if not isinstance(other, Character):
            return NotImplemented
        if other.modulus != self.modulus:
            raise DomainError(f"modulus mismatch: {self.modulus} vs {other.modulus}")
        summed = tuple(
            (e + f) % n for e, f, n in zip(self.exponents, other.exponents, self.basis.cycle_lengths)
        )
        return Character(self.basis, summed)

    @property
    def order(self) -> int:
        orders = [n // math.gcd(e, n) for e, n in zip(self.exponents, self.basis.cycle_lengths)]
        return math.lcm(*orders) if orders else 1

    @property
    def is_principal(self) -> bool:
        return not any(self.exponents)

    @property
    def is_real(self) -> bool:
        return self.order <= 2

    @property
    def parity(self) -> int:
        """chi(-1)."""
        if self.modulus <= 2:
            return 1
        return 1 if self.values_at([self.modulus - 1])[0].real > 0 else -1

    @property
    def conductor(self) -> int:
        result = 1
        pairs = list(zip(self.basis.components, self.exponents))
        for idx, (component, e) in enumerate(pairs):
            if component.prime == 2 and component.prime_power >= 8:
                if component.generator != 5:
                    continue
                sign_exponent = pairs[idx - 1][1]
                five_order = component.cycle_length // math.gcd(e, component.cycle_length)
                if five_order > 1:
                    result *= 2 ** (2 + _valuation(five_order, 2))
                elif sign_exponent:
                    result *= 4
                continue
            local_order = component.cycle_length // math.gcd(e, component.cycle_length)
            if local_order > 1:
                result *= component.prime ** (1 + _valuation(local_order, component.prime))
        return result

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.modulus


def _valuation(n: int, prime: int) -> int:
    count = 0
    while n % prime == 0:
        n //= prime
        count += 1
    return count


def evaluate(chi: Character, n: int) -> complex:
    return chi(n)


def conjugate(chi: Character) -> Character:
    return chi.conjugate()


def product(chi: Character, psi: Character) -> Character:
    return chi * psi


def character_group(D: int) -> list[Character]:
    """All phi(D) characters mod D, lexicographic in exponents; principal first."""
    basis = unit_group_basis(D)
    ranges = [range(n) for n in basis.cycle_lengths]
    return [Character(basis, tuple(exps)) for exps in itertools.product(*ranges)]


CharacterSelector = Union[str, Sequence[int]]


def select_characters(D: int, selector: CharacterSelector) -> list[Character]:
    group = character_group(D)
    if selector == "all":
        return group
    if selector == "non-principal":
        return [chi for chi in group if not chi.is_principal]
    if isinstance(selector, str):
        raise DomainError(f"unknown character selector {selector!r}")
    chosen = []
    for idx in selector:
        if not 0 <= int(idx) < len(group):
            raise RangeError(f"character index {idx} outside 0..{len(group) - 1}")
        chosen.append(group[int(idx)])
    return chosen


@dataclass(frozen=True)
class OrthogonalityReport:
    modulus: int
    size: int
    max_deviation: float
    tolerance: float = ORTHOGONALITY_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance


def value_table(characters: Sequence[Character], D: int) -> np.ndarray:
    ns = np.arange(1, D + 1, dtype=np.int64)
    return np.array([chi.values_at(ns) for chi in characters]).reshape(len(characters), D)


def verify_orthogonality(D: int) -> OrthogonalityReport:
    group = character_group(D)
    values = value_table(group, D)
    gram = values @ values.conj().T
    expected = totient(D) * np.eye(len(group))
    deviation = float(np.max(np.abs(gram - expected))) if group else 0.0
    logger.debug("verify_orthogonality(%d): %d characters, deviation %.3e", D, len(group), deviation)
    return OrthogonalityReport(modulus=D, size=len(group), max_deviation=deviation)


def _cell(value: complex) -> str:
    return f"{float(value.real)!r},{float(value.imag)!r}"


def write_character_table(D: int, stream: TextIO, characters: Iterable[Character] | None = None) -> int:
    """Dump the value table as CSV: column n, then one "re,im" column per character."""
    characters = list(characters) if characters is not None else character_group(D)
    values = value_table(characters, D)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["n"] + [chi.label for chi in characters])
    for n in range(1, D + 1):
        writer.writerow([n] + [_cell(values[i, n - 1]) for i in range(len(characters))])
    return D
