import csv
import io
import math
import random

import numpy as np
from django.test import SimpleTestCase, tag

from arithmetic.services import totient
from characters.services import (
    character_group,
    conjugate,
    evaluate,
    product,
    select_characters,
    unit_group_basis,
    verify_orthogonality,
    write_character_table,
)
from core.exceptions import DomainError, RangeError


def legendre(n, p):
    """Quadratic residue symbol by squaring."""
    if n % p == 0:
        return 0
    return 1 if n % p in {k * k % p for k in range(1, p)} else -1


class CharacterGroupTests(SimpleTestCase):
    def test_trivial_modulus(self):
        group = character_group(1)
        self.assertEqual(len(group), 1)
        self.assertEqual([group[0](n) for n in range(1, 6)], [1, 1, 1, 1, 1])

    def test_modulus_four(self):
        group = character_group(4)
        self.assertEqual(len(group), 2)
        self.assertTrue(group[0].is_principal)
        self.assertEqual(group[1](3), -1)

    def test_modulus_five(self):
        chi = character_group(5)[1]
        self.assertEqual(chi(2), 1j)
        self.assertEqual(chi(3), -1j)
        self.assertEqual(chi(4), -1)
        self.assertEqual(chi.order, 4)

    def test_quadratic_character_mod_five(self):
        quadratic = character_group(5)[2]
        self.assertEqual(quadratic.order, 2)
        self.assertTrue(quadratic.is_real)
        for n in range(1, 30):
            self.assertEqual(quadratic(n), legendre(n, 5))

    def test_size_and_distinctness(self):
        for D in (1, 2, 8, 12, 16, 24, 45, 64, 97, 120):
            group = character_group(D)
            self.assertEqual(len(group), totient(D))
            self.assertEqual(unit_group_basis(D).order, totient(D))
            rows = {tuple(np.round(chi.values_at(np.arange(1, D + 1)), 12)) for chi in group}
            self.assertEqual(len(rows), totient(D))
            self.assertTrue(group[0].is_principal)

    def test_generators_are_units_of_the_right_order(self):
        for D in (8, 24, 40, 63, 100):
            basis = unit_group_basis(D)
            for g, n in zip(basis.generators, basis.cycle_lengths):
                self.assertEqual(math.gcd(g, D), 1)
                self.assertEqual(pow(g, n, D), 1)

    def test_indices_follow_group_order(self):
        for position, chi in enumerate(character_group(24)):
            self.assertEqual(chi.index, position)


class EvaluateTests(SimpleTestCase):
    def test_examples(self):
        group = character_group(6)
        self.assertEqual(evaluate(group[0], 5), 1)
        for chi in group:
            self.assertEqual(evaluate(chi, 3), 0)

    def test_rejects_non_positive(self):
        with self.assertRaises(DomainError):
            evaluate(character_group(5)[0], 0)

    def test_zero_exactly_off_units(self):
        for chi in character_group(36):
            values = chi.values_at(np.arange(1, 73))
            for n, value in zip(range(1, 73), values):
                if math.gcd(n, 36) > 1:
                    self.assertEqual(value, 0)
                else:
                    self.assertAlmostEqual(abs(value), 1.0, places=12)
                    self.assertAlmostEqual(abs(value ** chi.basis.exponent - 1), 0.0, places=9)

    def test_periodic_and_multiplicative(self):
        rng = random.Random(17)
        for D in (15, 16, 21, 32, 77):
            for chi in character_group(D):
                for _ in range(20):
                    m, n = rng.randint(1, 500), rng.randint(1, 500)
                    self.assertAlmostEqual(chi(m * n), chi(m) * chi(n), places=9)
                    self.assertAlmostEqual(chi(n + D), chi(n), places=12)


class GroupLawTests(SimpleTestCase):
    def test_product_with_conjugate_is_principal(self):
        for chi in character_group(20):
            self.assertTrue(product(chi, conjugate(chi)).is_principal)

    def test_conjugate_of_principal(self):
        principal = character_group(7)[0]
        self.assertEqual(conjugate(principal), principal)

    def test_pointwise_product(self):
        group = character_group(21)
        chi, psi = group[3], group[7]
        ns = np.arange(1, 43)
        np.testing.assert_allclose((chi * psi).values_at(ns), chi.values_at(ns) * psi.values_at(ns), atol=1e-12)

    def test_distinct_pairs_give_non_principal_products(self):
        group = character_group(16)
        for chi in group:
            for psi in group:
                if chi != psi:
                    self.assertFalse((chi * conjugate(psi)).is_principal)

    def test_modulus_mismatch(self):
        with self.assertRaises(DomainError):
            character_group(5)[1] * character_group(7)[1]

    def test_parity_and_conductor(self):
        group = character_group(8)
        self.assertEqual([chi.conductor for chi in group], [1, 8, 4, 8])
        self.assertEqual([chi.parity for chi in group], [1, 1, -1, -1])
        self.assertEqual([chi.conductor for chi in character_group(5)], [1, 5, 5, 5])

    def test_conductor_of_induced_character(self):
        quadratic5 = character_group(5)[2]
        for chi in character_group(15):
            if all(chi(n) == quadratic5(n) for n in range(1, 16) if math.gcd(n, 15) == 1):
                self.assertEqual(chi.conductor, 5)
                self.assertFalse(chi.is_primitive)


class SelectionTests(SimpleTestCase):
    def test_selectors(self):
        self.assertEqual(len(select_characters(5, "all")), 4)
        self.assertEqual(len(select_characters(5, "non-principal")), 3)
        self.assertEqual([chi.index for chi in select_characters(5, [2, 0])], [2, 0])

    def test_out_of_range_index(self):
        with self.assertRaises(RangeError):
            select_characters(5, [4])

    def test_unknown_selector(self):
        with self.assertRaises(DomainError):
            select_characters(5, "odd")


class OrthogonalityTests(SimpleTestCase):
    def test_small_moduli(self):
        self.assertEqual(verify_orthogonality(1).max_deviation, 0.0)
        report = verify_orthogonality(12)
        self.assertEqual(report.size, 4)
        self.assertTrue(report.passed)

    def test_principal_against_quadratic_mod_five(self):
        group = character_group(5)
        total = sum(group[0](n) * group[2](n).conjugate() for n in range(1, 5))
        self.assertEqual(total, 0)

    @tag("slow")
    def test_every_modulus_to_two_hundred(self):
        for D in range(1, 201):
            report = verify_orthogonality(D)
            self.assertEqual(report.size, totient(D), D)
            self.assertLess(report.max_deviation, 1e-9, D)


class CharacterTableTests(SimpleTestCase):
    def test_csv_layout(self):
        buffer = io.StringIO()
        self.assertEqual(write_character_table(5, buffer), 5)
        rows = list(csv.reader(io.StringIO(buffer.getvalue())))
        self.assertEqual(rows[0], ["n", "5:0", "5:1", "5:2", "5:3"])
        self.assertEqual(len(rows), 6)
        self.assertEqual(rows[5][0], "5")
        self.assertEqual(rows[5][1], "0.0,0.0")
        self.assertEqual(rows[2][3], "-1.0,0.0")

    def test_trivial_modulus_table(self):
        buffer = io.StringIO()
        write_character_table(1, buffer)
        self.assertEqual(buffer.getvalue().splitlines(), ["n,1:", "1,\"1.0,0.0\""])
