import math
import random
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from arithmetic.services import (
    crt,
    factorize,
    has_cyclic_unit_group,
    prime_table,
    primitive_root,
    sieve_primes,
    sum_reciprocal_primes,
    totient,
)
from arithmetic.summation import compensated_cumsum, compensated_sum
from core.exceptions import DomainError, RangeError


def trial_division_primes(limit):
    return [n for n in range(2, limit + 1) if all(n % d for d in range(2, math.isqrt(n) + 1))]


class SievePrimesTests(SimpleTestCase):
    def test_small_limits(self):
        self.assertEqual(sieve_primes(10).primes.tolist(), [2, 3, 5, 7])
        self.assertEqual(sieve_primes(2).primes.tolist(), [2])

    def test_matches_trial_division(self):
        self.assertEqual(sieve_primes(5000).primes.tolist(), trial_division_primes(5000))

    def test_limit_out_of_range(self):
        with self.assertRaises(RangeError):
            sieve_primes(1)
        with self.assertRaises(RangeError):
            sieve_primes(1001, cap=1000)

    @override_settings(LSL_SEGMENT_THRESHOLD=1000, LSL_SEGMENT_SIZE=97)
    def test_segmented_matches_simple(self):
        for limit in (1000, 1001, 4099, 20000):
            self.assertEqual(sieve_primes(limit).primes.tolist(), trial_division_primes(limit))

    def test_table_is_read_only(self):
        table = sieve_primes(100)
        with self.assertRaises(ValueError):
            table.primes[0] = 4

    def test_reciprocal_prefix(self):
        table = sieve_primes(1000)
        steps = np.diff(table.recip_prefix)
        self.assertTrue(np.all(steps > 0))
        np.testing.assert_allclose(steps, 1.0 / table.primes[1:], rtol=0, atol=1e-14)

    def test_index_range_and_membership(self):
        table = prime_table(100)
        start, stop = table.index_range(5, 20)
        self.assertEqual(table.primes[start:stop].tolist(), [7, 11, 13, 17, 19])
        self.assertTrue(table.is_prime(97))
        self.assertFalse(table.is_prime(91))
        with self.assertRaises(RangeError):
            table.is_prime(101)

    @tag("slow")
    def test_prime_count_to_a_million(self):
        self.assertEqual(len(sieve_primes(10**6)), 78498)


class FactorizationTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(factorize(1).pairs, ())
        self.assertEqual(factorize(12).pairs, ((2, 2), (3, 1)))
        self.assertEqual(factorize(784).pairs, ((2, 4), (7, 2)))

    def test_multiplies_back(self):
        for n in range(1, 3000):
            self.assertEqual(factorize(n).value, n)

    def test_rejects_non_positive(self):
        with self.assertRaises(DomainError):
            factorize(0)

    def test_totient(self):
        for n in range(1, 200):
            expected = sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)
            self.assertEqual(totient(n), expected)


class PrimitiveRootTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(primitive_root(5), 2)
        self.assertEqual(primitive_root(4), 3)
        self.assertEqual(primitive_root(9), 2)
        self.assertEqual(primitive_root(2), 1)

    def test_generates_the_unit_group(self):
        for q in (3, 7, 25, 27, 49, 121, 125, 169):
            g = primitive_root(q)
            units = {n for n in range(1, q) if math.gcd(n, q) == 1}
            self.assertEqual({pow(g, k, q) for k in range(totient(q))}, units)

    def test_non_cyclic_modulus(self):
        self.assertFalse(has_cyclic_unit_group(8))
        with self.assertRaises(DomainError):
            primitive_root(15)


class CrtTests(SimpleTestCase):
    def test_reconstructs(self):
        value, modulus = crt([2, 3, 2], [3, 5, 7])
        self.assertEqual((value, modulus), (23, 105))

    def test_rejects_shared_factors(self):
        with self.assertRaises(DomainError):
            crt([1, 1], [4, 6])


class ReciprocalSumTests(SimpleTestCase):
    def test_rational_oracles(self):
        table = prime_table(100)
        expected = float(Fraction(1, 3) + Fraction(1, 5) + Fraction(1, 7))
        self.assertAlmostEqual(sum_reciprocal_primes(2, 10, table), expected, places=15)
        expected = float(Fraction(1, 2) + Fraction(1, 3) + Fraction(1, 5) + Fraction(1, 7))
        self.assertAlmostEqual(sum_reciprocal_primes(1, 10, table), expected, places=15)

    def test_empty_range(self):
        self.assertEqual(sum_reciprocal_primes(10, 10, prime_table(100)), 0.0)

    def test_errors(self):
        table = prime_table(100)
        with self.assertRaises(DomainError):
            sum_reciprocal_primes(11, 10, table)
        with self.assertRaises(RangeError):
            sum_reciprocal_primes(2, 1000, table)

    def test_agrees_with_prefix_table(self):
        table = prime_table(10**4)
        rng = random.Random(7)
        for _ in range(50):
            D = rng.randint(1, 5000)
            x = rng.randint(D, 10**4)
            start, stop = table.index_range(D, x)
            self.assertAlmostEqual(
                sum_reciprocal_primes(D, x, table), table.prefix_at(stop) - table.prefix_at(start), delta=1e-12
            )


class CompensatedSumTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(compensated_sum([]), 0)
        self.assertEqual(compensated_sum([1.0, -1.0, 1e-16]), 1e-16)
        self.assertAlmostEqual(compensated_sum(np.full(10**6, 0.1)).real, 1e5, delta=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        values = rng.standard_normal(5000) * 10.0 ** rng.integers(-8, 8, 5000)
        total = compensated_sum(values).real
        shuffled = compensated_sum(rng.permutation(values)).real
        self.assertLessEqual(abs(total - shuffled), 1e-10 * abs(total))

    def test_complex_parts(self):
        self.assertEqual(compensated_sum([1 + 2j, 3 - 1j]), 4 + 1j)

    def test_cumsum_matches_exact_prefix(self):
        rng = np.random.default_rng(11)
        values = rng.standard_normal(1000)
        prefix = compensated_cumsum(values, block=16)
        exact = np.array([math.fsum(values[: i + 1]) for i in range(values.size)])
        np.testing.assert_allclose(prefix, exact, rtol=0, atol=1e-12)

    def test_cumsum_rows_are_independent(self):
        rng = np.random.default_rng(5)
        rows = rng.standard_normal((3, 700)) + 1j * rng.standard_normal((3, 700))
        stacked = compensated_cumsum(rows)
        for i in range(3):
            np.testing.assert_array_equal(stacked[i], compensated_cumsum(rows[i]))
