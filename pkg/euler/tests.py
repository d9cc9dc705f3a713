import csv
import io
import math
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from arithmetic.services import sum_reciprocal_primes
from characters.services import character_group
from core.exceptions import ConfigError, DomainError, RangeError
from euler.grids import dyadic_grid, golden_section_max, sigma_grid, t_grid, t_spacing
from euler.services import (
    CoefficientVector,
    SumSpec,
    abel_reduction_check,
    char_prime_sum,
    default_sigma_max,
    lemma_sup_scan,
    read_coefficient_file,
    rectangle_max,
    write_scan_profile,
)
from experiments.services import lemma_threshold


def ones(spec):
    return CoefficientVector.ones(spec.table(), spec.D, spec.x)


class GridTests(SimpleTestCase):
    def test_t_grid_is_symmetric_and_bounded(self):
        grid = t_grid(5.0, 10**4)
        self.assertEqual(grid[0], -5.0)
        self.assertEqual(grid[-1], 5.0)
        np.testing.assert_array_equal(grid, -grid[::-1])
        self.assertIn(0.0, grid)
        self.assertLessEqual(np.max(np.diff(grid)), t_spacing(10**4) * (1 + 1e-12))

    def test_refined_t_grid_is_a_superset(self):
        coarse = set(t_grid(3.0, 1000, divisor=8).tolist())
        fine = set(t_grid(3.0, 1000, divisor=16).tolist())
        self.assertTrue(coarse <= fine)

    def test_sigma_grid(self):
        grid = sigma_grid(100, 2.0)
        scale = 1 / math.log(102)
        self.assertEqual(grid[0], 1.0)
        self.assertAlmostEqual(grid[1], 1 + scale)
        self.assertAlmostEqual(grid[2], 1 + 3 * scale)
        self.assertEqual(grid[-1], 2.0)
        self.assertEqual(sigma_grid(100, 1.0).tolist(), [1.0])

    def test_dyadic_grid(self):
        self.assertEqual(dyadic_grid(5, 100), [5, 10, 20, 40, 80, 100])
        self.assertEqual(dyadic_grid(7, 7), [7])

    def test_golden_section(self):
        arg, value = golden_section_max(lambda t: -(t - 0.3) ** 2 + 1.0, -1.0, 1.0)
        self.assertAlmostEqual(arg, 0.3, places=6)
        self.assertAlmostEqual(value, 1.0, places=10)


class SumSpecTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(DomainError):
            SumSpec(10, 5, 1.0)
        with self.assertRaises(RangeError):
            SumSpec(5, 10, 0.0)
        with self.assertRaises(RangeError):
            SumSpec(5, 10, 1.0, sigma_max=0.5)
        self.assertEqual(SumSpec(5, 10, 1.0).t_max, 5.0)


class CoefficientTests(SimpleTestCase):
    def test_from_mapping_rejects_non_primes(self):
        spec = SumSpec(5, 100, 1.0)
        with self.assertRaises(DomainError):
            CoefficientVector.from_mapping(spec.table(), 5, 100, {9: 1.0})
        with self.assertRaises(DomainError):
            CoefficientVector.from_mapping(spec.table(), 5, 100, {5: 1.0})

    def test_weighted_norm(self):
        spec = SumSpec(2, 10, 1.0)
        a = CoefficientVector.from_mapping(spec.table(), 2, 10, {3: 1.0, 7: 2j})
        self.assertAlmostEqual(a.weighted_norm(), 1 / 3 + 4 / 7, places=15)
        self.assertEqual(a.entries, {3: 1 + 0j, 5: 0j, 7: 2j})

    def test_read_coefficient_file(self):
        spec = SumSpec(5, 100, 1.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "coeffs.txt"
            path.write_text("# p re im\n7 1.5 0\n11 0 -2\n\n")
            a = read_coefficient_file(path, spec.table(), 5, 100)
            self.assertEqual(a.entries[7], 1.5)
            self.assertEqual(a.entries[11], -2j)
            self.assertEqual(a.entries[13], 0)

            path.write_text("7 1 0\n9 1 0\n")
            with self.assertRaises(ConfigError):
                read_coefficient_file(path, spec.table(), 5, 100)
            path.write_text("7 1\n")
            with self.assertRaises(ConfigError):
                read_coefficient_file(path, spec.table(), 5, 100)
            path.write_text("7 1 0\n7 2 0\n")
            with self.assertRaises(ConfigError):
                read_coefficient_file(path, spec.table(), 5, 100)
        with self.assertRaises(ConfigError):
            read_coefficient_file("/nonexistent/coeffs.txt", spec.table(), 5, 100)


class CharPrimeSumTests(SimpleTestCase):
    def test_empty_range(self):
        spec = SumSpec(3, 10, 1.0)
        self.assertEqual(char_prime_sum(character_group(3)[0], ones(spec), 7, 7, 1), 0)

    def test_principal_mod_three(self):
        spec = SumSpec(3, 10, 1.0)
        value = char_prime_sum(character_group(3)[0], ones(spec), 3, 10, 1)
        self.assertAlmostEqual(value.real, float(Fraction(12, 35)), places=15)
        self.assertEqual(value.imag, 0.0)

    def test_quadratic_mod_five(self):
        spec = SumSpec(5, 20, 1.0)
        quadratic = character_group(5)[2]
        expected = -Fraction(1, 7) + Fraction(1, 11) - Fraction(1, 13) - Fraction(1, 17) + Fraction(1, 19)
        value = char_prime_sum(quadratic, ones(spec), 5, 20, 1)
        self.assertAlmostEqual(value.real, float(expected), places=15)

    def test_range_errors(self):
        spec = SumSpec(5, 20, 1.0)
        chi = character_group(5)[1]
        with self.assertRaises(RangeError):
            char_prime_sum(chi, ones(spec), 4, 20, 1)
        with self.assertRaises(RangeError):
            char_prime_sum(chi, ones(spec), 5, 21, 1)
        with self.assertRaises(RangeError):
            char_prime_sum(chi, ones(spec), 5, 20, 0.5)

    def test_prefix_consistency_and_conjugation(self):
        spec = SumSpec(7, 5000, 1.0)
        a = CoefficientVector.random_complex(spec.table(), 7, 5000, np.random.default_rng(2))
        for chi in character_group(7):
            for s in (1, 1 + 2.5j, 1.7 - 0.4j):
                whole = char_prime_sum(chi, a, 7, 4000, s)
                split = char_prime_sum(chi, a, 7, 1000, s) + char_prime_sum(chi, a, 1000, 4000, s)
                self.assertLessEqual(abs(whole - split), 1e-10 * max(1.0, abs(whole)))
                mirrored = char_prime_sum(chi.conjugate(), a.conjugate(), 7, 4000, s.conjugate())
                self.assertAlmostEqual(mirrored, whole.conjugate(), places=12)


class RectangleMaxTests(SimpleTestCase):
    def test_single_prime_support(self):
        spec = SumSpec(5, 100, 1.0)
        a = CoefficientVector.from_mapping(spec.table(), 5, 100, {13: 1.0})
        witness = rectangle_max(character_group(5)[1], a, spec)
        self.assertAlmostEqual(witness.value, 1 / 13, places=15)
        self.assertEqual(witness.sigma_star, 1.0)
        self.assertEqual(witness.t_star, -spec.t_max)
        self.assertEqual(witness.y_star, 13)

    def test_principal_mod_two(self):
        spec = SumSpec(2, 10, 1.0)
        witness = rectangle_max(character_group(2)[0], ones(spec), spec)
        self.assertAlmostEqual(witness.value, 1 / 3 + 1 / 5 + 1 / 7, places=14)
        self.assertEqual((witness.t_star, witness.sigma_star, witness.y_star), (0.0, 1.0, 7))

    def test_homogeneity(self):
        spec = SumSpec(5, 2000, 1.0)
        a = CoefficientVector.random_complex(spec.table(), 5, 2000, np.random.default_rng(4))
        chi = character_group(5)[1]
        base = rectangle_max(chi, a, spec)
        doubled = rectangle_max(chi, a.scaled(2.0), spec)
        self.assertAlmostEqual(doubled.value, 2 * base.value, places=12)
        self.assertEqual((doubled.t_star, doubled.y_star, doubled.sigma_star), (base.t_star, base.y_star, base.sigma_star))

    def test_bounds(self):
        spec = SumSpec(7, 3000, 1.0)
        a = CoefficientVector.random_complex(spec.table(), 7, 3000, np.random.default_rng(8))
        ceiling = float(np.sum(np.abs(a.values) / a.primes))
        for chi in character_group(7):
            witness = rectangle_max(chi, a, spec)
            self.assertLessEqual(witness.value, ceiling + 1e-12)
            self.assertLessEqual(abs(witness.t_star), spec.t_max)
            self.assertGreater(witness.y_star, spec.D)
            for t in t_grid(spec.t_max, spec.x)[::37].tolist() + [spec.t_max]:
                for y in (100, 1000, 3000):
                    probe = abs(char_prime_sum(chi, a, 7, y, 1 + 1j * t))
                    self.assertGreaterEqual(witness.value, probe - 1e-12)

    def test_zero_coefficients(self):
        spec = SumSpec(5, 100, 1.0)
        a = CoefficientVector.from_mapping(spec.table(), 5, 100, {})
        with self.assertRaises(DomainError):
            rectangle_max(character_group(5)[1], a, spec)

    def test_empty_prime_range(self):
        spec = SumSpec(10, 10, 1.0)
        witness = rectangle_max(character_group(10)[1], ones(spec), spec)
        self.assertEqual(witness.value, 0.0)

    def test_default_sigma_max_cuts_the_tail(self):
        spec = SumSpec(5, 1000, 1.0)
        a = ones(spec)
        sigma = default_sigma_max(a, 0.5, fraction=1e-3)
        self.assertLess(a.abs_tail(sigma), 5e-4)
        self.assertGreater(sigma, 1.0)


class LemmaScanTests(SimpleTestCase):
    def test_rejects_principal(self):
        spec = SumSpec(5, 100, 1.0)
        with self.assertRaises(DomainError):
            lemma_sup_scan(character_group(5)[0], spec, [5])

    def test_empty_ranges(self):
        spec = SumSpec(5, 1000, 1.0)
        report = lemma_sup_scan(character_group(5)[2], spec, [1000], [1000])
        self.assertEqual(report.empirical_max, 0.0)
        self.assertFalse(report.refined)

    def test_grid_bounds(self):
        spec = SumSpec(5, 1000, 1.0)
        with self.assertRaises(RangeError):
            lemma_sup_scan(character_group(5)[2], spec, [4])
        with self.assertRaises(RangeError):
            lemma_sup_scan(character_group(5)[2], spec, [5], [2000])

    def test_conjugate_gives_same_maximum(self):
        spec = SumSpec(5, 5000, 1.0)
        chi = character_group(5)[1]
        grid = dyadic_grid(5, 5000)
        first = lemma_sup_scan(chi, spec, grid, grid, refine=False)
        second = lemma_sup_scan(chi.conjugate(), spec, grid, grid, refine=False)
        self.assertAlmostEqual(first.grid_max, second.grid_max, places=12)
        self.assertAlmostEqual(first.t_star, -second.t_star, places=12)
        self.assertEqual((first.w_star, first.y_star), (second.w_star, second.y_star))
        self.assertEqual(len(first.profile), len(second.profile))
        for mine, theirs in zip(first.profile, second.profile):
            self.assertEqual(mine.w, theirs.w)
            self.assertAlmostEqual(mine.re_value, theirs.re_value, places=12)
            if mine.re_value > 1e-9:
                # rows with no positive sum tie at zero and report the first grid point
                self.assertEqual(mine.y, theirs.y)
                self.assertAlmostEqual(mine.t, -theirs.t, places=12)
                self.assertAlmostEqual(mine.abs_value, theirs.abs_value, places=12)

    def test_refining_the_grid_never_lowers_the_maximum(self):
        spec = SumSpec(7, 3000, 1.0)
        chi = character_group(7)[2]
        grid = dyadic_grid(7, 3000)
        coarse = lemma_sup_scan(chi, spec, grid, grid, divisor=8, refine=False)
        fine = lemma_sup_scan(chi, spec, grid, grid, divisor=16, refine=False)
        self.assertGreaterEqual(fine.grid_max, coarse.grid_max - 1e-12)
        refined = lemma_sup_scan(chi, spec, grid, grid, divisor=8)
        self.assertGreaterEqual(refined.empirical_max, refined.grid_max)

    def test_profile_has_one_row_per_w(self):
        spec = SumSpec(5, 2000, 1.0)
        grid = dyadic_grid(5, 2000)
        report = lemma_sup_scan(character_group(5)[2], spec, grid)
        self.assertEqual([row.w for row in report.profile], grid)
        self.assertGreaterEqual(report.empirical_max, max(r.re_value for r in report.profile))
        buffer = io.StringIO()
        self.assertEqual(write_scan_profile([report], buffer), len(grid))
        rows = list(csv.reader(io.StringIO(buffer.getvalue())))
        self.assertEqual(rows[0], ["w", "y", "t", "sigma", "re_value", "abs_value", "character"])
        self.assertEqual(rows[1][-1], "5:2")

    def test_matches_a_fine_grid_oracle(self):
        spec = SumSpec(5, 10**4, 1.0)
        quadratic = character_group(5)[2]
        grid = dyadic_grid(5, 10**4)
        report = lemma_sup_scan(quadratic, spec, grid, grid)
        oracle = lemma_sup_scan(quadratic, spec, grid, grid, divisor=32, refine=False)
        self.assertAlmostEqual(report.empirical_max, oracle.grid_max, delta=1e-3)

    def test_threshold_is_below_the_trivial_bound(self):
        spec = SumSpec(5, 5000, 1.0)
        threshold = lemma_threshold(5)
        self.assertLess(threshold, sum_reciprocal_primes(5, 5000, spec.table()))
        grid = dyadic_grid(5, 5000)
        for chi in character_group(5)[1:]:
            report = lemma_sup_scan(chi, spec, grid)
            self.assertLessEqual(report.empirical_max, threshold, chi.label)

    @tag("slow")
    def test_stays_below_pinned_threshold(self):
        for D in range(3, 102):
            threshold = lemma_threshold(D)
            chars = [chi for chi in character_group(D) if not chi.is_principal]
            for x in dyadic_grid(1000, 10**5):
                spec = SumSpec(D, x, 1.0)
                grid = dyadic_grid(D, x)
                for chi in chars:
                    report = lemma_sup_scan(chi, spec, grid, refine=False)
                    self.assertLessEqual(report.grid_max, threshold, (D, x, chi.label))


class AbelReductionTests(SimpleTestCase):
    def test_single_prime_support(self):
        spec = SumSpec(5, 100, 1.0)
        a = CoefficientVector.from_mapping(spec.table(), 5, 100, {31: 2.0 - 1j})
        report = abel_reduction_check(character_group(5)[3], a, spec)
        self.assertAlmostEqual(report.ratio, 1.0, places=12)
        self.assertTrue(report.passed)

    def test_aligned_coefficients(self):
        spec = SumSpec(5, 3000, 1.0)
        chi = character_group(5)[1]
        table = spec.table()
        base = ones(spec)
        a = CoefficientVector.from_table(table, 5, 3000, np.conj(chi.values_at(base.primes)))
        report = abel_reduction_check(chi, a, spec)
        self.assertAlmostEqual(report.ratio, 1.0, places=9)

    def test_random_draws(self):
        spec = SumSpec(5, 10**4, 1.0)
        rng = np.random.default_rng(21)
        chi = character_group(5)[1]
        for _ in range(3):
            a = CoefficientVector.random_complex(spec.table(), 5, 10**4, rng)
            report = abel_reduction_check(chi, a, spec)
            self.assertLessEqual(report.ratio, 2.0 + 1e-6)
            self.assertTrue(report.passed)

    @tag("slow")
    def test_hundred_seeded_draws(self):
        spec = SumSpec(5, 10**4, 1.0)
        chars = character_group(5)
        for seed in range(100):
            a = CoefficientVector.random_complex(spec.table(), 5, 10**4, np.random.default_rng(seed))
            report = abel_reduction_check(chars[1 + seed % 3], a, spec)
            self.assertLessEqual(report.m_rect, 2.0 * report.m1 + 1e-6, seed)
