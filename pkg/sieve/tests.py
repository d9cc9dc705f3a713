import numpy as np
from django.test import SimpleTestCase, tag

from arithmetic.services import sum_reciprocal_primes
from characters.services import character_group, select_characters
from core.exceptions import DomainError
from euler.grids import t_spacing
from euler.services import CoefficientVector, SumSpec, char_prime_sum, lemma_sup_scan
from sieve.linalg import top_eigenpair
from sieve.services import (
    SyntheticDelta,
    build_delta,
    cross_term,
    default_c1,
    duality_check,
    duality_selftest,
    estimate_c1,
    extremal_ratio,
    four_way_bound,
    four_way_split,
    gram_matrix,
    product_characters,
    real_coefficient_bound,
    scan_cross_constant,
    variant_re_bound,
    verify_theorem,
)


def brute_force_gram(delta):
    dense = delta.dense()
    k = dense.shape[0]
    out = np.zeros((k, k), dtype=np.complex128)
    for j in range(k):
        for ell in range(k):
            out[j, ell] = sum(dense[j, p] * np.conj(dense[ell, p]) for p in range(dense.shape[1]))
    return out


def random_configuration(rng, D, spec, k):
    group = character_group(D)
    picks = sorted(rng.choice(len(group), size=k, replace=False).tolist())
    chars = [group[i] for i in picks]
    shifts = rng.uniform(-spec.t_max, spec.t_max, size=k).tolist()
    cutoffs = rng.integers(D + 1, spec.x + 1, size=k).tolist()
    return chars, shifts, cutoffs


class BuildDeltaTests(SimpleTestCase):
    def test_single_principal_row(self):
        spec = SumSpec(2, 10, 1.0)
        delta = build_delta(character_group(2), [0.0], [10], spec)
        self.assertEqual(delta.primes.tolist(), [3, 5, 7])
        np.testing.assert_allclose(delta.dense()[0], [3**-0.5, 5**-0.5, 7**-0.5], rtol=1e-14)

    def test_entry_by_direct_evaluation(self):
        spec = SumSpec(5, 100, 1.0)
        chars = select_characters(5, "non-principal")
        delta = build_delta(chars, [0.0, 1.0, -1.0], [100, 100, 100], spec)
        expected = chars[1](7) * np.exp(-(0.5 + 1j) * np.log(7))
        self.assertAlmostEqual(delta.entry(1, 7), expected, places=14)
        self.assertEqual(delta.entry(1, 9), 0)

    def test_moduli_are_zero_or_root_p(self):
        spec = SumSpec(7, 500, 1.0)
        chars = select_characters(7, "all")
        delta = build_delta(chars, [0.5 * j for j in range(6)], [50, 100, 200, 300, 400, 500], spec)
        moduli = np.abs(delta.dense())
        for j, y in enumerate(delta.stops):
            np.testing.assert_allclose(moduli[j, :y], delta.primes[:y] ** -0.5, rtol=1e-13)
            self.assertTrue(np.all(moduli[j, y:] == 0))

    def test_row_without_primes_is_zero(self):
        spec = SumSpec(7, 100, 1.0)
        delta = build_delta(character_group(7)[:1], [0.0], [10], spec)
        self.assertFalse(np.any(delta.dense()))

    def test_rejections(self):
        spec = SumSpec(5, 100, 1.0)
        chars = character_group(5)
        with self.assertRaises(DomainError):
            build_delta([chars[1], chars[1]], [0.0, 1.0], [100, 100], spec)
        with self.assertRaises(DomainError):
            build_delta([chars[1]], [5.5], [100], spec)
        with self.assertRaises(DomainError):
            build_delta([chars[1]], [0.0], [5], spec)
        with self.assertRaises(DomainError):
            build_delta([chars[1]], [0.0, 1.0], [100], spec)
        with self.assertRaises(DomainError):
            build_delta([character_group(7)[1]], [0.0], [100], spec)


class GramMatrixTests(SimpleTestCase):
    def test_single_row(self):
        spec = SumSpec(5, 1000, 1.0)
        gram = gram_matrix(build_delta([character_group(5)[2]], [0.7], [400], spec))
        self.assertAlmostEqual(gram.entries[0, 0].real, sum_reciprocal_primes(5, 400, spec.table()), places=15)

    def test_matches_brute_force(self):
        spec = SumSpec(5, 100, 1.0)
        delta = build_delta(select_characters(5, "non-principal"), [0.0, 1.0, -1.0], [100, 60, 100], spec)
        gram = gram_matrix(delta)
        np.testing.assert_allclose(gram.entries, brute_force_gram(delta), atol=1e-12)
        self.assertLessEqual(gram.hermitian_defect(), 1e-12)

    def test_same_shift_and_cutoff_collapse(self):
        spec = SumSpec(7, 2000, 1.0)
        chars = select_characters(7, [1, 4])
        gram = gram_matrix(build_delta(chars, [0.3, 0.3], [2000, 2000], spec))
        ones = CoefficientVector.ones(spec.table(), 7, 2000)
        expected = char_prime_sum(chars[0] * chars[1].conjugate(), ones, 7, 2000, 1)
        self.assertAlmostEqual(gram.entries[0, 1], expected, places=12)

    def test_off_diagonal_cross_check_and_psd(self):
        rng = np.random.default_rng(12)
        spec = SumSpec(11, 3000, 1.0)
        chars, shifts, cutoffs = random_configuration(rng, 11, spec, 5)
        delta = build_delta(chars, shifts, cutoffs, spec)
        gram = gram_matrix(delta)
        np.testing.assert_allclose(gram.entries, delta.dense() @ delta.dense().conj().T, atol=1e-10)
        self.assertGreaterEqual(np.linalg.eigvalsh(gram.entries).min(), -1e-10 * gram.trace)
        self.assertTrue(np.all(gram.diagonal <= sum_reciprocal_primes(11, 3000, spec.table()) + 1e-12))

    def test_expanded_form_identity(self):
        rng = np.random.default_rng(5)
        spec = SumSpec(13, 2000, 1.0)
        chars, shifts, cutoffs = random_configuration(rng, 13, spec, 6)
        gram = gram_matrix(build_delta(chars, shifts, cutoffs, spec))
        for _ in range(20):
            b = rng.standard_normal(6)
            direct = gram.quadratic_form(b)
            self.assertAlmostEqual(direct, gram.expanded_form(b), delta=1e-12 * max(1.0, abs(direct)))

    def test_synthetic_rows(self):
        gram = gram_matrix(SyntheticDelta(np.array([[1.0, 0.0], [0.0, 2.0]])))
        np.testing.assert_array_equal(gram.entries, np.diag([1.0, 4.0]))

    @tag("slow")
    def test_expanded_form_identity_over_many_configurations(self):
        rng = np.random.default_rng(2024)
        for index in range(100):
            D = (5, 7, 11, 13)[index % 4]
            spec = SumSpec(D, 10**4, 1.0)
            k = int(rng.integers(2, len(character_group(D)) + 1))
            chars, shifts, cutoffs = random_configuration(rng, D, spec, k)
            gram = gram_matrix(build_delta(chars, shifts, cutoffs, spec))
            for _ in range(100):
                b = rng.standard_normal(k)
                direct = gram.quadratic_form(b)
                self.assertAlmostEqual(direct, gram.expanded_form(b), delta=1e-12 * max(1.0, abs(direct)))


class CrossTermTests(SimpleTestCase):
    def test_quadratic_product(self):
        spec = SumSpec(5, 20, 1.0)
        group = character_group(5)
        self.assertTrue((group[1] * group[3].conjugate()) == group[2])
        ones = CoefficientVector.ones(spec.table(), 5, 20)
        expected = char_prime_sum(group[2], ones, 5, 20, 1).real
        self.assertAlmostEqual(cross_term(group[1], group[3], 0.4, 0.4, 20, spec), expected, places=15)

    def test_empty_range(self):
        spec = SumSpec(7, 100, 1.0)
        group = character_group(7)
        self.assertEqual(cross_term(group[1], group[2], 0.0, 1.0, 10, spec), 0.0)

    def test_symmetry(self):
        spec = SumSpec(7, 3000, 1.0)
        group = character_group(7)
        for j, ell in ((1, 2), (0, 5), (3, 4)):
            first = cross_term(group[j], group[ell], 1.3, -0.6, 2500, spec)
            mirrored = cross_term(group[ell], group[j], -1.3, 0.6, 2500, spec)
            self.assertAlmostEqual(first, mirrored, places=12)

    def test_matches_gram_entry(self):
        spec = SumSpec(7, 1000, 1.0)
        group = character_group(7)
        gram = gram_matrix(build_delta([group[1], group[4]], [0.5, -2.0], [800, 600], spec))
        self.assertAlmostEqual(cross_term(group[1], group[4], 0.5, -2.0, 600, spec), gram.entries[0, 1].real, places=12)

    def test_equal_characters(self):
        spec = SumSpec(5, 100, 1.0)
        chi = character_group(5)[1]
        with self.assertRaises(DomainError):
            cross_term(chi, chi, 0.0, 1.0, 50, spec)


class EstimateC1Tests(SimpleTestCase):
    def test_needs_two_characters(self):
        spec = SumSpec(5, 100, 1.0)
        with self.assertRaises(DomainError):
            estimate_c1(5, spec, character_group(5)[:1])
        with self.assertRaises(DomainError):
            estimate_c1(7, spec, character_group(5))

    def test_clamped_at_zero_without_primes(self):
        spec = SumSpec(5, 5, 1.0)
        self.assertEqual(estimate_c1(5, spec, select_characters(5, "non-principal")), 0.0)

    def test_product_characters_are_deduplicated(self):
        products = product_characters(select_characters(5, "non-principal"))
        self.assertEqual(len(products), 2)
        self.assertFalse(any(psi.is_principal for psi in products))

    def test_equals_scan_over_products(self):
        spec = SumSpec(5, 10**4, 1.0)
        chars = select_characters(5, "non-principal")
        scans = [
            lemma_sup_scan(psi, spec, [5], None, t_max=2 * spec.t_max)
            for psi in (chars[0] * chars[1].conjugate(), chars[0] * chars[2].conjugate(), chars[1] * chars[2].conjugate())
        ]
        expected = max(0.0, max(scan.empirical_max for scan in scans))
        self.assertAlmostEqual(estimate_c1(5, spec, chars), expected, places=12)

    def test_refined_grid_never_lowers_the_estimate(self):
        spec = SumSpec(7, 2000, 1.0)
        chars = select_characters(7, [1, 2, 3])
        coarse = scan_cross_constant(spec, chars, divisor=8, refine=False).c1_hat
        fine = scan_cross_constant(spec, chars, divisor=16, refine=False).c1_hat
        self.assertGreaterEqual(fine, coarse - 1e-12)


class TopEigenpairTests(SimpleTestCase):
    def test_one_by_one(self):
        pair = top_eigenpair(np.array([[0.75]]))
        self.assertAlmostEqual(pair.value, 0.75, places=15)
        np.testing.assert_allclose(pair.vector, [1.0], atol=1e-15)

    def test_diagonal(self):
        pair = top_eigenpair(np.diag([1.0, 4.0]))
        self.assertAlmostEqual(pair.value, 4.0, places=9)
        np.testing.assert_allclose(np.abs(pair.vector), [0.0, 1.0], atol=1e-6)

    def test_random_hermitian_against_eigvalsh(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            A = rng.standard_normal((6, 9)) + 1j * rng.standard_normal((6, 9))
            M = A @ A.conj().T
            pair = top_eigenpair(M, seed=3)
            expected = np.linalg.eigvalsh(M).max()
            self.assertLessEqual(abs(pair.value - expected), 1e-8 * expected)
            self.assertAlmostEqual(np.linalg.norm(pair.vector), 1.0, places=12)

    def test_phase_is_normalised(self):
        rng = np.random.default_rng(9)
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        vector = top_eigenpair(A @ A.conj().T).vector
        pivot = int(np.argmax(np.abs(vector)))
        self.assertEqual(vector[pivot].imag, 0.0)
        self.assertGreater(vector[pivot].real, 0.0)

    def test_pivot_is_exactly_real_across_seeds(self):
        rng = np.random.default_rng(31)
        for seed in range(50):
            A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            vector = top_eigenpair(A @ A.conj().T, seed=seed).vector
            pivot = int(np.argmax(np.abs(vector)))
            self.assertEqual(vector[pivot].imag, 0.0, seed)
            self.assertAlmostEqual(vector[pivot].real, abs(vector[pivot]), places=15)

    def test_rejects_bad_input(self):
        with self.assertRaises(DomainError):
            top_eigenpair(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with self.assertRaises(DomainError):
            top_eigenpair(np.ones((2, 3)))

    def test_zero_matrix(self):
        self.assertEqual(top_eigenpair(np.zeros((3, 3))).value, 0.0)


class DualityTests(SimpleTestCase):
    def test_synthetic_fixture(self):
        report = duality_check(SyntheticDelta(np.array([[1.0, 0.0], [0.0, 2.0]])), trials=50, seed=1)
        self.assertAlmostEqual(report.lambda_max, 4.0, places=9)
        self.assertAlmostEqual(report.lambda_dual, 4.0, places=9)
        self.assertTrue(report.passed)

    def test_single_row(self):
        spec = SumSpec(5, 200, 1.0)
        delta = build_delta([character_group(5)[1]], [0.25], [200], spec)
        report = duality_check(delta, trials=10, seed=4)
        L = sum_reciprocal_primes(5, 200, spec.table())
        self.assertAlmostEqual(report.lambda_max, L, places=12)
        self.assertAlmostEqual(report.lambda_dual, L, places=12)

    def test_character_rows(self):
        spec = SumSpec(5, 10**4, 1.0)
        h = t_spacing(10**4)
        delta = build_delta(select_characters(5, "non-principal"), [0.0, 3 * h, -5 * h], [10**4, 5000, 8000], spec)
        report = duality_check(delta, trials=100, seed=7)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.max_trial_ratio, 1.0 + 1e-9)
        self.assertAlmostEqual(report.pullback_ratio, 1.0, delta=1e-8)
        self.assertEqual(report.seed, 7)

    def test_rejects_zero_trials(self):
        with self.assertRaises(DomainError):
            duality_check(SyntheticDelta(np.eye(2)), trials=0, seed=0)

    def test_selftest_small(self):
        report = duality_selftest(seed=3, matrices=25, probes=200)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.fixture_lambda, 4.0, places=9)

    @tag("slow")
    def test_selftest_full(self):
        report = duality_selftest(seed=2024, matrices=500, probes=1000)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.worst_probe_excess, 1e-6)
        self.assertLessEqual(report.worst_pullback_gap, 1e-8)


class FourWaySplitTests(SimpleTestCase):
    def test_single_entry(self):
        split = four_way_split([3 - 4j])
        self.assertEqual([complex(part[0]) for part in split.parts], [3, 0, 0, -4j])

    def test_nonnegative_real(self):
        b = np.array([0.5, 2.0, 0.0])
        split = four_way_split(b)
        np.testing.assert_array_equal(split.parts[0], b)
        for part in split.parts[1:]:
            self.assertFalse(np.any(part))

    def test_parts_reassemble(self):
        rng = np.random.default_rng(10)
        b = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        split = four_way_split(b)
        np.testing.assert_array_equal(split.total(), b)
        squares = sum(m**2 for m in split.magnitudes)
        np.testing.assert_allclose(squares, np.abs(b) ** 2, rtol=1e-14)
        for phase, part, magnitude in zip(split.phases, split.parts, split.magnitudes):
            np.testing.assert_allclose(part, np.exp(1j * phase) * magnitude, atol=1e-15)


class BoundChainTests(SimpleTestCase):
    def _grid_configuration(self, D, x):
        spec = SumSpec(D, x, 1.0)
        h = t_spacing(x)
        chars = select_characters(D, "non-principal")
        shifts = [m * h for m in (0, 3, -7, 11, 2, -4, 9, 5, -1, 6, -8, 12)[: len(chars)]]
        cutoffs = [x - 37 * j for j in range(len(chars))]
        return spec, chars, shifts, cutoffs

    def test_real_and_four_way_bounds(self):
        rng = np.random.default_rng(31)
        spec, chars, shifts, cutoffs = self._grid_configuration(7, 4000)
        estimate = scan_cross_constant(spec, chars)
        gram = gram_matrix(build_delta(chars, shifts, cutoffs, spec))
        for _ in range(30):
            b = np.abs(rng.standard_normal(len(chars)))
            self.assertTrue(real_coefficient_bound(gram, b, estimate.L, estimate.c1_hat).holds)
            z = rng.standard_normal(len(chars)) + 1j * rng.standard_normal(len(chars))
            split_check, total_check = four_way_bound(gram, z, estimate.L, estimate.c1_hat)
            self.assertTrue(split_check.holds)
            self.assertTrue(total_check.holds)

    @tag("slow")
    def test_bounds_on_acceptance_grid(self):
        rng = np.random.default_rng(77)
        for D in (5, 7, 11, 13):
            for x in (10**3, 10**4, 10**5):
                spec, chars, shifts, cutoffs = self._grid_configuration(D, x)
                estimate = scan_cross_constant(spec, chars)
                gram = gram_matrix(build_delta(chars, shifts, cutoffs, spec))
                for _ in range(100):
                    b = np.abs(rng.standard_normal(len(chars)))
                    self.assertTrue(real_coefficient_bound(gram, b, estimate.L, estimate.c1_hat).holds)
                    z = rng.standard_normal(len(chars)) + 1j * rng.standard_normal(len(chars))
                    self.assertTrue(all(check.holds for check in four_way_bound(gram, z, estimate.L, estimate.c1_hat)))


class VerifyTheoremTests(SimpleTestCase):
    def test_principal_mod_two(self):
        spec = SumSpec(2, 10, 1.0)
        a = CoefficientVector.ones(spec.table(), 2, 10)
        report = verify_theorem(a, character_group(2), spec)
        L = 1 / 3 + 1 / 5 + 1 / 7
        self.assertAlmostEqual(report.lhs, L**2, places=14)
        self.assertAlmostEqual(report.rhs, 4 * L**2, places=14)
        self.assertAlmostEqual(report.ratio, 0.25, places=12)
        self.assertAlmostEqual(report.lambda_max, L, places=14)
        self.assertTrue(report.passed)

    def test_single_prime_support(self):
        spec = SumSpec(5, 200, 1.0)
        a = CoefficientVector.from_mapping(spec.table(), 5, 200, {101: 1.0})
        chars = select_characters(5, "all")
        report = verify_theorem(a, chars, spec, c=0.5)
        L = sum_reciprocal_primes(5, 200, spec.table())
        self.assertAlmostEqual(report.lhs, len(chars) / 101**2, places=15)
        self.assertAlmostEqual(report.rhs, (4 * L + 3 * 0.5) / 101, places=14)
        self.assertTrue(report.passed)

    def test_rhs_grows_with_x_for_unit_coefficients(self):
        chars = select_characters(7, [1, 2, 3])
        previous = None
        for x in (200, 500, 1000, 2000, 4000, 8000):
            spec = SumSpec(7, x, 1.0)
            report = verify_theorem(CoefficientVector.ones(spec.table(), 7, x), chars, spec, c=1.0)
            if previous is not None:
                self.assertGreaterEqual(report.L, previous.L, x)
                self.assertGreaterEqual(report.rhs, previous.rhs, x)
            previous = report

    def test_homogeneity(self):
        spec = SumSpec(7, 2000, 1.0)
        a = CoefficientVector.random_complex(spec.table(), 7, 2000, np.random.default_rng(1))
        chars = select_characters(7, [1, 2, 5])
        base = verify_theorem(a, chars, spec, c=1.0)
        scaled = verify_theorem(a.scaled(2.0), chars, spec, c=1.0)
        self.assertAlmostEqual(scaled.lhs, 4 * base.lhs, delta=1e-12 * scaled.lhs)
        self.assertAlmostEqual(scaled.rhs, 4 * base.rhs, delta=1e-12 * scaled.rhs)
        self.assertAlmostEqual(scaled.ratio, base.ratio, places=12)

    def test_rejections(self):
        spec = SumSpec(5, 100, 1.0)
        chars = character_group(5)
        ones = CoefficientVector.ones(spec.table(), 5, 100)
        with self.assertRaises(DomainError):
            verify_theorem(ones, [chars[1], chars[1]], spec, c=1.0)
        with self.assertRaises(DomainError):
            verify_theorem(CoefficientVector.from_mapping(spec.table(), 5, 100, {}), chars, spec, c=1.0)
        with self.assertRaises(DomainError):
            verify_theorem(ones, chars, spec, c=-1.0)

    def test_default_constant(self):
        spec = SumSpec(5, 10**4, 1.0)
        chars = select_characters(5, "non-principal")
        a = CoefficientVector.ones(spec.table(), 5, 10**4)
        report = verify_theorem(a, chars, spec, seed=0)
        self.assertAlmostEqual(report.c_used, 4 * report.c1_hat, places=15)
        self.assertAlmostEqual(report.rhs_dual_display, (4 * report.L + 3 * report.c_used) * report.weighted_norm, places=10)
        self.assertTrue(report.passed)
        self.assertEqual(len(report.witnesses), 3)

    def test_random_draws(self):
        spec = SumSpec(5, 10**4, 1.0)
        chars = select_characters(5, "non-principal")
        c1_hat = estimate_c1(5, spec, chars)
        for seed in range(2):
            a = CoefficientVector.random_complex(spec.table(), 5, 10**4, np.random.default_rng(seed))
            report = verify_theorem(a, chars, spec, seed=seed, c1_hat=c1_hat)
            self.assertTrue(report.passed)
            self.assertLessEqual(report.ratio, 1.0)

    def test_empty_prime_range(self):
        spec = SumSpec(7, 7, 1.0)
        a = CoefficientVector.ones(spec.table(), 7, 7)
        report = verify_theorem(a, select_characters(7, [1, 2]), spec, c=1.0)
        self.assertEqual((report.lhs, report.rhs, report.ratio), (0.0, 0.0, 0.0))
        self.assertIsNone(report.lambda_max)
        self.assertTrue(report.passed)

    @tag("slow")
    def test_acceptance_grid(self):
        for D in (5, 7, 11, 13):
            chars = select_characters(D, "non-principal")
            for x in (10**3, 10**4, 10**5):
                spec = SumSpec(D, x, 1.0)
                c1_hat = estimate_c1(D, spec, chars)
                for seed in range(100):
                    a = CoefficientVector.random_complex(spec.table(), D, x, np.random.default_rng(seed))
                    report = verify_theorem(a, chars, spec, seed=seed, c1_hat=c1_hat)
                    self.assertLessEqual(report.ratio, 1.0, (D, x, seed))


class VariantBoundTests(SimpleTestCase):
    def test_real_character_with_aligned_coefficients(self):
        spec = SumSpec(5, 3000, 1.0)
        quadratic = character_group(5)[2]
        primes = CoefficientVector.ones(spec.table(), 5, 3000).primes
        a = CoefficientVector.from_table(spec.table(), 5, 3000, quadratic.values_at(primes).real)
        full = verify_theorem(a, [quadratic], spec, c=0.0)
        variant = variant_re_bound(a, [quadratic], spec, c=0.0)
        self.assertAlmostEqual(variant.lhs, full.lhs, places=12)
        self.assertAlmostEqual(variant.rhs, 2 * full.L * full.weighted_norm, places=12)

    def test_conjugate_pair_is_kept(self):
        spec = SumSpec(5, 3000, 1.0)
        chi = character_group(5)[1]
        a = CoefficientVector.random_real(spec.table(), 5, 3000, np.random.default_rng(3))
        report = variant_re_bound(a, [chi, chi.conjugate()], spec, c=0.0)
        self.assertEqual(report.k, 2)
        self.assertAlmostEqual(report.witnesses[0].value, report.witnesses[1].value, places=7)

    def test_random_real_draws(self):
        spec = SumSpec(5, 10**4, 1.0)
        chars = select_characters(5, "non-principal")
        for seed in range(2):
            a = CoefficientVector.random_real(spec.table(), 5, 10**4, np.random.default_rng(seed))
            report = variant_re_bound(a, chars, spec, seed=seed)
            self.assertTrue(report.passed)
            self.assertEqual(report.variant, "re-variant")

    @tag("slow")
    def test_acceptance_grid(self):
        for D in (5, 7, 11, 13):
            chars = select_characters(D, "non-principal")
            for x in (10**3, 10**4, 10**5):
                spec = SumSpec(D, x, 1.0)
                c1_hat = default_c1(chars, spec, with_conjugates=True)
                for seed in range(100):
                    a = CoefficientVector.random_real(spec.table(), D, x, np.random.default_rng(seed))
                    report = variant_re_bound(a, chars, spec, seed=seed, c1_hat=c1_hat)
                    self.assertLessEqual(report.ratio, 1.0, (D, x, seed))


class ExtremalRatioTests(SimpleTestCase):
    def test_single_row(self):
        spec = SumSpec(5, 10**4, 1.0)
        report = extremal_ratio([character_group(5)[1]], spec, [0.0], [10**4])
        self.assertAlmostEqual(report.ratio_to_L, 1.0, places=12)
        self.assertEqual(report.c1_hat, 0.0)

    def test_duplicated_rows_double(self):
        spec = SumSpec(5, 10**4, 1.0)
        chi = character_group(5)[1]
        report = extremal_ratio([chi, chi], spec, [0.0, 0.0], [10**4, 10**4], c1_hat=0.0, allow_duplicates=True)
        self.assertAlmostEqual(report.lambda_max, 2 * report.L, delta=1e-10)

    def test_near_orthogonal_rows(self):
        spec = SumSpec(7, 10**5, 1.0)
        chars = select_characters(7, "non-principal")
        report = extremal_ratio(chars, spec, [0.0] * len(chars), [10**5] * len(chars))
        self.assertGreaterEqual(report.lambda_max, report.lambda_without_cross_terms * (1 - 1e-12))
        self.assertGreaterEqual(report.ratio_to_L, report.max_diagonal_ratio * (1 - 1e-12))
        gram = gram_matrix(build_delta(chars, [0.0] * len(chars), [10**5] * len(chars), spec))
        off_diagonal = np.abs(gram.entries - np.diag(np.diag(gram.entries))).sum(axis=1).max()
        self.assertLessEqual(report.lambda_max, report.lambda_without_cross_terms + off_diagonal + 1e-12)
        pullback_norm = np.linalg.norm(report.pullback_values)
        self.assertAlmostEqual(pullback_norm, 1.0, places=12)

    @tag("slow")
    def test_acceptance_grid_sanity(self):
        for D in (5, 7, 11, 13):
            chars = select_characters(D, "non-principal")
            for x in (10**3, 10**4, 10**5):
                spec = SumSpec(D, x, 1.0)
                h = t_spacing(x)
                report = extremal_ratio(chars, spec, [j * h for j in range(len(chars))], [x] * len(chars))
                self.assertGreaterEqual(report.ratio_to_L, report.max_diagonal_ratio * (1 - 1e-12))
