import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from core.services import qops
from core.services.qops import DensityMatrix, Operator

entries = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)
scalars = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@st.composite
def operators(draw, dim=None, max_dim=5):
    n = draw(st.integers(min_value=1, max_value=max_dim)) if dim is None else dim
    values = np.array(draw(st.lists(entries, min_size=2 * n * n, max_size=2 * n * n)))
    return Operator((values[: n * n] + 1j * values[n * n :]).reshape(n, n))


@st.composite
def density_matrices(draw, dim):
    m = draw(operators(dim=dim)).dense()
    positive = m @ m.conj().T + np.eye(dim)
    positive = 0.5 * (positive + positive.conj().T)
    return positive / np.trace(positive).real


class OperatorConstructionTests(SimpleTestCase):
    def test_destroy_has_sqrt_n_above_the_diagonal(self):
        a = qops.destroy(4)
        self.assertEqual(a.dim, 4)
        for n in range(1, 4):
            self.assertAlmostEqual(a.entry(n - 1, n).real, math.sqrt(n), places=15)
        self.assertEqual(a.entry(1, 0), 0)

    def test_destroy_rejects_single_level(self):
        with self.assertRaises(ValueError):
            qops.destroy(1)

    def test_create_is_adjoint_of_destroy(self):
        self.assertTrue(qops.create(5).equals(qops.destroy(5).dagger()))

    def test_number_operator_is_a_dagger_a(self):
        a = qops.destroy(6)
        self.assertTrue(qops.number(6).equals(a.dagger() @ a, atol=1e-14))

    def test_commutator_is_identity_below_truncation_edge(self):
        n_fock = 7
        comm = qops.commutator(qops.destroy(n_fock), qops.create(n_fock)).dense()
        np.testing.assert_allclose(np.diag(comm)[:-1], np.ones(n_fock - 1), atol=1e-14)
        self.assertAlmostEqual(comm[-1, -1].real, -(n_fock - 1), places=12)

    def test_atom_operators(self):
        sigma_minus, sigma_plus, sigma_z = qops.atom_ops()
        np.testing.assert_array_equal(sigma_z.dense(), np.diag([-1.0, 1.0]))
        np.testing.assert_array_equal((sigma_plus @ sigma_minus).dense(), np.diag([0.0, 1.0]))
        self.assertEqual(sigma_plus.label, "σ+")

    def test_representation_follows_dimension(self):
        self.assertEqual(qops.destroy(4).representation, "dense")
        self.assertEqual(qops.destroy(40).representation, "sparse")
        self.assertEqual(qops.kron(qops.identity(2), qops.destroy(10)).representation, "sparse")

    def test_power_zero_is_identity(self):
        self.assertTrue(qops.destroy(5).power(0).equals(qops.identity(5)))

    def test_non_finite_entries_rejected(self):
        with self.assertRaises(ValueError):
            Operator(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_non_square_rejected(self):
        with self.assertRaises(ValueError):
            Operator(np.zeros((2, 3)))

    def test_kron_dimension_guard(self):
        with self.assertRaises(OverflowError):
            qops.kron(qops.identity(300), qops.identity(300))


class OperatorAlgebraTests(SimpleTestCase):
    def test_destroy_on_two_levels(self):
        np.testing.assert_array_equal(qops.destroy(2).dense(), np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_identity_kron_identity(self):
        self.assertTrue(qops.kron(qops.identity(2), qops.identity(3)).equals(qops.identity(6)))

    @settings(max_examples=40, deadline=None)
    @given(operators())
    def test_dagger_is_an_involution(self, a):
        self.assertTrue(a.dagger().dagger().equals(a))
        self.assertTrue(qops.dagger(qops.dagger(a)).equals(a))

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_sparse_and_dense_matvec_agree(self, data):
        a = data.draw(operators(max_dim=6))
        amplitudes = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)
        vector = np.array(data.draw(st.lists(amplitudes, min_size=a.dim, max_size=a.dim)), dtype=np.complex128)
        sparse, dense = a.as_sparse(), a.as_dense()
        self.assertEqual((sparse.representation, dense.representation), ("sparse", "dense"))
        self.assertTrue(sparse.equals(dense))
        np.testing.assert_allclose(sparse.matvec(vector), dense.matvec(vector), rtol=0, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(operators(), operators(), operators())
    def test_kron_is_associative(self, a, b, c):
        left = qops.kron(qops.kron(a, b), c)
        right = qops.kron(a, qops.kron(b, c))
        self.assertTrue(left.equals(right, atol=1e-14))

    @settings(max_examples=30, deadline=None)
    @given(st.data())
    def test_kron_mixed_product(self, data):
        n = data.draw(st.integers(min_value=1, max_value=4))
        m = data.draw(st.integers(min_value=1, max_value=4))
        a, c = data.draw(operators(dim=n)), data.draw(operators(dim=n))
        b, d = data.draw(operators(dim=m)), data.draw(operators(dim=m))
        product = qops.kron(a, b) @ qops.kron(c, d)
        self.assertTrue(product.equals(qops.kron(a @ c, b @ d), atol=1e-12))

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_expect_is_linear(self, data):
        n = data.draw(st.integers(min_value=1, max_value=5))
        a, b = data.draw(operators(dim=n)), data.draw(operators(dim=n))
        alpha, beta = data.draw(scalars), data.draw(scalars)
        rho = data.draw(density_matrices(n))
        combined = qops.expect(alpha * a + beta * b, rho)
        expected = alpha * qops.expect(a, rho) + beta * qops.expect(b, rho)
        self.assertLess(abs(combined - expected), 1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_hermitian_expectation_is_real(self, data):
        n = data.draw(st.integers(min_value=1, max_value=6))
        m = data.draw(operators(dim=n)).dense()
        hermitian = Operator(0.5 * (m + m.conj().T))
        rho = data.draw(density_matrices(n))
        self.assertTrue(hermitian.is_hermitian())
        self.assertLess(abs(qops.expect(hermitian, rho).imag), 1e-12)
        self.assertLess(abs(qops.expect(hermitian.as_sparse(), rho).imag), 1e-12)


class ExpectationTests(SimpleTestCase):
    def test_number_expectation_on_product_state(self):
        n_fock = 5
        rho = qops.product_state(1, 3, n_fock)
        field_number = qops.kron(qops.identity(2), qops.number(n_fock))
        self.assertAlmostEqual(qops.expect(field_number, rho).real, 3.0, places=14)
        _, _, sigma_z = qops.atom_ops()
        self.assertAlmostEqual(qops.expect(qops.kron(sigma_z, qops.identity(n_fock)), rho).real, 1.0, places=14)

    def test_dimension_mismatch_raises(self):
        with self.assertRaises(ValueError):
            qops.expect(qops.number(4), qops.product_state(0, 0, 4))

    def test_imaginary_part_is_kept(self):
        rho = DensityMatrix(np.array([[0.5, 0.25j], [-0.25j, 0.5]]))
        sigma_minus, _, _ = qops.atom_ops()
        self.assertAlmostEqual(qops.expect(sigma_minus, rho), -0.25j)


class StateTests(SimpleTestCase):
    def test_thermal_atom_detailed_balance(self):
        rho = qops.thermal_atom_state(1.0)
        self.assertAlmostEqual(rho.populations()[1], 1.0 / 3.0, places=15)

    def test_thermal_populations_are_geometric(self):
        populations = qops.thermal_populations(30, 0.5)
        self.assertAlmostEqual(populations.sum(), 1.0, places=14)
        np.testing.assert_allclose(populations[1:] / populations[:-1], 1.0 / 3.0, rtol=1e-12)

    def test_zero_occupation_is_vacuum(self):
        populations = qops.thermal_populations(4, 0.0)
        np.testing.assert_array_equal(populations, [1.0, 0.0, 0.0, 0.0])

    def test_partial_trace_recovers_factors(self):
        atom = qops.thermal_atom_state(0.4)
        field = qops.thermal_field_state(6, 0.8)
        rho = qops.tensor_states(atom, field)
        np.testing.assert_allclose(qops.partial_trace(rho, "atom"), atom.data, atol=1e-15)
        np.testing.assert_allclose(qops.partial_trace(rho, "field"), field.data, atol=1e-15)
        with self.assertRaises(ValueError):
            qops.partial_trace(rho, "bath")

    def test_validate_rejects_bad_states(self):
        with self.assertRaises(ValueError):
            DensityMatrix(np.array([[0.5, 0.3], [0.0, 0.5]])).validate()
        with self.assertRaises(ValueError):
            DensityMatrix(np.diag([0.6, 0.6])).validate()
        with self.assertRaises(ValueError):
            DensityMatrix(np.diag([1.2, -0.2])).validate()
        qops.thermal_field_state(8, 1.0).validate()

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=0.0, max_value=5.0), st.integers(min_value=2, max_value=40))
    def test_thermal_field_states_are_valid(self, occupation, n_fock):
        qops.thermal_field_state(n_fock, occupation).validate(trace_tol=1e-12)
