from __future__ import annotations

import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitygate.hilbert import (
    SystemLayout,
    annihilation_op,
    basis_state,
    build_space,
    check_density_matrix,
    check_state_vector,
    embed,
    is_hermitian,
    product_labels,
    transition_op,
)


def dense_embed(local: np.ndarray, axis: int, dims: tuple[int, ...]) -> np.ndarray:
    """Independent Kronecker oracle built from dense numpy factors."""
    out = np.eye(1)
    for i, d in enumerate(dims):
        out = np.kron(out, local if i == axis else np.eye(d))
    return out


class TestLayout:
    @pytest.mark.parametrize(
        "n, k, nmax, dim",
        [(3, 3, 1, 648), (3, 3, 2, 2187), (2, 1, 1, 54), (4, 4, 1, 3**5 * 2**4)],
    )
    def test_total_dimension(self, n, k, nmax, dim):
        layout = SystemLayout(n, k, nmax)
        assert layout.total_dim == dim
        assert build_space(layout).total_dim == dim

    def test_canonical_order(self):
        layout = SystemLayout(3)
        assert layout.subsystems == ("q1", "q2", "q3", "a", "c1", "c2", "c3")
        assert layout.dims == (3, 3, 3, 3, 2, 2, 2)
        assert layout.ancilla_present

    def test_strides_are_row_major(self):
        layout = SystemLayout(2, 1, 2)
        assert layout.strides == (27, 9, 3, 1)

    @pytest.mark.parametrize("kwargs", [dict(work_qutrit_count=1), dict(work_qutrit_count=3, cavity_count=2),
                                        dict(work_qutrit_count=3, photon_cutoff=0)])
    def test_rejects_bad_layouts(self, kwargs):
        with pytest.raises(ValueError):
            SystemLayout(**kwargs)

    def test_unknown_subsystem(self):
        with pytest.raises(KeyError):
            SystemLayout(2).axis("c7")

    def test_home_cavity(self):
        assert SystemLayout(3).home_cavity(2) == 2
        assert SystemLayout(3, 1).home_cavity(2) == 1

    @given(st.integers(0, 53))
    def test_index_labels_roundtrip(self, i):
        layout = SystemLayout(2, 1, 1)
        assert layout.index(layout.labels(i)) == i


class TestLocalOperators:
    def test_transition_op_single_entry(self):
        op = transition_op(1, 2).toarray()
        assert op[1, 2] == 1 and np.count_nonzero(op) == 1

    @pytest.mark.parametrize("i, j", list(itertools.product(range(3), repeat=2)))
    def test_transition_adjoint(self, i, j):
        assert np.array_equal(transition_op(i, j).conj().T.toarray(), transition_op(j, i).toarray())

    @pytest.mark.parametrize("i, j", [(3, 0), (-1, 1)])
    def test_transition_rejects_levels(self, i, j):
        with pytest.raises(ValueError):
            transition_op(i, j)

    def test_annihilation_entries(self):
        a = annihilation_op(2).toarray()
        assert a[0, 1] == 1 and a[1, 2] == pytest.approx(np.sqrt(2))
        assert np.allclose(np.diag(a.conj().T @ a), [0, 1, 2])

    def test_annihilation_rejects_zero_cutoff(self):
        with pytest.raises(ValueError):
            annihilation_op(0)


class TestEmbed:
    def test_identity_embeds_to_identity(self, layout54):
        out = embed(sp.identity(3), "q2", layout54)
        assert (out != sp.identity(54)).nnz == 0

    @pytest.mark.parametrize("sub", ["q1", "q2", "a", "c1"])
    def test_matches_dense_kron_oracle(self, layout54, sub):
        rng = np.random.default_rng(7)
        d = layout54.local_dim(sub)
        local = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        ours = embed(local, sub, layout54).toarray()
        assert np.allclose(ours, dense_embed(local, layout54.axis(sub), layout54.dims), atol=1e-14)

    def test_nnz_scales_with_complement(self, layout54):
        out = embed(transition_op(0, 1), "q1", layout54)
        assert out.nnz == 1 * 54 // 3

    def test_disjoint_supports_commute(self, layout54):
        a = embed(transition_op(0, 1), "q1", layout54)
        b = embed(annihilation_op(1), "c1", layout54)
        assert abs(a @ b - b @ a).max() == 0

    def test_spectrum_is_replicated(self, layout54):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = m + m.conj().T
        full = np.linalg.eigvalsh(embed(h, "a", layout54).toarray())
        expected = np.sort(np.repeat(np.linalg.eigvalsh(h), 54 // 3))
        assert np.allclose(full, expected, atol=1e-12)

    def test_rejects_dimension_mismatch(self, layout54):
        with pytest.raises(ValueError):
            embed(np.eye(2), "q1", layout54)

    def test_matrix_element_pattern(self, layout54):
        op = embed(transition_op(0, 1), "q1", layout54)
        src = basis_state(product_labels(layout54, (1, 0), 0, (0,)), layout54)
        dst = basis_state(product_labels(layout54, (0, 0), 0, (0,)), layout54)
        assert dst @ (op @ src) == 1


class TestStates:
    def test_ground_state_index(self, layout54):
        psi = basis_state((0, 0, 0, 0), layout54)
        assert psi[0] == 1 and np.linalg.norm(psi) == 1

    def test_basis_is_orthonormal_and_complete(self, layout54):
        vecs = np.array([basis_state(layout54.labels(i), layout54) for i in range(54)])
        assert np.array_equal(vecs @ vecs.conj().T, np.eye(54))

    def test_label_out_of_range(self, layout54):
        with pytest.raises(ValueError):
            basis_state((0, 0, 3, 0), layout54)

    def test_state_vector_check(self, layout54):
        with pytest.raises(ValueError):
            check_state_vector(2 * basis_state((0, 0, 0, 0), layout54), layout54)

    @settings(max_examples=25)
    @given(st.integers(0, 2**31 - 1))
    def test_density_check_accepts_random_states(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        check_density_matrix(rho, check_psd=True)

    def test_density_check_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            check_density_matrix(np.eye(3) / 2)

    def test_density_check_rejects_negative(self):
        rho = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ValueError, match="negative"):
            check_density_matrix(rho, check_psd=True)

    def test_is_hermitian(self):
        assert is_hermitian(sp.csr_matrix(np.array([[0, 1j], [-1j, 0]])))
        assert not is_hermitian(np.array([[0, 1], [0, 0]]))
