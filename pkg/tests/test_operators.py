import math

import numpy as np
import pytest

from trace_sketch.operators import (
    MatrixMarketError,
    PolynomialOfOperator,
    SparseSymmetricMatrix,
    exact_norms,
    from_dense,
    gen_lowrank,
    gen_random_spd,
    gen_tightness_gaussian,
    gen_tightness_rademacher,
    load_matrix_market,
    symmetry_defect,
    triangle_operator,
)
from trace_sketch.probes import ProbeKind, ProbeStream

from conftest import complete_graph, path_graph, random_symmetric, sparse_from_dense


def write(tmp_path, text, name="m.mtx"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestMatrixMarket:
    def test_small_symmetric_file(self, tmp_path):
        path = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "% comment line\n"
            "2 2 3\n"
            "1 1 2.0\n"
            "2 1 1.0\n"
            "2 2 2.0\n",
        )
        m = load_matrix_market(path)
        assert m.dimension == 2
        assert m.nnz_lower == 3
        assert np.allclose(m.to_dense(), [[2.0, 1.0], [1.0, 2.0]])

    def test_empty_body_is_zero_operator(self, tmp_path):
        path = write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n3 3 0\n")
        m = load_matrix_market(path)
        assert m.dimension == 3
        assert np.allclose(m.to_dense(), np.zeros((3, 3)))

    def test_zero_row_index_rejected_with_line_number(self, tmp_path):
        path = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n0 1 5.0\n",
        )
        with pytest.raises(MatrixMarketError, match="1-based") as exc:
            load_matrix_market(path)
        assert exc.value.line_number == 3

    def test_non_symmetric_header_rejected(self, tmp_path):
        path = write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 0\n")
        with pytest.raises(MatrixMarketError, match="symmetr"):
            load_matrix_market(path)

    def test_pattern_field_gets_unit_values(self, tmp_path):
        path = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 2\n",
        )
        m = load_matrix_market(path)
        assert m.to_dense()[1, 0] == 1.0
        assert m.to_dense()[0, 1] == 1.0

    def test_upper_triangle_entries_are_mirrored_and_duplicates_summed(self, tmp_path):
        path = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 2 3.0\n2 1 4.0\n",
        )
        m = load_matrix_market(path)
        assert m.to_dense()[1, 0] == 7.0

    def test_entry_count_mismatch_rejected(self, tmp_path):
        path = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n",
        )
        with pytest.raises(MatrixMarketError, match="expected 2 entries"):
            load_matrix_market(path)

    def test_malformed_value_carries_line_number(self, tmp_path):
        path = write(
            tmp_path,
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 abc\n",
        )
        with pytest.raises(MatrixMarketError) as exc:
            load_matrix_market(path)
        assert exc.value.line_number == 3


class TestSparseSymmetricMatrix:
    def test_out_of_range_index_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            SparseSymmetricMatrix(2, [2], [0], [1.0])

    def test_non_finite_value_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            SparseSymmetricMatrix(2, [0], [0], [math.inf])

    def test_matvec_matches_dense(self):
        a = random_symmetric(17, 0)
        m = sparse_from_dense(a)
        x = np.arange(17, dtype=float)
        assert np.allclose(m.apply(x), a @ x, atol=1e-12)
        assert abs(m.trace() - np.trace(a)) < 1e-12
        assert abs(m.frobenius_norm() - np.linalg.norm(a)) < 1e-12
        off = a - np.diag(np.diag(a))
        assert abs(m.offdiag_frobenius_norm() - np.linalg.norm(off)) < 1e-12


class TestTightnessGenerators:
    def test_gaussian_worst_case_n2_is_diag_plus_minus(self):
        op = gen_tightness_gaussian(2)
        assert np.allclose(op.apply(np.array([1.0, 0.0])), [1.0, 0.0])
        assert np.allclose(op.apply(np.array([0.0, 1.0])), [0.0, -1.0])
        assert op.exact_norms["trace"] == 0.0

    def test_gaussian_worst_case_frobenius(self):
        assert gen_tightness_gaussian(4).exact_norms["frobenius"] == 2.0

    def test_traceless_via_unit_basis_probing(self):
        from trace_sketch.estimator import estimate_trace

        op = gen_tightness_gaussian(6)
        rep = estimate_trace(op, ProbeStream(ProbeKind.UNIT_BASIS, 6, 0), 6)
        assert rep.estimate == pytest.approx(0.0, abs=1e-13)

    def test_odd_n_rejected(self):
        with pytest.raises(ValueError):
            gen_tightness_gaussian(5)
        with pytest.raises(ValueError):
            gen_tightness_rademacher(3)

    def test_rademacher_worst_case_n2_is_exchange(self):
        op = gen_tightness_rademacher(2)
        assert np.allclose(op.apply(np.array([1.0, 0.0])), [0.0, 1.0])
        # eigenvalues of the exchange matrix are +-1
        assert op.quadratic_form(np.array([1.0, 1.0]) / math.sqrt(2)) == pytest.approx(1.0)
        assert op.quadratic_form(np.array([1.0, -1.0]) / math.sqrt(2)) == pytest.approx(-1.0)

    def test_rademacher_worst_case_quadratic_form_n4(self):
        op = gen_tightness_rademacher(4)
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.standard_normal(4)
            assert op.quadratic_form(x) == pytest.approx(2 * (x[0] * x[3] + x[1] * x[2]))
        # hand oracle: all-ones Rademacher probe gives 2*(1+1) = 4
        assert op.quadratic_form(np.ones(4)) == pytest.approx(4.0)

    def test_generators_are_symmetric(self):
        for op in (gen_tightness_gaussian(8), gen_tightness_rademacher(8)):
            assert symmetry_defect(op) < 1e-12


class TestLowRank:
    def test_spsd_and_rank(self):
        m = gen_lowrank(300, seed=0)
        dense = m.to_dense()
        eigs = np.linalg.eigvalsh(dense)
        assert eigs.min() >= -1e-10
        assert np.sum(eigs > 1e-12 * eigs.max()) <= 300
        assert symmetry_defect(m.to_operator()) < 1e-12

    def test_shift_moves_diagonal(self):
        base = gen_lowrank(300, seed=1)
        shifted = gen_lowrank(300, seed=1, shift=0.5)
        assert shifted.trace() == pytest.approx(base.trace() + 150.0)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            gen_lowrank(100, seed=0)


class TestTriangleOperator:
    def test_k3_has_one_triangle(self, k3):
        from trace_sketch.estimator import estimate_diag_trace

        cube = triangle_operator(k3)
        assert estimate_diag_trace(cube) / 6.0 == pytest.approx(1.0, abs=1e-12)

    def test_path_graph_has_none(self):
        from trace_sketch.estimator import estimate_diag_trace

        cube = triangle_operator(path_graph(3))
        assert estimate_diag_trace(cube) == pytest.approx(0.0, abs=1e-12)

    def test_nonzero_diagonal_rejected(self):
        loop = SparseSymmetricMatrix(2, [0, 1], [0, 0], [1.0, 1.0])
        with pytest.raises(ValueError, match="diagonal"):
            triangle_operator(loop)

    def test_non_binary_entries_rejected(self):
        weighted = SparseSymmetricMatrix(2, [1], [0], [0.5])
        with pytest.raises(ValueError, match="0 or 1"):
            triangle_operator(weighted)


class TestPolynomialOfOperator:
    def test_cube_columns_match_dense_power(self):
        a = random_symmetric(40, 3)
        cube = PolynomialOfOperator(from_dense(a), 3)
        dense_cube = a @ a @ a
        for i in (0, 7, 39):
            e = np.zeros(40)
            e[i] = 1.0
            assert np.allclose(cube.apply(e), dense_cube[:, i], atol=1e-10)

    def test_bad_exponent(self):
        with pytest.raises(ValueError):
            PolynomialOfOperator(from_dense(np.eye(2)), 0)


class TestExactNorms:
    def test_identity(self):
        eye = sparse_from_dense(np.eye(10))
        norms = exact_norms(eye)
        assert norms["frobenius"] == pytest.approx(math.sqrt(10))
        assert norms["spectral"] == pytest.approx(1.0, abs=1e-8)
        assert norms["stable_rank"] == pytest.approx(10.0, rel=1e-6)
        assert norms["trace"] == pytest.approx(10.0)

    def test_rank_one_has_stable_rank_one(self):
        ones = sparse_from_dense(np.ones((5, 5)))
        assert exact_norms(ones)["stable_rank"] == pytest.approx(1.0, rel=1e-6)

    def test_tightness_matrix_has_full_stable_rank(self):
        d = np.diag([1.0] * 4 + [-1.0] * 4)
        assert exact_norms(sparse_from_dense(d))["stable_rank"] == pytest.approx(8.0, rel=1e-6)

    def test_stable_rank_within_bounds_on_random_matrices(self):
        for seed in range(4):
            m = sparse_from_dense(random_symmetric(23, seed))
            norms = exact_norms(m)
            assert 1.0 - 1e-9 <= norms["stable_rank"] <= 23 + 1e-9

    def test_dimension_guard(self):
        big = SparseSymmetricMatrix(5001, [0], [0], [1.0])
        with pytest.raises(ValueError, match="5000"):
            exact_norms(big)


class TestRandomSpd:
    def test_condition_number_is_exact(self):
        a = gen_random_spd(30, 50.0, seed=4)
        lam = np.linalg.eigvalsh(a)
        assert lam[-1] / lam[0] == pytest.approx(50.0, rel=1e-9)
        assert np.allclose(a, a.T)

    def test_loaded_and_generated_matrices_pass_symmetry_check(self):
        op = from_dense(random_symmetric(31, 9))
        assert symmetry_defect(op) < 1e-12


def test_from_dense_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        from_dense(np.array([[0.0, 1.0], [0.0, 0.0]]))
