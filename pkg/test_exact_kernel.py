"""
Test script for the exact linear-algebra kernel
Usage: pytest test_exact_kernel.py  (or: python test_exact_kernel.py)
"""

import pytest

from microlocal.errors import NotSymmetric, ShapeMismatch, Singular
from microlocal.exact_kernel import (
    ExactMatrix,
    LinearSystem,
    Term,
    block_diag,
    congruence_signature,
    determinant,
    hstack,
    identity,
    intertwiner_system,
    invert,
    kron,
    matrix,
    rank,
    scalar,
    solve_homogeneous,
    vstack,
    zeros,
)

# Sample matrices with known rank
SAMPLE_MATRICES = {
    "identity_3": (identity(3), 3),
    "rank_one": (matrix([[1, 2], [2, 4]]), 1),
    "gaussian": (matrix([[(0, 1), 1], [1, (0, -1)]]), 1),
    "rational": (matrix([["1/2", "1/3"], ["1/4", "1/5"]]), 2),
    "zero_block": (zeros(2, 3), 0),
}

# Symmetric forms with known (positive, negative, null)
SAMPLE_FORMS = {
    "definite": (matrix([[2, 0], [0, 3]]), (2, 0, 0)),
    "hyperbolic": (matrix([[0, 1], [1, 0]]), (1, 1, 0)),
    "degenerate": (matrix([[1, 1], [1, 1]]), (1, 0, 1)),
    "mixed": (matrix([[1, 2, 0], [2, 1, 0], [0, 0, 0]]), (1, 1, 1)),
    "zero_diagonal": (matrix([[0, 1, 1], [1, 0, 1], [1, 1, 0]]), (1, 2, 0)),
}


@pytest.mark.parametrize("name", list(SAMPLE_MATRICES))
def test_rank(name):
    m, expected = SAMPLE_MATRICES[name]
    assert rank(m) == expected


def test_invert_round_trip():
    m = matrix([[2, 1], [(0, 1), 1]])
    inverse = invert(m)
    assert m @ inverse == identity(2)
    assert inverse @ m == identity(2)


def test_invert_singular_reports_rank():
    with pytest.raises(Singular) as exc:
        invert(matrix([[1, 2], [2, 4]]))
    assert exc.value.witness == {"size": 2, "rank": 1}
    assert exc.value.kind == "violation"


def test_invert_non_square():
    with pytest.raises(ShapeMismatch):
        invert(zeros(2, 3))


def test_determinant_is_exact():
    assert determinant(matrix([["1/2", 0], [0, "2/3"]])) == scalar("1/3")


def test_product_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        zeros(2, 3) @ zeros(2, 3)


def test_arithmetic_over_gaussian_rationals():
    a = matrix([[1, (0, 1)], ["1/2", 0]])
    b = matrix([[2, 0], [1, -1]])
    assert a @ b == matrix([[(2, 1), (0, -1)], [1, 0]])
    assert a + b - b == a
    assert -a + a == zeros(2, 2)
    assert a.T == matrix([[1, "1/2"], [(0, 1), 0]])
    assert a.scale((0, 1)) == matrix([[(0, 1), -1], [(0, "1/2"), 0]])
    assert a.scale(0).is_zero()


def test_products_through_empty_dimensions():
    assert zeros(2, 0) @ zeros(0, 3) == zeros(2, 3)
    assert zeros(0, 2).T == zeros(2, 0)
    assert hstack(zeros(2, 0), identity(2), zeros(2, 0)) == identity(2)
    assert vstack(zeros(0, 1), matrix([[5]])) == matrix([[5]])
    assert kron(zeros(0, 2), identity(2)) == zeros(0, 4)


def test_block_diag_and_kron():
    a = matrix([[1, 2]])
    b = matrix([[3], [4]])
    assert block_diag(a, b) == matrix([[1, 2, 0], [0, 0, 3], [0, 0, 4]])
    assert block_diag(zeros(0, 1), a) == matrix([[0, 1, 2]])
    assert kron(a, b) == matrix([[3, 6], [4, 8]])
    assert kron(identity(2), matrix([[2]])) == identity(2).scale(2)


def test_domain_round_trip():
    m = matrix([["1/3", (1, -2)], [0, 7]])
    assert ExactMatrix.from_domain(m.domain) == m
    assert m.domain.shape == (2, 2)


def test_floats_are_rejected():
    with pytest.raises(ValueError):
        scalar(complex(1, 1))


def test_unconstrained_system_is_whole_space():
    space = solve_homogeneous(LinearSystem([(2, 2)]))
    assert space.dimension == 4
    assert space.ambient_dim == 4


def test_commutant_dimension():
    # Matrices commuting with diag(1, 2) are diagonal.
    a = matrix([[1, 0], [0, 2]])
    space = solve_homogeneous(intertwiner_system(2, 2, [(a, a)]))
    assert space.dimension == 2
    for (x,) in space.block_basis():
        assert x @ a == a @ x


def test_nullity_matches_rank():
    system = LinearSystem([(1, 2), (1, 1)])
    system.add_equation([
        Term(0, identity(1), matrix([[1], [1]])),
        Term(1, identity(1), identity(1).scale(-1)),
    ])
    space = system.solve()
    assert space.dimension == system.ambient_dim - rank(system.matrix())
    for x0, x1 in space.block_basis():
        assert x0 @ matrix([[1], [1]]) == x1


def test_solution_contains_and_element():
    space = solve_homogeneous(intertwiner_system(1, 1, [(identity(1), identity(1))]))
    vector = space.element([scalar(5)])
    assert space.contains(vector)
    with pytest.raises(ShapeMismatch):
        space.element([])


def test_bad_term_shape():
    system = LinearSystem([(2, 2)])
    with pytest.raises(ShapeMismatch):
        system.add_equation([Term(0, identity(3), identity(2))])


@pytest.mark.parametrize("name", list(SAMPLE_FORMS))
def test_congruence_signature(name):
    form, expected = SAMPLE_FORMS[name]
    report = congruence_signature(form)
    assert report.as_tuple() == expected
    p = report.transform
    diagonal = p.T @ form @ p
    for i in range(form.rows):
        for j in range(form.cols):
            assert diagonal[i, j] == (report.diagonal[i] if i == j else scalar(0))


def test_negative_basis_is_negative_definite():
    form = matrix([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    report = congruence_signature(form)
    basis = report.negative_basis()
    assert basis.cols == report.negative
    restricted = congruence_signature(basis.T @ form @ basis)
    assert restricted.as_tuple() == (0, report.negative, 0)


def test_signature_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        congruence_signature(matrix([[0, 1], [0, 0]]))
    with pytest.raises(NotSymmetric):
        congruence_signature(matrix([[(0, 1)]]))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
