"""
Test script for group actions on quivers and equivariant quivers
Usage: pytest test_equivariant.py
"""

import random

import pytest

from microlocal.equivariant import (
    ActionKernel,
    EquivariantQuiver,
    GroupPresentation,
    MapRef,
    Zero,
    apply_action,
    check_kernel,
    format_word,
    hom_equivariant,
    hom_equivariant_local_system,
    identity_kernel,
    is_equivariant_morphism,
    ls_functor,
    parse_expression,
    parse_word,
    restrict,
    structure_along_word,
    validate_equivariant,
    validate_equivariant_local_system,
    validate_presentation,
)
from microlocal.errors import (
    Diagram4Violation,
    KernelEvaluationError,
    PresentationMismatch,
    RelationViolation,
    ShapeMismatch,
    UnknownGenerator,
)
from microlocal.exact_kernel import identity, matrix
from microlocal.quiver_core import Quiver
from microlocal.random_instances import random_element, random_kernel, random_equivariant_quiver, regauge
from microlocal.serialization import decode_equivariant, decode_kernel, load_json

SAMPLE_A = decode_equivariant(load_json("sample_inputs/equivariant_a.json"))
SAMPLE_B = decode_equivariant(load_json("sample_inputs/equivariant_b.json"))
SWAP = decode_kernel(load_json("sample_inputs/kernel_swap.json"))

# An asymmetric quiver on two points, used to watch the relabeling
SAMPLE_LOPSIDED = Quiver.from_maps([1, 2], {
    (0, 0): matrix([[1]]),
    (1, 0): matrix([[1], [2]]),
    (1, 1): matrix([[0, 1], [0, 0]]),
})


def test_word_parsing():
    assert parse_word("s t^-1 s") == (("s", 1), ("t", -1), ("s", 1))
    assert parse_word("") == ()
    assert format_word(()) == "e"
    with pytest.raises(ValueError):
        parse_word("s^2")


def test_expression_parsing():
    assert parse_expression("m[2][1]") == MapRef(1, 0)
    assert parse_expression("zero[1][1]") == Zero(0, 0)
    with pytest.raises(ValueError):
        parse_expression({"pow": "m[1][1]"})


def test_permutation_action_relabels():
    moved = apply_action(SWAP, "s", SAMPLE_LOPSIDED)
    assert moved.dims == (2, 1)
    assert moved.map(0, 1) == SAMPLE_LOPSIDED.map(1, 0)
    assert moved.map(0, 0) == SAMPLE_LOPSIDED.map(1, 1)
    assert apply_action(SWAP, "s s", SAMPLE_LOPSIDED) == SAMPLE_LOPSIDED
    assert apply_action(SWAP, "s^-1 s", SAMPLE_LOPSIDED) == SAMPLE_LOPSIDED


def test_unknown_generator():
    with pytest.raises(UnknownGenerator):
        apply_action(SWAP, "t", SAMPLE_LOPSIDED)


def test_permutation_kernel_passes_gates():
    assert SWAP.is_permutation
    assert check_kernel(SWAP, [SAMPLE_LOPSIDED, SAMPLE_A.quiver]) == 2


def test_kernel_that_changes_the_diagonal():
    base = identity_kernel(1, ["t"])
    kernel = ActionKernel(base.presentation, programs={"t": {(0, 0): Zero(0, 0)}}, name="flatten")
    q = Quiver.from_maps([1], {(0, 0): matrix([[3]])})
    with pytest.raises(KernelEvaluationError) as exc:
        check_kernel(kernel, [q])
    assert exc.value.witness["gate"] == "diagonal"


def test_kernel_without_inverse_program():
    base = identity_kernel(1, ["t"])
    kernel = ActionKernel(base.presentation, programs={"t": {(0, 0): MapRef(0, 0)}})
    with pytest.raises(KernelEvaluationError):
        apply_action(kernel, "t^-1", Quiver.zero([1]))


def test_presentation_relation_must_fix_points():
    p = SWAP.presentation
    bad = GroupPresentation(p.n, p.generators, (parse_word("s"),), p.point_action)
    with pytest.raises(RelationViolation):
        validate_presentation(bad)


def test_sample_objects_are_valid():
    validate_equivariant(SAMPLE_A)
    validate_equivariant(SAMPLE_B)


def test_sample_hom_dimensions():
    assert hom_equivariant(SAMPLE_A, SAMPLE_A).dimension == 1
    assert hom_equivariant(SAMPLE_B, SAMPLE_B).dimension == 1
    assert hom_equivariant(SAMPLE_A, SAMPLE_B).dimension == 0
    assert hom_equivariant(SAMPLE_B, SAMPLE_A).dimension == 0


def test_structure_that_breaks_the_square():
    bad = EquivariantQuiver(SAMPLE_A.quiver, SAMPLE_A.kernel, ((matrix([[2]]), matrix([[1]])),))
    with pytest.raises(Diagram4Violation) as exc:
        validate_equivariant(bad)
    assert exc.value.witness == {"i": 2, "j": 1, "generator": "s"}


def test_structure_that_breaks_a_relation():
    bad = EquivariantQuiver(SAMPLE_B.quiver, SAMPLE_B.kernel, ((matrix([[-1]]), matrix([[1]])),))
    with pytest.raises(RelationViolation) as exc:
        validate_equivariant(bad)
    assert exc.value.witness["index"] == 1
    assert structure_along_word(bad, "s s")[0] == matrix([[-1]])


def test_structure_shape_is_checked():
    bad = EquivariantQuiver(SAMPLE_A.quiver, SAMPLE_A.kernel, ((identity(1),),))
    with pytest.raises(ShapeMismatch):
        validate_equivariant(bad)


def test_presentation_mismatch():
    other = identity_kernel(2, ["s"])
    y = EquivariantQuiver(SAMPLE_A.quiver, other, SAMPLE_A.structure)
    with pytest.raises(PresentationMismatch):
        hom_equivariant(SAMPLE_A, y)


@pytest.mark.parametrize("seed", [2, 8, 31, 64])
def test_random_families_are_valid_and_regauge_invariant(seed):
    rng = random.Random(seed)
    kernel = random_kernel(rng, rng.randint(1, 3), 2)
    x = random_equivariant_quiver(rng, kernel, 2)
    validate_equivariant(x)
    y = regauge(rng, x)
    validate_equivariant(y)
    space = hom_equivariant(x, y)
    assert space.dimension == hom_equivariant(x, x).dimension
    for components in space.block_basis():
        assert is_equivariant_morphism(x, y, components)


@pytest.mark.parametrize("seed", [4, 9])
def test_local_system_functor(seed):
    rng = random.Random(seed)
    kernel = random_kernel(rng, 2, 2)
    x = random_equivariant_quiver(rng, kernel, 2)
    a = ls_functor(x)
    validate_equivariant_local_system(a)
    components = random_element(rng, hom_equivariant(x, x))
    assert hom_equivariant_local_system(a, a).contains(
        hom_equivariant(x, x).flatten(components)
    )
    assert restrict(x) is x.quiver


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
