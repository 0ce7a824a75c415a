"""
Test script for quivers, their Hom spaces and the vanishing-cycle functor
Usage: pytest test_quiver_core.py
"""

import random

import pytest

from microlocal.errors import CompositionMismatch, NotInvertible, PointCountMismatch, ShapeMismatch
from microlocal.exact_kernel import identity, invert, matrix, zeros
from microlocal.quiver_core import (
    Quiver,
    QuiverMorphism,
    compose,
    conjugate_quiver,
    direct_sum,
    find_isomorphism,
    hom_basis,
    identity_morphism,
    is_isomorphism,
    morphisms_of,
    validate_local_system,
    validate_quiver,
    vanishing_cycles,
    vanishing_cycles_map,
)
from microlocal.random_instances import random_element, random_invertible, random_quiver
from microlocal.serialization import decode_quiver, load_json

SAMPLE_A = decode_quiver(load_json("sample_inputs/quiver_a.json"))
SAMPLE_B = decode_quiver(load_json("sample_inputs/quiver_b.json"))

# (source, target) -> dim Hom
SAMPLE_HOM_DIMENSIONS = {
    ("a", "a"): 1,
    ("a", "b"): 0,
    ("b", "b"): 2,
}

SAMPLES = {"a": SAMPLE_A, "b": SAMPLE_B}


@pytest.mark.parametrize("pair", list(SAMPLE_HOM_DIMENSIONS))
def test_sample_hom_dimensions(pair):
    source, target = (SAMPLES[name] for name in pair)
    space = hom_basis(source, target)
    assert space.dimension == SAMPLE_HOM_DIMENSIONS[pair]
    for f in morphisms_of(space, source, target):
        assert f.check()


def test_sample_quivers_are_valid():
    validate_quiver(SAMPLE_A)
    validate_quiver(SAMPLE_B)


def test_non_invertible_diagonal():
    q = Quiver.from_maps([1, 2], {(1, 1): -identity(2)})
    with pytest.raises(NotInvertible) as exc:
        validate_quiver(q)
    assert exc.value.index == 2
    assert exc.value.witness == {"index": 2}


def test_map_shape_is_checked():
    q = Quiver((1, 1), ((zeros(1, 1), zeros(2, 1)), (zeros(1, 1), zeros(1, 1))))
    with pytest.raises(ShapeMismatch) as exc:
        validate_quiver(q)
    assert exc.value.witness == {"j": 1, "i": 2}


def test_point_count_mismatch():
    with pytest.raises(PointCountMismatch):
        hom_basis(SAMPLE_A, Quiver.zero([1]))


def test_zero_quiver_hom_is_everything():
    assert hom_basis(Quiver.zero([1, 2]), Quiver.zero([2, 1])).dimension == 2 + 2


@pytest.mark.parametrize("seed", [5, 11, 29])
def test_hom_is_additive(seed):
    rng = random.Random(seed)
    q1, q2, q3 = (random_quiver(rng, 2, 2) for _ in range(3))
    total = hom_basis(direct_sum(q1, q2), q3).dimension
    assert total == hom_basis(q1, q3).dimension + hom_basis(q2, q3).dimension


@pytest.mark.parametrize("seed", [5, 11, 29])
def test_conjugate_quiver_is_isomorphic(seed):
    rng = random.Random(seed)
    q = random_quiver(rng, 2, 2)
    changes = [random_invertible(rng, d) for d in q.dims]
    moved = conjugate_quiver(q, changes, [invert(p) for p in changes])
    f = QuiverMorphism(q, moved, tuple(changes))
    assert f.check()
    assert is_isomorphism(f)
    assert find_isomorphism(q, moved) is not None


def test_compose_checks_endpoints():
    with pytest.raises(CompositionMismatch):
        compose(identity_morphism(SAMPLE_A), identity_morphism(SAMPLE_B))


def test_vanishing_cycles_of_sample():
    ls = vanishing_cycles(SAMPLE_A)
    validate_local_system(ls)
    assert ls.monodromies == (matrix([[2]]), matrix([["1/2"]]))


@pytest.mark.parametrize("seed", [7, 13])
def test_vanishing_cycles_is_a_functor(seed):
    rng = random.Random(seed)
    q1, q2, q3 = (random_quiver(rng, 2, 2) for _ in range(3))
    f = QuiverMorphism(q1, q2, random_element(rng, hom_basis(q1, q2)))
    g = QuiverMorphism(q2, q3, random_element(rng, hom_basis(q2, q3)))
    assert vanishing_cycles_map(f).check()
    assert vanishing_cycles_map(compose(g, f)).components == tuple(
        a @ b for a, b in zip(vanishing_cycles_map(g).components, vanishing_cycles_map(f).components)
    )
    assert vanishing_cycles_map(identity_morphism(q1)).components == identity_morphism(q1).components


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
