"""
Test script for presented categories, fiber products and the embedding delta
Usage: pytest test_fiber_product.py
"""

import random

import pytest

from microlocal.categories import (
    check_equivalence,
    check_functor,
    compose_functors,
    conjugation_functor,
    constant_functor,
    identity_functor,
    local_system_functor,
    quiver_category,
    vanishing_cycles_functor,
)
from microlocal.errors import CategoryMismatch, LiftVerificationFailed, NotAnEquivalence
from microlocal.exact_kernel import identity, matrix
from microlocal.fiber_product import (
    FiberProductMorphism,
    FiberProductObject,
    build_fiber_product,
    delta,
    delta_functor,
    delta_morphism,
    delta_target_category,
    first_projection,
    full_faithfulness_check,
    lift_morphism,
    ore_square,
    second_projection,
)
from microlocal.equivariant import hom_equivariant, ls_functor
from microlocal.quiver_core import Quiver, hom_basis
from microlocal.random_instances import random_element, random_equivariant_pair
from microlocal.serialization import decode_equivariant, decode_fiber_morphism, load_json

SAMPLE_A = decode_equivariant(load_json("sample_inputs/equivariant_a.json"))
SAMPLE_B = decode_equivariant(load_json("sample_inputs/equivariant_b.json"))
SAMPLE_TAU = decode_fiber_morphism(load_json("sample_inputs/tau_a_a.json"))

SAMPLE_QUIVERS = [
    Quiver.from_maps([1, 2], {(1, 0): matrix([[1], [0]]), (1, 1): matrix([[0, 1], [0, 0]])}),
    Quiver.zero([1, 2]),
]

SAMPLE_CHANGES = [matrix([[2]]), matrix([[1, 1], [0, 1]])]


def test_delta_lands_in_the_fiber_product():
    fiber = delta_target_category(SAMPLE_A.kernel)
    obj = delta(SAMPLE_A)
    fiber.validate(obj)
    assert first_projection(fiber)(obj) == ls_functor(SAMPLE_A)
    assert second_projection(fiber)(obj) == SAMPLE_A.quiver


@pytest.mark.parametrize("pair", [(SAMPLE_A, SAMPLE_A), (SAMPLE_A, SAMPLE_B), (SAMPLE_B, SAMPLE_B)])
def test_sample_full_faithfulness(pair):
    report = full_faithfulness_check(*pair)
    assert report.equal
    assert report.to_dict()["equal"] is True


@pytest.mark.parametrize("seed", [1, 6, 42])
def test_random_full_faithfulness(seed):
    rng = random.Random(seed)
    x, y = random_equivariant_pair(rng, rng.randint(1, 3), 2, 2)
    assert full_faithfulness_check(x, y).equal


def test_delta_is_a_functor():
    functor = delta_functor(SAMPLE_A.kernel)
    assert check_functor(functor, [SAMPLE_A, SAMPLE_B]) == []


def test_fiber_product_over_identities_is_the_diagonal():
    category = quiver_category()
    ident = identity_functor(category)
    fiber = build_fiber_product(category, category, category, ident, ident)
    q = SAMPLE_QUIVERS[0]
    obj = FiberProductObject(q, q, (identity(1), identity(2)))
    assert fiber.hom_space(obj, obj).dimension == hom_basis(q, q).dimension
    with pytest.raises(CategoryMismatch):
        build_fiber_product(category, quiver_category(), category, ident, ident)


def test_lift_sample_morphism():
    sigma = lift_morphism(SAMPLE_TAU, SAMPLE_A, SAMPLE_A)
    assert sigma == (matrix([[3]]), matrix([[3]]))


@pytest.mark.parametrize("seed", [3, 12])
def test_lift_round_trip(seed):
    rng = random.Random(seed)
    x, y = random_equivariant_pair(rng, 2, 2, 2)
    sigma = random_element(rng, hom_equivariant(x, y))
    assert lift_morphism(FiberProductMorphism(sigma, sigma), x, y) == tuple(sigma)


@pytest.mark.parametrize("seed", [3, 12, 29])
def test_every_fiber_morphism_between_delta_images_lifts(seed):
    rng = random.Random(seed)
    x, y = random_equivariant_pair(rng, rng.randint(1, 3), 2, 2)
    fiber = delta_target_category(x.kernel)
    space = fiber.hom_space(delta(x), delta(y))
    for _ in range(3):
        tau = fiber.split(delta(x), random_element(rng, space))
        assert delta_morphism(lift_morphism(tau, x, y)) == tau


def test_delta_factors_through_ls_and_restriction():
    functor = delta_functor(SAMPLE_A.kernel)
    assert functor.name == "delta"
    assert functor(SAMPLE_B) == delta(SAMPLE_B)
    to_ls = compose_functors(first_projection(functor.target), functor)
    assert to_ls(SAMPLE_A) == ls_functor(SAMPLE_A)


def test_local_system_functor():
    functor = local_system_functor(SAMPLE_A.kernel)
    assert functor(SAMPLE_A) == ls_functor(SAMPLE_A)
    assert check_functor(functor, [SAMPLE_A, SAMPLE_B]) == []


def test_lift_rejects_mismatched_components():
    tau = FiberProductMorphism((matrix([[3]]), matrix([[3]])), (matrix([[2]]), matrix([[2]])))
    with pytest.raises(LiftVerificationFailed):
        lift_morphism(tau, SAMPLE_A, SAMPLE_A)


def test_lift_rejects_non_equivariant_components():
    components = (matrix([[1]]), matrix([[2]]))
    with pytest.raises(LiftVerificationFailed):
        lift_morphism(FiberProductMorphism(components, components), SAMPLE_A, SAMPLE_A)


def test_functor_composition_checks_endpoints():
    vc = vanishing_cycles_functor()
    with pytest.raises(CategoryMismatch):
        compose_functors(vc, vc)


def test_constant_functor_sends_scalars_to_multiples_of_identity():
    category = quiver_category()
    functor = constant_functor(category, SAMPLE_QUIVERS[0])
    image = functor.on_morphism(None, None, (matrix([[5]]),))
    assert image == (identity(1).scale(5), identity(2).scale(5))


def test_conjugation_is_an_equivalence():
    category = quiver_category()
    functor = conjugation_functor(category, SAMPLE_CHANGES)
    assert check_functor(functor, SAMPLE_QUIVERS) == []
    assert check_equivalence(functor, SAMPLE_QUIVERS, SAMPLE_QUIVERS).ok


def test_ore_square():
    category = quiver_category()
    f = conjugation_functor(category, SAMPLE_CHANGES)
    g = identity_functor(category)
    square = ore_square(f, g, SAMPLE_QUIVERS, SAMPLE_QUIVERS)
    assert square.report.ok
    assert len(square.objects) == 2
    for obj in square.objects:
        square.category.validate(obj)
        assert square.f_prime(obj) is obj.b


def test_ore_square_needs_an_equivalence():
    category = quiver_category()
    f = conjugation_functor(category, SAMPLE_CHANGES)
    g = identity_functor(category)
    with pytest.raises(NotAnEquivalence) as exc:
        ore_square(f, g, SAMPLE_QUIVERS[1:], SAMPLE_QUIVERS[:1])
    assert exc.value.witness["check"] == "essential"


def test_ore_square_needs_a_common_target():
    f = conjugation_functor(quiver_category(), SAMPLE_CHANGES)
    g = identity_functor(quiver_category())
    with pytest.raises(CategoryMismatch):
        ore_square(f, g, SAMPLE_QUIVERS, SAMPLE_QUIVERS)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
