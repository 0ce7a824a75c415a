"""
Test script for groupoid representations and melded objects
Usage: pytest test_melded_systems.py
"""

import random
from dataclasses import replace

import pytest

from microlocal.equivariant import EquivariantQuiver, hom_equivariant, identity_kernel, parse_word
from microlocal.errors import (
    GammaViolation,
    ModelMismatch,
    RelationViolation,
    ShapeMismatch,
    UnknownGenerator,
)
from microlocal.exact_kernel import identity, matrix
from microlocal.melded_systems import (
    GroupoidArrow,
    Lambda0Model,
    Lambda0Object,
    Lambda1Model,
    from_equivariant_family,
    has_no_variation,
    hom_lambda0,
    hom_melded,
    validate_lambda0_object,
    validate_lambda1_model,
    validate_melded,
    variation_report,
    word_endpoint,
)
from microlocal.quiver_core import Quiver
from microlocal.random_instances import random_equivariant_pair
from microlocal.serialization import decode_equivariant, decode_melded, load_json

SAMPLE_MELDED = decode_melded(load_json("sample_inputs/melded_family.json"))
SAMPLE_ZERO_FAMILY = decode_equivariant(load_json("sample_inputs/equivariant_b.json"))

# One object with a single twisted loop
SAMPLE_TWISTED = Lambda0Model(
    ("o",),
    (GroupoidArrow("t", "o", "o"),),
    (("o", parse_word("t")),),
    (("t", -1),),
)


def test_sample_melded_is_valid():
    validate_melded(SAMPLE_MELDED)
    assert SAMPLE_MELDED.lambda0.objects == ("s1", "s2")
    assert SAMPLE_MELDED.lambda0.components() == [["s1", "s2"]]


def test_sample_hom_dimension():
    assert hom_melded(SAMPLE_MELDED, SAMPLE_MELDED).dimension == 1


@pytest.mark.parametrize("seed", [2, 19, 77])
def test_family_hom_matches_equivariant_hom(seed):
    rng = random.Random(seed)
    x, y = random_equivariant_pair(rng, rng.randint(1, 3), 2, 2)
    mx, my = from_equivariant_family(x), from_equivariant_family(y)
    assert hom_melded(mx, my).dimension == hom_equivariant(x, y).dimension


def test_gamma_must_intertwine_the_lifts():
    bad = replace(SAMPLE_MELDED, gamma=(identity(1).scale(2), identity(1)))
    with pytest.raises(GammaViolation) as exc:
        validate_melded(bad)
    assert exc.value.witness == {"generator": "s", "index": 1}


def test_gamma_must_be_invertible():
    bad = replace(SAMPLE_MELDED, gamma=(matrix([[0]]), identity(1)))
    with pytest.raises(GammaViolation) as exc:
        validate_melded(bad)
    assert exc.value.witness == {"index": 1}


def test_models_must_agree():
    single = EquivariantQuiver(Quiver.zero([1]), identity_kernel(1, ["s"]), ((identity(1),),))
    with pytest.raises(ModelMismatch):
        hom_melded(SAMPLE_MELDED, from_equivariant_family(single))


def test_twisted_relation():
    validate_lambda0_object(Lambda0Object(SAMPLE_TWISTED, (1,), (matrix([[-1]]),)))
    with pytest.raises(RelationViolation):
        validate_lambda0_object(Lambda0Object(SAMPLE_TWISTED, (1,), (matrix([[1]]),)))


def test_twist_does_not_enter_morphisms():
    a = Lambda0Object(SAMPLE_TWISTED, (2,), (matrix([[-1, 0], [0, -1]]),))
    assert hom_lambda0(a, a).dimension == 4


def test_words_must_compose():
    model = Lambda0Model(("a", "b"), (GroupoidArrow("u", "a", "b"),))
    assert word_endpoint(model, "a", parse_word("u")) == "b"
    with pytest.raises(ShapeMismatch):
        word_endpoint(model, "a", parse_word("u u"))


def test_collisions_must_partition_the_sheets():
    p = SAMPLE_MELDED.lambda1.presentation
    with pytest.raises(ShapeMismatch):
        validate_lambda1_model(Lambda1Model(p, (("s", ((0,),)),)))


def test_variation_of_sample():
    report = variation_report(SAMPLE_MELDED, "s")
    assert report.no_variation
    assert report.to_dict()["label"] == "decision-dependent"
    assert report.blocks[0]["sheets"] == [1, 2]


def test_variation_of_vanishing_block():
    model = Lambda1Model(SAMPLE_ZERO_FAMILY.presentation, (("s", ((0, 1),)),))
    m = from_equivariant_family(SAMPLE_ZERO_FAMILY, model)
    assert has_no_variation(m, "s")
    assert variation_report(m, "s").to_dict()["label"] == "base-case"


def test_variation_detects_a_twisted_block():
    b = SAMPLE_MELDED.b
    moved = replace(b, structure=((matrix([[2]]), matrix([["1/2"]])),))
    assert not has_no_variation(replace(SAMPLE_MELDED, b=moved), "s")


def test_unknown_boundary_generator():
    with pytest.raises(UnknownGenerator):
        variation_report(SAMPLE_MELDED, "t")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
