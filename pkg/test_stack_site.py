"""
Test script for finite sites, prestacks, descent and stack morphisms
Usage: pytest test_stack_site.py
"""

import random

import pytest

from microlocal.categories import PresentedCategory, point_category
from microlocal.errors import (
    CocycleViolation,
    CoherenceViolation,
    DescentInvalid,
    NotOpenMap,
    SiteError,
)
from microlocal.exact_kernel import identity, matrix
from microlocal.random_instances import (
    plant_violation,
    random_descent_datum,
    random_site,
    random_site_local_system,
    whole_space,
)
from microlocal.serialization import (
    decode_descent,
    decode_samples,
    decode_site,
    decode_stack_morphism,
    load_json,
)
from microlocal.stack_site import (
    DescentDatum,
    PosetSite,
    PrestackData,
    SiteMap,
    StackMorphismData,
    check_descent,
    check_hom_sheaf,
    check_prestack,
    check_weak_iso,
    compatible_isomorphisms,
    constant_local_system,
    constant_prestack,
    doubling_morphism_of_stacks,
    extend_local_morphism,
    glue,
    identity_morphism_of_stacks,
    inverse_image,
    local_system_stack,
    product_site,
    projection_map,
    stackify,
    stalk,
)

SAMPLE_SITE = decode_site(load_json("sample_inputs/site_fork.json"))
SAMPLE_OBJECTS = decode_samples(
    SAMPLE_SITE, load_json("sample_inputs/prestack_local_systems.json")["samples"], "samples"
)
WHOLE = "a+b+c"

# Three members meeting in the single point a
SAMPLE_TRIPOD = PosetSite(
    ["a", "a+b", "a+c", "a+d", "a+b+c+d"],
    [("a", "a+b"), ("a", "a+c"), ("a", "a+d"),
     ("a+b", "a+b+c+d"), ("a+c", "a+b+c+d"), ("a+d", "a+b+c+d")],
    {"a": "a", "b": "a+b", "c": "a+c", "d": "a+d"},
    {"a+b+c+d": [["a+b", "a+c", "a+d"]]},
)
TRIPOD_COVER = ("a+b", "a+c", "a+d")


def tripod_datum(sigma_31):
    p = local_system_stack(SAMPLE_TRIPOD)
    objects = tuple(constant_local_system(SAMPLE_TRIPOD, m, 1) for m in TRIPOD_COVER)
    sigma = {
        (0, 1): (matrix([[2]]),),
        (1, 2): (matrix([[3]]),),
        (2, 0): (matrix([[sigma_31]]),),
    }
    return DescentDatum(p, "a+b+c+d", TRIPOD_COVER, objects, sigma)


def test_site_structure():
    assert SAMPLE_SITE.points_of(WHOLE) == ("a", "b", "c")
    assert SAMPLE_SITE.meet("a+b", "a+c") == "a"
    assert SAMPLE_SITE.join("a+b", "a+c") == WHOLE
    assert SAMPLE_SITE.comparable_pairs(WHOLE) == [("a", "b"), ("a", "c")]
    assert SAMPLE_SITE.is_covering(WHOLE, ["a+b", "a+c"])
    assert not SAMPLE_SITE.is_covering(WHOLE, ["a+b"])


def test_cyclic_order_is_rejected():
    with pytest.raises(SiteError):
        PosetSite(["u", "v"], [("u", "v"), ("v", "u")], {"x": "u"})


def test_declared_cover_must_cover():
    with pytest.raises(SiteError):
        PosetSite(["u", "v"], [("u", "v")], {"x": "u", "y": "v"}, {"v": [["u"]]})


def test_local_system_stack_is_a_prestack():
    p = local_system_stack(SAMPLE_SITE)
    report = check_prestack(p, SAMPLE_OBJECTS)
    assert report.ok
    assert report.checked == 2


def test_coherence_must_be_trivial_on_degenerate_chains():
    chain = PosetSite(["u1", "u2", "u3", "u4"], [("u1", "u2"), ("u2", "u3"), ("u3", "u4")],
                      {"x": "u1"})
    base = constant_prestack(chain, point_category())
    flipped = PrestackData(chain, base.categories, base.restrictions,
                           coherence=lambda w, v, u, obj: (-identity(1),), name="flipped")
    report = check_prestack(flipped, {"u4": ["*"]})
    assert not report.ok
    assert {v["condition"] for v in report.violations} == {"I.b"}


def test_hom_sheaf_of_local_systems():
    p = local_system_stack(SAMPLE_SITE)
    for a in SAMPLE_OBJECTS[WHOLE]:
        report = check_hom_sheaf(p, WHOLE, a, a, ["a+b", "a+c"])
        assert report.ok


def test_hom_sheaf_detects_an_unconstrained_category():
    p = local_system_stack(SAMPLE_SITE)
    loose = PresentedCategory("loose", lambda a: a.dims, lambda system, a, b, blocks: None)
    broken = PrestackData(SAMPLE_SITE, {**p.categories, WHOLE: loose}, p.restrictions, name="loose")
    a = SAMPLE_OBJECTS[WHOLE][0]
    report = check_hom_sheaf(broken, WHOLE, a, a, ["a+b", "a+c"])
    assert report.to_dict() == {"dim_global": 3, "dim_equalizer": 1, "injective": True, "ok": False}


def test_hom_sheaf_needs_a_cover():
    p = local_system_stack(SAMPLE_SITE)
    a = SAMPLE_OBJECTS[WHOLE][0]
    with pytest.raises(SiteError):
        check_hom_sheaf(p, WHOLE, a, a, ["a+b"])


def test_glue_sample_datum():
    glued = glue(decode_descent(load_json("sample_inputs/descent_fork.json")))
    assert glued.obj.transition("a", "b") == matrix([[2]])
    assert glued.obj.transition("a", "c") == matrix([["3/5"]])
    assert glued.sigmas[1] == (matrix([[5]]), matrix([[1]]))


def test_cocycle_holds():
    full = check_descent(tripod_datum("1/6"))
    assert full.sigma[(0, 2)] == (matrix([[6]]),)
    glue(tripod_datum("1/6"))


def test_cocycle_violation():
    with pytest.raises(CocycleViolation) as exc:
        check_descent(tripod_datum(1))
    assert exc.value.witness == {"i": 1, "j": 2, "k": 3}
    with pytest.raises(DescentInvalid):
        glue(tripod_datum(1))


def test_missing_overlap_isomorphism():
    d = tripod_datum("1/6")
    sigma = {key: value for key, value in d.sigma.items() if key != (1, 2)}
    with pytest.raises(DescentInvalid) as exc:
        check_descent(DescentDatum(d.prestack, d.open, d.cover, d.objects, sigma))
    assert exc.value.witness == {"i": 2, "j": 3}


@pytest.mark.parametrize("seed", [1, 5, 23])
def test_random_descent(seed):
    rng = random.Random(seed)
    site = random_site(rng, 3)
    p = local_system_stack(site)
    u = whole_space(site)
    cover = site.covers[u][0]
    obj = random_site_local_system(rng, site, u, 2)
    datum, _ = random_descent_datum(rng, p, u, cover, obj)
    glued = glue(datum)
    again = glue(datum)
    assert compatible_isomorphisms(p, u, cover, glued, again).dimension == 1
    broken, _ = plant_violation(datum)
    with pytest.raises(DescentInvalid):
        glue(broken)


def test_stalk_is_the_minimal_open():
    p = local_system_stack(SAMPLE_SITE)
    assert stalk(p, "b") is p.categories["a+b"]
    assert stalk(p, "a") is p.categories["a"]


def test_weak_isomorphism_samples():
    theta, samples, targets = decode_stack_morphism(load_json("sample_inputs/theta_scalar.json"))
    verdict = check_weak_iso(theta, samples, targets)
    assert verdict.weak_isomorphism
    assert verdict.cross_check == {"open": WHOLE, "ok": True, "agrees": True}

    theta, samples, targets = decode_stack_morphism(load_json("sample_inputs/theta_doubling.json"))
    verdict = check_weak_iso(theta, samples, targets)
    assert not verdict.weak_isomorphism
    assert verdict.witness["check"] == "hom"


def test_weak_isomorphism_without_targets_is_flagged():
    theta, samples, _ = decode_stack_morphism(load_json("sample_inputs/theta_scalar.json"))
    verdict = check_weak_iso(theta, samples)
    assert not verdict.essential_checked
    assert verdict.to_dict()["essential_checked"] is False

    targets = {u: [theta.functors[u](a) for a in items] for u, items in samples.items()}
    verdict = check_weak_iso(theta, samples, targets)
    assert verdict.essential_checked
    assert verdict.weak_isomorphism


def test_extend_identity_over_a_union():
    p = local_system_stack(SAMPLE_SITE)
    extension = extend_local_morphism(identity_morphism_of_stacks(p), "a+b", "a+c")
    assert extension.open == WHOLE
    a = SAMPLE_OBJECTS[WHOLE][1]
    image = extension.functor(a)
    assert image.dims == a.dims
    ident = p.categories[WHOLE].identity(a)
    assert extension.functor.on_morphism(a, a, ident) == ident


def test_extend_rejects_singular_comparisons():
    p = local_system_stack(SAMPLE_SITE)
    doubling = doubling_morphism_of_stacks(p)
    broken = StackMorphismData(
        p, p, doubling.functors,
        comparisons=lambda v, u, obj: tuple(identity(2 * d).scale(0) for d in p.restrict(v, u, obj).dims),
        name="collapsed",
    )
    extension = extend_local_morphism(broken, "a+b", "a+c")
    with pytest.raises(CoherenceViolation):
        extension.functor(SAMPLE_OBJECTS[WHOLE][0])


def test_inverse_image_along_a_projection():
    point = PosetSite(["x"], [], {"x": "x"})
    site = product_site(SAMPLE_SITE, point)
    f = projection_map(site, SAMPLE_SITE)
    p = inverse_image(f, local_system_stack(SAMPLE_SITE))
    fork = decode_descent(load_json("sample_inputs/descent_fork.json"))
    datum = DescentDatum(p, f"{WHOLE}*x", ("a+b*x", "a+c*x"), fork.objects, fork.sigma)
    assert glue(datum).obj == glue(fork).obj


def test_inverse_image_needs_an_open_map():
    swapped = SiteMap(SAMPLE_SITE, SAMPLE_SITE, {"a": "a+b", "a+b": "a", "a+c": "a+c", WHOLE: WHOLE})
    with pytest.raises(NotOpenMap):
        inverse_image(swapped, local_system_stack(SAMPLE_SITE))


def test_stackification_is_not_offered():
    with pytest.raises(NotImplementedError):
        stackify(local_system_stack(SAMPLE_SITE))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
