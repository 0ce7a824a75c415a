"""
Test script for Lagrangian triples and the Maslov holonomy
Usage: pytest test_symplectic_maslov.py
"""

import random

import pytest

from microlocal.errors import DegenerateStep, FrameMismatch, ShapeMismatch, StratumViolation
from microlocal.exact_kernel import congruence_signature, matrix, scalar
from microlocal.random_instances import (
    LOOP_PARAMETERS,
    constant_loop,
    phase_loop,
    random_symplectic,
    random_triple,
    refine_parameters,
    unit_phase,
)
from microlocal.serialization import decode_triple, load_json
from microlocal.symplectic_maslov import (
    LagrangianFrame,
    LagrangianTriple,
    SymplecticSpace,
    TripleLoop,
    act,
    coordinate_lagrangian,
    graph_lagrangian,
    intersection_profile,
    maslov_holonomy,
    negative_frame,
    refined_holonomy,
    standard_omega,
    triple_form,
)

PLANE = SymplecticSpace.standard(1)

# Transverse triple in the plane: span(e), span(f), span(e + f)
SAMPLE_TRANSVERSE = LagrangianTriple(
    coordinate_lagrangian(PLANE, [0]),
    coordinate_lagrangian(PLANE, []),
    graph_lagrangian(PLANE, matrix([[1]])),
)

SAMPLE_SEEDS = [3, 17, 101, 2024]


def test_transverse_triple():
    report = triple_form(SAMPLE_TRANSVERSE)
    assert intersection_profile(SAMPLE_TRANSVERSE) == (0, 0, 0)
    assert report.complex_rank == 3
    assert report.real_signature.as_tuple() == (3, 3, 0)
    assert report.q_matrix == report.q_matrix.T


def test_degenerate_sample_file():
    t = decode_triple(load_json("sample_inputs/triple_n2_degenerate.json"))
    report = triple_form(t)
    assert t.profile == (1, 1, 0)
    assert report.complex_rank == 3 * 2 - 2
    assert report.real_signature.null == 2 * sum(t.profile)


@pytest.mark.parametrize("seed", SAMPLE_SEEDS)
def test_rank_and_signature_follow_profile(seed):
    rng = random.Random(seed)
    t = random_triple(rng, rng.randint(1, 3))
    report = triple_form(t)
    signature = report.real_signature
    assert report.complex_rank == 3 * t.space.n - sum(t.profile)
    assert signature.positive == signature.negative
    assert signature.null == 2 * sum(t.profile)


@pytest.mark.parametrize("seed", SAMPLE_SEEDS)
def test_negative_frame_is_negative_definite(seed):
    t = random_triple(random.Random(seed), 2)
    report = triple_form(t)
    frame = negative_frame(report)
    restricted = congruence_signature(frame.T @ report.realified @ frame)
    assert restricted.as_tuple() == (0, frame.cols, 0)


@pytest.mark.parametrize("seed", SAMPLE_SEEDS)
def test_symplectic_invariance(seed):
    rng = random.Random(seed)
    t = random_triple(rng, 2)
    moved = act(random_symplectic(rng, 2), t)
    assert moved.profile == t.profile
    assert triple_form(moved).q_matrix == triple_form(t).q_matrix


def test_act_rejects_non_symplectic():
    with pytest.raises(ShapeMismatch):
        act(matrix([[2, 0], [0, 1]]), SAMPLE_TRANSVERSE)


def test_frame_must_be_isotropic():
    space = SymplecticSpace.standard(2)
    with pytest.raises(ShapeMismatch):
        LagrangianFrame(space, matrix([[1, 0], [0, 0], [0, 1], [0, 0]]))


def test_frames_in_different_spaces():
    other = SymplecticSpace(1, standard_omega(1).scale(2))
    t = LagrangianTriple(
        coordinate_lagrangian(PLANE, [0]),
        coordinate_lagrangian(other, []),
        coordinate_lagrangian(PLANE, []),
    )
    with pytest.raises(FrameMismatch):
        intersection_profile(t)


def test_constant_loop_is_trivial():
    assert maslov_holonomy(constant_loop(SAMPLE_TRANSVERSE)) == 1
    sample = load_json("sample_inputs/loop_constant.json")
    assert len(sample["samples"]) == 3


@pytest.mark.parametrize("seed", SAMPLE_SEEDS[:2])
def test_phase_loop_is_stable(seed):
    rng = random.Random(seed)
    t = random_triple(rng, 1)
    holonomy, level = refined_holonomy(lambda k: phase_loop(t, k), 2)
    loop = phase_loop(t, level)
    assert holonomy in (1, -1)
    assert refined_holonomy(lambda k: phase_loop(t, k), level + 1)[0] == holonomy
    assert maslov_holonomy(loop.reversed()) == holonomy
    assert maslov_holonomy(loop.rotated(3)) == holonomy
    assert maslov_holonomy(loop.doubled()) == 1


def circle_loop(center, radius, level: int) -> TripleLoop:
    """span(e + f), span(e − f) and span(e + t·f) with t = center + radius·e^{iθ}"""
    params = list(LOOP_PARAMETERS)
    for _ in range(level):
        params = refine_parameters(params)
    w1 = LagrangianFrame(PLANE, matrix([[1], [1]]))
    w2 = LagrangianFrame(PLANE, matrix([[1], [-1]]))
    samples = []
    for u in params:
        t = scalar(center) + scalar(radius) * unit_phase(u)
        samples.append(LagrangianTriple(w1, w2, LagrangianFrame(PLANE, matrix([[1], [t]]))))
    return TripleLoop(tuple(samples))


@pytest.mark.parametrize("center, radius, expected", [
    (1, "1/2", -1),
    (-1, "1/2", -1),
    (3, "1/2", 1),
    (0, 2, 1),
])
def test_circle_around_the_touching_points(center, radius, expected):
    holonomy, level = refined_holonomy(lambda k: circle_loop(center, radius, k), 2)
    assert holonomy == expected
    assert refined_holonomy(lambda k: circle_loop(center, radius, k), level + 1)[0] == expected


def test_circle_stays_in_the_transverse_stratum():
    loop = circle_loop(1, "1/2", 1)
    assert {s.profile for s in loop.samples} == {(0, 0, 0)}


def test_refinement_raises_the_level_until_the_loop_is_regular():
    levels = []

    def build(level):
        levels.append(level)
        if level < 3:
            raise DegenerateStep("too coarse", {"step": 0})
        return constant_loop(SAMPLE_TRANSVERSE)

    assert refined_holonomy(build, 1) == (1, 3)
    assert levels == [1, 2, 3]


def test_refinement_gives_up_at_the_last_level():
    def build(level):
        raise DegenerateStep("never regular", {"step": level})

    with pytest.raises(DegenerateStep) as exc:
        refined_holonomy(build, 0, 2)
    assert exc.value.witness == {"step": 2}


@pytest.mark.parametrize("seed", SAMPLE_SEEDS)
def test_refined_phase_loop_agrees_with_a_finer_one(seed):
    rng = random.Random(seed)
    t = random_triple(rng, rng.randint(1, 2))
    frame = rng.randrange(3)
    holonomy, level = refined_holonomy(lambda k: phase_loop(t, k, frame), 1)
    assert refined_holonomy(lambda k: phase_loop(t, k, frame), level + 1)[0] == holonomy


def test_loop_leaving_the_stratum():
    touching = LagrangianTriple(
        SAMPLE_TRANSVERSE.w1,
        SAMPLE_TRANSVERSE.w2,
        coordinate_lagrangian(PLANE, [0]),
    )
    loop = TripleLoop((SAMPLE_TRANSVERSE, touching, SAMPLE_TRANSVERSE))
    with pytest.raises(StratumViolation) as exc:
        maslov_holonomy(loop)
    assert exc.value.witness["sample"] == 1
    assert exc.value.witness["profile"] == [0, 0, 1]


def test_loop_must_close():
    touching = LagrangianTriple(SAMPLE_TRANSVERSE.w1, SAMPLE_TRANSVERSE.w2, SAMPLE_TRANSVERSE.w1)
    with pytest.raises(ShapeMismatch):
        TripleLoop((SAMPLE_TRANSVERSE, touching))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
