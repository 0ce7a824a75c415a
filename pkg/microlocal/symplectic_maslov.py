"""
Symplectic Triples and Maslov Holonomy
Lagrangian frames, the triple quadratic form and its sign data along loops
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

from .errors import DegenerateStep, FrameMismatch, ShapeMismatch, StratumViolation
from .exact_kernel import (
    ExactMatrix,
    SignatureReport,
    block_matrix,
    congruence_signature,
    determinant,
    hstack,
    identity,
    is_invertible,
    rank,
    real_sign,
    zeros,
)

logger = logging.getLogger(__name__)


def standard_omega(n: int) -> ExactMatrix:
    """Standard form with ω(e_i, e_{n+i}) = 1"""
    return block_matrix([
        [zeros(n, n), identity(n)],
        [-identity(n), zeros(n, n)],
    ])


@dataclass(frozen=True)
class SymplecticSpace:
    n: int
    omega: ExactMatrix

    def __post_init__(self):
        if self.omega.shape != (2 * self.n, 2 * self.n):
            raise ShapeMismatch(f"omega must be {2 * self.n}x{2 * self.n}, got {self.omega.shape}")
        if self.omega.T != -self.omega:
            raise ShapeMismatch("omega is not antisymmetric")
        if not is_invertible(self.omega):
            raise ShapeMismatch("omega is degenerate")

    @classmethod
    def standard(cls, n: int) -> "SymplecticSpace":
        return cls(n, standard_omega(n))

    def pairing(self, x: ExactMatrix, y: ExactMatrix) -> ExactMatrix:
        """Matrix of ω between the columns of x and the columns of y"""
        return x.T @ self.omega @ y


@dataclass(frozen=True)
class LagrangianFrame:
    space: SymplecticSpace
    basis: ExactMatrix

    def __post_init__(self):
        n = self.space.n
        if self.basis.shape != (2 * n, n):
            raise ShapeMismatch(f"a Lagrangian frame in dimension {2 * n} needs a {2 * n}x{n} basis",
                                {"shape": list(self.basis.shape)})
        if rank(self.basis) != n:
            raise ShapeMismatch("frame columns are linearly dependent", {"rank": rank(self.basis)})
        if not self.space.pairing(self.basis, self.basis).is_zero():
            raise ShapeMismatch("frame is not isotropic")


def is_symplectic(s: ExactMatrix, space: SymplecticSpace) -> bool:
    return s.shape == space.omega.shape and s.T @ space.omega @ s == space.omega


def coordinate_lagrangian(space: SymplecticSpace, subset: Sequence[int]) -> LagrangianFrame:
    """
    Lagrangian spanned by e_i for i in subset and f_j = e_{n+j} for j not in subset

    Only meaningful for the standard form.
    """
    n = space.n
    chosen = set(subset)
    cols = [i if i in chosen else n + i for i in range(n)]
    return LagrangianFrame(space, identity(2 * n).submatrix(range(2 * n), cols))


def graph_lagrangian(space: SymplecticSpace, sym: ExactMatrix) -> LagrangianFrame:
    """Graph {(a, S a)} of a symmetric n×n matrix S, Lagrangian for the standard form"""
    return LagrangianFrame(space, block_matrix([[identity(space.n)], [sym]]))


@dataclass(frozen=True)
class TripleFormReport:
    q_matrix: ExactMatrix
    complex_rank: int
    real_signature: SignatureReport

    @cached_property
    def realified(self) -> ExactMatrix:
        return realify(self.q_matrix)


@dataclass(frozen=True)
class LagrangianTriple:
    w1: LagrangianFrame
    w2: LagrangianFrame
    w3: LagrangianFrame

    @property
    def frames(self) -> Tuple[LagrangianFrame, LagrangianFrame, LagrangianFrame]:
        return (self.w1, self.w2, self.w3)

    @property
    def space(self) -> SymplecticSpace:
        return self.w1.space

    @cached_property
    def profile(self) -> Tuple[int, int, int]:
        _require_shared_space(self)
        n = self.space.n

        def meet(a: LagrangianFrame, b: LagrangianFrame) -> int:
            return 2 * n - rank(hstack(a.basis, b.basis))

        return (meet(self.w1, self.w2), meet(self.w2, self.w3), meet(self.w1, self.w3))

    @cached_property
    def form_report(self) -> TripleFormReport:
        return _compute_triple_form(self)


def _require_shared_space(t: LagrangianTriple) -> None:
    if not (t.w1.space == t.w2.space == t.w3.space):
        raise FrameMismatch("the three frames live in different symplectic spaces")


def intersection_profile(t: LagrangianTriple) -> Tuple[int, int, int]:
    """
    Dimensions (n12, n23, n13) of the pairwise intersections

    Each n_ij = 2n − rank([basis_i | basis_j]); cached on the triple.
    """
    return t.profile


def act(s: ExactMatrix, t: LagrangianTriple) -> LagrangianTriple:
    """Apply a symplectic matrix to all three frames"""
    if not is_symplectic(s, t.space):
        raise ShapeMismatch("matrix does not preserve omega")
    return LagrangianTriple(*(LagrangianFrame(f.space, s @ f.basis) for f in t.frames))


def realify(q: ExactMatrix) -> ExactMatrix:
    """
    Gram matrix of Re Q in real coordinates

    z = x + iy maps to (x, y); for Q = A + iB this gives [[A, −B], [−B, −A]].
    """
    a = q.real_part()
    b = q.imag_part()
    return block_matrix([[a, -b], [-b, -a]])


def _compute_triple_form(t: LagrangianTriple) -> TripleFormReport:
    _require_shared_space(t)
    space = t.space
    n = space.n
    g12 = space.pairing(t.w1.basis, t.w2.basis)
    g23 = space.pairing(t.w2.basis, t.w3.basis)
    g31 = space.pairing(t.w3.basis, t.w1.basis)
    z = zeros(n, n)
    # Q(a1, a2, a3) = a1ᵀG12a2 + a2ᵀG23a3 + a3ᵀG31a1, polarized
    q_matrix = block_matrix([
        [z, g12, g31.T],
        [g12.T, z, g23],
        [g31, g23.T, z],
    ]).scale("1/2")
    complex_rank = rank(q_matrix)
    signature = congruence_signature(realify(q_matrix))
    logger.debug("triple form: rank %d, signature %s", complex_rank, signature.as_tuple())
    return TripleFormReport(q_matrix, complex_rank, signature)


def triple_form(t: LagrangianTriple) -> TripleFormReport:
    """
    Gram matrix, complex rank and real signature of the triple form

    Args:
        t: three Lagrangian frames in one symplectic space

    Returns:
        TripleFormReport

    Raises:
        FrameMismatch: if the frames live in different spaces
    """
    return t.form_report


def negative_frame(report: TripleFormReport) -> ExactMatrix:
    """Real basis of a maximal subspace on which Re Q is negative definite"""
    return report.real_signature.negative_basis()


def _transition_sign(current: ExactMatrix, following: ExactMatrix, step: int) -> int:
    # Orthogonal projection of `current` onto `following` in the basis of
    # `following` is (FᵀF)⁻¹FᵀC; FᵀF has positive determinant.
    if current.cols == 0:
        return 1
    sign = real_sign(determinant(following.T @ current))
    if sign == 0:
        raise DegenerateStep(f"projection between samples {step} and {step + 1} is singular; refine the loop",
                             {"step": step})
    return sign


@dataclass(frozen=True)
class TripleLoop:
    samples: Tuple[LagrangianTriple, ...]

    def __post_init__(self):
        if len(self.samples) < 2:
            raise ShapeMismatch("a loop needs at least two samples")
        first, last = self.samples[0], self.samples[-1]
        if any(a.basis != b.basis for a, b in zip(first.frames, last.frames)):
            raise ShapeMismatch("first and last samples of a loop must be equal")
        space = first.space
        for index, sample in enumerate(self.samples):
            if sample.space != space:
                raise FrameMismatch(f"sample {index} lives in a different symplectic space",
                                    {"sample": index})

    def refined(self, midpoints: Sequence[LagrangianTriple]) -> "TripleLoop":
        """Insert midpoints[k] between samples k and k+1"""
        if len(midpoints) != len(self.samples) - 1:
            raise ShapeMismatch("one midpoint per step is required")
        out: List[LagrangianTriple] = []
        for sample, mid in zip(self.samples, midpoints):
            out.extend([sample, mid])
        out.append(self.samples[-1])
        return TripleLoop(tuple(out))

    def rotated(self, shift: int) -> "TripleLoop":
        body = list(self.samples[:-1])
        shift %= len(body)
        body = body[shift:] + body[:shift]
        return TripleLoop(tuple(body + [body[0]]))

    def reversed(self) -> "TripleLoop":
        return TripleLoop(tuple(reversed(self.samples)))

    def doubled(self) -> "TripleLoop":
        return TripleLoop(self.samples + self.samples[1:])


def maslov_holonomy(loop: TripleLoop) -> int:
    """
    Z/2 holonomy of the top exterior power of the negative subspace bundle

    Multiplies sign(det P_k) over consecutive samples, P_k being the
    orthogonal projection (standard dot product on the realification) of
    one sample's negative frame onto the next one's.

    Raises:
        StratumViolation: if a sample's intersection profile differs
        DegenerateStep: if a projection is singular
    """
    expected = loop.samples[0].profile
    for index, sample in enumerate(loop.samples):
        if sample.profile != expected:
            raise StratumViolation(
                f"sample {index} has profile {sample.profile}, expected {expected}",
                {"sample": index, "profile": list(sample.profile), "expected": list(expected)},
            )
    frames = [negative_frame(triple_form(s)) for s in loop.samples]
    holonomy = 1
    for step in range(len(frames) - 1):
        holonomy *= _transition_sign(frames[step], frames[step + 1], step)
    logger.debug("holonomy over %d samples: %+d", len(frames), holonomy)
    return holonomy


def refined_holonomy(build: Callable[[int], TripleLoop], level: int = 1, max_level: int = 6) -> Tuple[int, int]:
    """
    Holonomy of ``build(level)``, raising the sampling level while a step is
    degenerate

    Args:
        build: maps a refinement level to a loop; higher levels sample the
            same loop more densely
        level: first level tried
        max_level: last level tried before the DegenerateStep is re-raised

    Returns:
        (holonomy, level at which it was computed)
    """
    while True:
        try:
            return maslov_holonomy(build(level)), level
        except DegenerateStep as exc:
            if level >= max_level:
                raise
            logger.debug("degenerate step %s at level %d; refining", exc.witness.get("step"), level)
            level += 1
