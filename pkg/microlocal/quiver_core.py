"""
Quiver Category
Quivers with maps for every ordered pair of points, their morphisms, and
the vanishing-cycle functor to local-system quivers
"""

import logging
from dataclasses import dataclass
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import CompositionMismatch, NotInvertible, PointCountMismatch, ShapeMismatch
from .exact_kernel import (
    ExactMatrix,
    LinearSystem,
    SolutionSpace,
    Term,
    block_diag,
    identity,
    is_invertible,
    zeros,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Quiver:
    """
    Spaces M_1..M_n with a map m_ji: M_i → M_j for every ordered pair

    Internally indices are 0-based: maps[j][i] is m_{j+1,i+1}.
    """

    dims: Tuple[int, ...]
    maps: Tuple[Tuple[ExactMatrix, ...], ...]

    @property
    def n(self) -> int:
        return len(self.dims)

    def map(self, j: int, i: int) -> ExactMatrix:
        return self.maps[j][i]

    @classmethod
    def from_maps(cls, dims: Sequence[int], maps: Dict[Tuple[int, int], ExactMatrix]) -> "Quiver":
        """Build a quiver from a sparse {(j, i): m_ji} dictionary; missing maps are zero"""
        dims = tuple(dims)
        n = len(dims)
        grid = tuple(
            tuple(maps.get((j, i), zeros(dims[j], dims[i])) for i in range(n))
            for j in range(n)
        )
        return cls(dims, grid)

    @classmethod
    def zero(cls, dims: Sequence[int]) -> "Quiver":
        return cls.from_maps(dims, {})


def validate_quiver(q: Quiver) -> None:
    """
    Check map shapes and invertibility of every 1 + m_ii

    Raises:
        ShapeMismatch: if a map does not have shape dims[j]×dims[i]
        NotInvertible: with the 1-based index of the failing diagonal
    """
    n = q.n
    if len(q.maps) != n or any(len(row) != n for row in q.maps):
        raise ShapeMismatch(f"a quiver on {n} points needs an {n}x{n} grid of maps")
    for j, i in product(range(n), repeat=2):
        if q.maps[j][i].shape != (q.dims[j], q.dims[i]):
            raise ShapeMismatch(
                f"m_{j + 1}{i + 1} has shape {q.maps[j][i].shape}, expected {(q.dims[j], q.dims[i])}",
                {"j": j + 1, "i": i + 1},
            )
    for i in range(n):
        if not is_invertible(identity(q.dims[i]) + q.maps[i][i]):
            raise NotInvertible(i + 1)


def direct_sum(q: Quiver, other: Quiver) -> Quiver:
    if q.n != other.n:
        raise PointCountMismatch(f"cannot add quivers on {q.n} and {other.n} points")
    dims = tuple(a + b for a, b in zip(q.dims, other.dims))
    maps = tuple(
        tuple(block_diag(q.maps[j][i], other.maps[j][i]) for i in range(q.n))
        for j in range(q.n)
    )
    return Quiver(dims, maps)


@dataclass(frozen=True)
class QuiverMorphism:
    source: Quiver
    target: Quiver
    components: Tuple[ExactMatrix, ...]

    def check(self) -> bool:
        """True iff τ_j m_ji = m'_ji τ_i for all i, j"""
        return is_morphism(self.source, self.target, self.components)


def is_morphism(source: Quiver, target: Quiver, components: Sequence[ExactMatrix]) -> bool:
    n = source.n
    if target.n != n or len(components) != n:
        return False
    for i in range(n):
        if components[i].shape != (target.dims[i], source.dims[i]):
            return False
    return all(
        components[j] @ source.maps[j][i] == target.maps[j][i] @ components[i]
        for j, i in product(range(n), repeat=2)
    )


def add_morphism_equations(system: LinearSystem, source: Quiver, target: Quiver,
                           blocks: Sequence[int]) -> None:
    """Add τ_j m_ji − m'_ji τ_i = 0 for every ordered pair, τ_i living in blocks[i]"""
    for j, i in product(range(source.n), repeat=2):
        system.add_equation([
            Term(blocks[j], identity(target.dims[j]), source.maps[j][i]),
            Term(blocks[i], -target.maps[j][i], identity(source.dims[i])),
        ])


def hom_basis(q: Quiver, q2: Quiver) -> SolutionSpace:
    """
    Basis of all families (τ_i) with τ_j m_ji = m'_ji τ_i

    Args:
        q: source quiver
        q2: target quiver

    Returns:
        SolutionSpace whose unflattened vectors are component tuples

    Raises:
        PointCountMismatch: if the quivers have different point counts
    """
    if q.n != q2.n:
        raise PointCountMismatch(f"source has {q.n} points, target has {q2.n}",
                                 {"source": q.n, "target": q2.n})
    system = LinearSystem([(q2.dims[i], q.dims[i]) for i in range(q.n)])
    add_morphism_equations(system, q, q2, list(range(q.n)))
    return system.solve()


def morphisms_of(space: SolutionSpace, source: Quiver, target: Quiver) -> List[QuiverMorphism]:
    return [QuiverMorphism(source, target, blocks) for blocks in space.block_basis()]


def identity_morphism(q: Quiver) -> QuiverMorphism:
    return QuiverMorphism(q, q, tuple(identity(d) for d in q.dims))


def compose(f: QuiverMorphism, g: QuiverMorphism) -> QuiverMorphism:
    """f ∘ g, componentwise"""
    if g.target != f.source:
        raise CompositionMismatch("target of the first morphism is not the source of the second")
    return QuiverMorphism(g.source, f.target, tuple(a @ b for a, b in zip(f.components, g.components)))


def is_isomorphism(f) -> bool:
    return all(is_invertible(c) for c in f.components)


def find_isomorphism(q: Quiver, q2: Quiver, attempts: int = 8) -> Optional[QuiverMorphism]:
    """
    Search the Hom-space for an invertible morphism

    Tries a fixed sequence of integer combinations of the Hom basis, so the
    answer is deterministic. None means no candidate was invertible; for
    isomorphic quivers a candidate is almost always invertible.
    """
    if q.n != q2.n or q.dims != q2.dims:
        return None
    space = hom_basis(q, q2)
    for blocks in candidate_elements(space, attempts):
        if is_isomorphism(QuiverMorphism(q, q2, blocks)):
            return QuiverMorphism(q, q2, blocks)
    return None


def candidate_elements(space: SolutionSpace, attempts: int) -> Iterable[Tuple[ExactMatrix, ...]]:
    """Deterministic integer combinations of a basis, used for isomorphism probing"""
    k = space.dimension
    if k == 0:
        if space.ambient_dim == 0:
            yield space.unflatten(zeros(0, 1))
        return
    for base in range(1, attempts + 1):
        coefficients = [(base + 1) ** index + base * index for index in range(k)]
        yield space.unflatten(space.element(coefficients))


# ---------------------------------------------------------------------------
# Local-system quivers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalSystemQuiver:
    dims: Tuple[int, ...]
    monodromies: Tuple[ExactMatrix, ...]

    @property
    def n(self) -> int:
        return len(self.dims)


def validate_local_system(ls: LocalSystemQuiver) -> None:
    if len(ls.monodromies) != ls.n:
        raise ShapeMismatch(f"{len(ls.monodromies)} monodromies for {ls.n} points")
    for i, (d, l) in enumerate(zip(ls.dims, ls.monodromies)):
        if l.shape != (d, d):
            raise ShapeMismatch(f"l_{i + 1} has shape {l.shape}, expected {(d, d)}", {"index": i + 1})
        if not is_invertible(l):
            raise NotInvertible(i + 1, f"monodromy l_{i + 1} is not invertible")


@dataclass(frozen=True)
class LocalSystemMorphism:
    source: LocalSystemQuiver
    target: LocalSystemQuiver
    components: Tuple[ExactMatrix, ...]

    def check(self) -> bool:
        """True iff f_i l_i = l'_i f_i for every i"""
        return all(
            f.shape == (self.target.dims[i], self.source.dims[i])
            and f @ self.source.monodromies[i] == self.target.monodromies[i] @ f
            for i, f in enumerate(self.components)
        )


def ls_hom_basis(ls: LocalSystemQuiver, ls2: LocalSystemQuiver) -> SolutionSpace:
    if ls.n != ls2.n:
        raise PointCountMismatch(f"source has {ls.n} points, target has {ls2.n}")
    system = LinearSystem([(ls2.dims[i], ls.dims[i]) for i in range(ls.n)])
    for i in range(ls.n):
        system.add_equation([
            Term(i, identity(ls2.dims[i]), ls.monodromies[i]),
            Term(i, -ls2.monodromies[i], identity(ls.dims[i])),
        ])
    return system.solve()


def compose_ls(f: LocalSystemMorphism, g: LocalSystemMorphism) -> LocalSystemMorphism:
    if g.target != f.source:
        raise CompositionMismatch("target of the first morphism is not the source of the second")
    return LocalSystemMorphism(g.source, f.target, tuple(a @ b for a, b in zip(f.components, g.components)))


def vanishing_cycles(q: Quiver) -> LocalSystemQuiver:
    """L_i = M_i, l_i = 1 + m_ii"""
    return LocalSystemQuiver(
        q.dims,
        tuple(identity(q.dims[i]) + q.maps[i][i] for i in range(q.n)),
    )


def vanishing_cycles_map(f: QuiverMorphism) -> LocalSystemMorphism:
    """Same components; they intertwine 1 + m_ii because τ_i m_ii = m'_ii τ_i"""
    return LocalSystemMorphism(vanishing_cycles(f.source), vanishing_cycles(f.target), f.components)


def conjugate_quiver(q: Quiver, changes: Sequence[ExactMatrix], inverses: Sequence[ExactMatrix]) -> Quiver:
    """Transport quiver data along invertible P_i: m_ji ↦ P_j m_ji P_i⁻¹"""
    return Quiver(q.dims, tuple(
        tuple(changes[j] @ q.maps[j][i] @ inverses[i] for i in range(q.n))
        for j in range(q.n)
    ))
