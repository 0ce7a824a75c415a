"""
Presented Categories
Categories given by block dimensions and linear equations on blocks, with
linear functors between them and instance-based equivalence checks
"""

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .errors import CategoryMismatch, CompositionMismatch, ShapeMismatch, WorkbenchError
from .exact_kernel import (
    ExactMatrix,
    LinearSystem,
    SolutionSpace,
    Term,
    flatten_blocks,
    hstack,
    identity,
    invert,
    is_invertible,
    rank,
    zeros,
)
from .equivariant import (
    ActionKernel,
    EquivariantLocalSystem,
    EquivariantQuiver,
    GroupPresentation,
    add_equivariance_equations,
    ls_functor,
    validate_equivariant,
    validate_equivariant_local_system,
)
from .quiver_core import (
    LocalSystemQuiver,
    Quiver,
    add_morphism_equations,
    candidate_elements,
    conjugate_quiver,
    validate_local_system,
    validate_quiver,
    vanishing_cycles,
)

logger = logging.getLogger(__name__)

Components = Tuple[ExactMatrix, ...]


@dataclass(frozen=True, eq=False)
class PresentedCategory:
    """
    A category known through its Hom solver

    A morphism a → b is a tuple of matrix blocks, block k of shape
    (block_dims(b)[k], block_dims(a)[k]); ``add_equations(system, a, b, blocks)``
    adds the linear conditions on those blocks. Composition and identities
    are blockwise.
    """

    name: str
    block_dims: Callable[[Any], Tuple[int, ...]]
    add_equations: Callable[[LinearSystem, Any, Any, Sequence[int]], None]
    validate: Callable[[Any], None] = lambda obj: None

    def block_shapes(self, a, b) -> List[Tuple[int, int]]:
        da, db = self.block_dims(a), self.block_dims(b)
        if len(da) != len(db):
            raise ShapeMismatch(f"{self.name}: objects have {len(da)} and {len(db)} blocks")
        return [(db[k], da[k]) for k in range(len(da))]

    def hom_space(self, a, b) -> SolutionSpace:
        system = LinearSystem(self.block_shapes(a, b))
        self.add_equations(system, a, b, list(range(len(system.block_shapes))))
        return system.solve()

    def identity(self, a) -> Components:
        return tuple(identity(d) for d in self.block_dims(a))

    def compose(self, f: Sequence[ExactMatrix], g: Sequence[ExactMatrix]) -> Components:
        """f ∘ g"""
        if len(f) != len(g):
            raise CompositionMismatch(f"{self.name}: morphisms have {len(f)} and {len(g)} blocks")
        try:
            return tuple(x @ y for x, y in zip(f, g))
        except ShapeMismatch as exc:
            raise CompositionMismatch(f"{self.name}: {exc.message}")

    def flatten(self, a, b, components: Sequence[ExactMatrix]) -> ExactMatrix:
        return flatten_blocks(components, self.block_shapes(a, b))

    def is_morphism(self, a, b, components: Sequence[ExactMatrix]) -> bool:
        try:
            vector = self.flatten(a, b, components)
        except ShapeMismatch:
            return False
        return self.hom_space(a, b).contains(vector)

    def is_isomorphism(self, components: Sequence[ExactMatrix]) -> bool:
        return all(is_invertible(c) for c in components)

    def inverse(self, components: Sequence[ExactMatrix]) -> Components:
        return tuple(invert(c) for c in components)

    def find_isomorphism(self, a, b, attempts: int = 8) -> Optional[Components]:
        if self.block_dims(a) != self.block_dims(b):
            return None
        for blocks in candidate_elements(self.hom_space(a, b), attempts):
            if self.is_isomorphism(blocks):
                return tuple(blocks)
        return None


@dataclass(frozen=True, eq=False)
class FunctorData:
    """
    A linear functor between presented categories

    ``morphism_map(a, b, components)`` sends a morphism a → b to one
    F(a) → F(b).
    """

    name: str
    source: PresentedCategory
    target: PresentedCategory
    object_map: Callable[[Any], Any]
    morphism_map: Callable[[Any, Any, Components], Components]

    def __call__(self, obj):
        return self.object_map(obj)

    def on_morphism(self, a, b, components: Sequence[ExactMatrix]) -> Components:
        return tuple(self.morphism_map(a, b, tuple(components)))

    def matrix(self, a, b) -> ExactMatrix:
        """Matrix of the morphism map on flattened blocks, evaluated on unit blocks"""
        source_shapes = self.source.block_shapes(a, b)
        fa, fb = self(a), self(b)
        target_shapes = self.target.block_shapes(fa, fb)
        size = sum(r * c for r, c in source_shapes)
        columns = []
        eye = identity(size)
        for position in range(size):
            unit = eye.column(position)
            blocks = _unflatten(unit, source_shapes)
            columns.append(flatten_blocks(self.on_morphism(a, b, blocks), target_shapes))
        if not columns:
            return zeros(sum(r * c for r, c in target_shapes), 0)
        return hstack(*columns)


def split_columns(coefficients: ExactMatrix, shapes: Sequence[Tuple[int, int]],
                  blocks: Sequence[int]) -> Dict[int, ExactMatrix]:
    """Cut a coefficient matrix over consecutive flattened blocks into per-block pieces"""
    out = {}
    offset = 0
    for block, (rows, cols) in zip(blocks, shapes):
        size = rows * cols
        out[block] = coefficients.submatrix(range(coefficients.rows), range(offset, offset + size))
        offset += size
    return out


def row_block(m: ExactMatrix, shapes: Sequence[Tuple[int, int]], k: int) -> ExactMatrix:
    start = sum(r * c for r, c in shapes[:k])
    rows, cols = shapes[k]
    return m.submatrix(range(start, start + rows * cols), range(m.cols))


def _unflatten(vector: ExactMatrix, shapes: Sequence[Tuple[int, int]]) -> Components:
    return SolutionSpace(vector.rows, (), tuple(shapes)).unflatten(vector)


def componentwise_functor(name: str, source: PresentedCategory, target: PresentedCategory,
                          object_map: Callable[[Any], Any]) -> FunctorData:
    """A functor that keeps morphism blocks unchanged"""
    return FunctorData(name, source, target, object_map, lambda a, b, comps: comps)


def identity_functor(category: PresentedCategory) -> FunctorData:
    return componentwise_functor(f"id[{category.name}]", category, category, lambda obj: obj)


def compose_functors(f: FunctorData, g: FunctorData) -> FunctorData:
    """f ∘ g"""
    if g.target is not f.source:
        raise CategoryMismatch(f"cannot compose {f.name} after {g.name}")
    return FunctorData(
        f"{f.name}∘{g.name}", g.source, f.target,
        lambda obj: f(g(obj)),
        lambda a, b, comps: f.on_morphism(g(a), g(b), g.on_morphism(a, b, comps)),
    )


# ---------------------------------------------------------------------------
# Category instances
# ---------------------------------------------------------------------------

def _quiver_equations(system: LinearSystem, a: Quiver, b: Quiver, blocks: Sequence[int]) -> None:
    if a.n != b.n:
        raise ShapeMismatch(f"quivers on {a.n} and {b.n} points")
    add_morphism_equations(system, a, b, blocks)


def _ls_equations(system: LinearSystem, a: LocalSystemQuiver, b: LocalSystemQuiver,
                  blocks: Sequence[int]) -> None:
    for i in range(a.n):
        system.add_equation([
            Term(blocks[i], identity(b.dims[i]), a.monodromies[i]),
            Term(blocks[i], -b.monodromies[i], identity(a.dims[i])),
        ])


def quiver_category() -> PresentedCategory:
    return PresentedCategory("Q", lambda q: q.dims, _quiver_equations, validate_quiver)


def local_system_category() -> PresentedCategory:
    return PresentedCategory("L", lambda ls: ls.dims, _ls_equations, validate_local_system)


def equivariant_quiver_category(kernel: ActionKernel) -> PresentedCategory:
    def equations(system, x: EquivariantQuiver, y: EquivariantQuiver, blocks):
        add_morphism_equations(system, x.quiver, y.quiver, blocks)
        add_equivariance_equations(system, kernel.presentation, x.structure, y.structure,
                                   x.quiver.dims, y.quiver.dims, blocks)

    return PresentedCategory(
        f"Q_Phi[{kernel.name}]", lambda x: x.quiver.dims, equations,
        lambda x: validate_equivariant(x, kernel),
    )


def equivariant_local_system_category(presentation: GroupPresentation) -> PresentedCategory:
    def equations(system, a: EquivariantLocalSystem, b: EquivariantLocalSystem, blocks):
        _ls_equations(system, a.ls, b.ls, blocks)
        add_equivariance_equations(system, presentation, a.structure, b.structure,
                                   a.ls.dims, b.ls.dims, blocks)

    return PresentedCategory("L_Psi", lambda a: a.ls.dims, equations, validate_equivariant_local_system)


def point_category() -> PresentedCategory:
    """One object whose endomorphisms are the scalars"""
    return PresentedCategory("pt", lambda obj: (1,), lambda system, a, b, blocks: None)


# ---------------------------------------------------------------------------
# Functor instances
# ---------------------------------------------------------------------------

def vanishing_cycles_functor(source: Optional[PresentedCategory] = None,
                             target: Optional[PresentedCategory] = None) -> FunctorData:
    return componentwise_functor("vc", source or quiver_category(), target or local_system_category(),
                                 vanishing_cycles)


def restriction_functor(kernel: ActionKernel, source: Optional[PresentedCategory] = None,
                        target: Optional[PresentedCategory] = None) -> FunctorData:
    """Forget the equivariant structure of a quiver"""
    return componentwise_functor("restrict", source or equivariant_quiver_category(kernel),
                                 target or quiver_category(), lambda x: x.quiver)


def local_system_functor(kernel: ActionKernel, source: Optional[PresentedCategory] = None,
                         target: Optional[PresentedCategory] = None) -> FunctorData:
    """Vanishing cycles of an equivariant quiver, keeping its structure maps"""
    return componentwise_functor(
        "ls", source or equivariant_quiver_category(kernel),
        target or equivariant_local_system_category(kernel.presentation), ls_functor,
    )


def forget_local_system_equivariance(presentation: GroupPresentation,
                                     source: Optional[PresentedCategory] = None,
                                     target: Optional[PresentedCategory] = None) -> FunctorData:
    return componentwise_functor(
        "forget", source or equivariant_local_system_category(presentation),
        target or local_system_category(), lambda a: a.ls,
    )


def conjugation_functor(category: PresentedCategory, changes: Sequence[ExactMatrix]) -> FunctorData:
    """
    Quiver self-equivalence transporting all data along fixed invertible P_i

    Objects go to m_ji ↦ P_j m_ji P_i⁻¹ and morphisms to τ_i ↦ P_i τ_i P_i⁻¹.
    """
    changes = tuple(changes)
    inverses = tuple(invert(p) for p in changes)

    def on_object(q: Quiver) -> Quiver:
        if q.dims != tuple(p.rows for p in changes):
            raise ShapeMismatch("conjugation matrices do not match the quiver dimensions")
        return conjugate_quiver(q, changes, inverses)

    def on_morphism(a, b, comps):
        return tuple(p @ c @ p_inv for p, c, p_inv in zip(changes, comps, inverses))

    return FunctorData("conjugate", category, category, on_object, on_morphism)


def constant_functor(target: PresentedCategory, obj, source: Optional[PresentedCategory] = None) -> FunctorData:
    """From the point category: the scalar c goes to c·id"""
    def on_morphism(a, b, comps):
        c = comps[0][0, 0]
        return tuple(identity(d).scale(c) for d in target.block_dims(obj))

    return FunctorData("constant", source or point_category(), target, lambda _: obj, on_morphism)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_functor(functor: FunctorData, objects: Sequence[Any]) -> List[Dict[str, Any]]:
    """
    Test a functor on every pair of sample objects

    Returns:
        list of failures, each a witness dictionary; empty when the functor
        maps objects to valid objects, Hom bases into Hom-spaces, identities
        to identities and composites of basis morphisms to composites
    """
    failures: List[Dict[str, Any]] = []
    images = [functor(obj) for obj in objects]
    for index, image in enumerate(images):
        try:
            functor.target.validate(image)
        except WorkbenchError as exc:
            failures.append({"check": "object", "object": index, "message": exc.message})
            continue
        if functor.on_morphism(objects[index], objects[index], functor.source.identity(objects[index])) \
                != functor.target.identity(image):
            failures.append({"check": "identity", "object": index})
    bases = {}
    for i, j in product(range(len(objects)), repeat=2):
        bases[i, j] = functor.source.hom_space(objects[i], objects[j]).block_basis()
        for position, f in enumerate(bases[i, j]):
            image = functor.on_morphism(objects[i], objects[j], f)
            if not functor.target.is_morphism(images[i], images[j], image):
                failures.append({"check": "morphism", "pair": [i, j], "basis": position})
    for i, j, k in product(range(len(objects)), repeat=3):
        for g in bases[i, j][:2]:
            for f in bases[j, k][:2]:
                lhs = functor.on_morphism(objects[i], objects[k], functor.source.compose(f, g))
                rhs = functor.target.compose(
                    functor.on_morphism(objects[j], objects[k], f),
                    functor.on_morphism(objects[i], objects[j], g),
                )
                if lhs != rhs:
                    failures.append({"check": "composition", "objects": [i, j, k]})
    return failures


@dataclass
class EquivalenceReport:
    """Freyd criteria of a functor on finite object lists"""

    functor: str
    hom_checks: List[Dict[str, Any]] = field(default_factory=list)
    essential: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(h["bijective"] for h in self.hom_checks) and all(
            e["source"] is not None for e in self.essential
        )

    @property
    def witness(self) -> Optional[Dict[str, Any]]:
        for h in self.hom_checks:
            if not h["bijective"]:
                return {"check": "hom", **h}
        for e in self.essential:
            if e["source"] is None:
                return {"check": "essential", **e}
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {"functor": self.functor, "ok": self.ok, "hom_checks": self.hom_checks,
                "essential": self.essential, "witness": self.witness}


def check_equivalence(functor: FunctorData, source_objects: Sequence[Any],
                      target_objects: Sequence[Any] = ()) -> EquivalenceReport:
    """
    Hom bijectivity on all source pairs and essential surjectivity onto the
    target objects

    The induced map Hom(a, b) → Hom(Fa, Fb) is bijective when it is injective
    on a basis and both spaces have the same dimension.
    """
    report = EquivalenceReport(functor.name)
    for i, j in product(range(len(source_objects)), repeat=2):
        a, b = source_objects[i], source_objects[j]
        source_space = functor.source.hom_space(a, b)
        target_space = functor.target.hom_space(functor(a), functor(b))
        if source_space.dimension:
            images = functor.matrix(a, b) @ source_space.basis_matrix()
            injective = rank(images) == source_space.dimension
        else:
            injective = True
        report.hom_checks.append({
            "pair": [i, j],
            "dim_source": source_space.dimension,
            "dim_target": target_space.dimension,
            "injective": injective,
            "bijective": injective and source_space.dimension == target_space.dimension,
        })
    images = [functor(a) for a in source_objects]
    for t, obj in enumerate(target_objects):
        match = next(
            (s for s, image in enumerate(images)
             if functor.target.find_isomorphism(image, obj) is not None),
            None,
        )
        report.essential.append({"target": t, "source": match})
    logger.debug("equivalence check of %s: ok=%s", functor.name, report.ok)
    return report

