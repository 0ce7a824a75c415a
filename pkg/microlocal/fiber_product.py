"""
Fiber Products of Categories
Triples (a, b, r) over two functors into a common category, the embedding
delta of equivariant quivers, morphism lifting and the Ore square
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .categories import (
    Components,
    EquivalenceReport,
    FunctorData,
    PresentedCategory,
    check_equivalence,
    equivariant_local_system_category,
    equivariant_quiver_category,
    forget_local_system_equivariance,
    local_system_category,
    local_system_functor,
    quiver_category,
    restriction_functor,
    row_block,
    split_columns,
    vanishing_cycles_functor,
)
from .equivariant import (
    ActionKernel,
    EquivariantQuiver,
    hom_equivariant,
    is_equivariant_morphism,
    ls_functor,
    restrict,
)
from .errors import CategoryMismatch, LiftVerificationFailed, NotAnEquivalence, ShapeMismatch
from .exact_kernel import ExactMatrix, LinearSystem, identity, kron

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiberProductObject:
    a: Any
    b: Any
    r: Components


@dataclass(frozen=True)
class FiberProductMorphism:
    f: Components
    g: Components


@dataclass(frozen=True, eq=False)
class FiberProductCategory(PresentedCategory):
    """c1 ×_c0 c2; morphism blocks are the blocks of f followed by those of g"""

    c1: Optional[PresentedCategory] = None
    c2: Optional[PresentedCategory] = None
    c0: Optional[PresentedCategory] = None
    alpha: Optional[FunctorData] = None
    beta: Optional[FunctorData] = None

    def split(self, x: FiberProductObject, components: Sequence[ExactMatrix]) -> FiberProductMorphism:
        k = len(self.c1.block_dims(x.a))
        return FiberProductMorphism(tuple(components[:k]), tuple(components[k:]))

    def join(self, m: FiberProductMorphism) -> Components:
        return tuple(m.f) + tuple(m.g)


def build_fiber_product(c1: PresentedCategory, c2: PresentedCategory, c0: PresentedCategory,
                        alpha: FunctorData, beta: FunctorData, name: Optional[str] = None) -> FiberProductCategory:
    """
    The category of triples (a, b, r) with r: alpha(a) → beta(b) invertible

    A morphism (a, b, r) → (a', b', r') is a pair (f, g) with
    beta(g)·r = r'·alpha(f), solved jointly with the Hom equations of c1
    and c2.

    Raises:
        CategoryMismatch: if alpha or beta does not run between the given categories
    """
    if alpha.source is not c1 or alpha.target is not c0:
        raise CategoryMismatch(f"{alpha.name} does not run from {c1.name} to {c0.name}")
    if beta.source is not c2 or beta.target is not c0:
        raise CategoryMismatch(f"{beta.name} does not run from {c2.name} to {c0.name}")

    def block_dims(x: FiberProductObject) -> Tuple[int, ...]:
        return tuple(c1.block_dims(x.a)) + tuple(c2.block_dims(x.b))

    def add_equations(system: LinearSystem, x: FiberProductObject, y: FiberProductObject,
                      blocks: Sequence[int]) -> None:
        k = len(c1.block_dims(x.a))
        f_blocks, g_blocks = list(blocks[:k]), list(blocks[k:])
        c1.add_equations(system, x.a, y.a, f_blocks)
        c2.add_equations(system, x.b, y.b, g_blocks)
        f_shapes = c1.block_shapes(x.a, y.a)
        g_shapes = c2.block_shapes(x.b, y.b)
        alpha_matrix = alpha.matrix(x.a, y.a)
        beta_matrix = beta.matrix(x.b, y.b)
        alpha_shapes = c0.block_shapes(alpha(x.a), alpha(y.a))
        beta_shapes = c0.block_shapes(beta(x.b), beta(y.b))
        for index in range(len(x.r)):
            r, r_next = x.r[index], y.r[index]
            # vec(beta(g)_k r_k) = (I ⊗ r_kᵀ) vec(beta(g)_k), vec(r'_k alpha(f)_k) = (r'_k ⊗ I) vec(alpha(f)_k)
            on_g = kron(identity(beta_shapes[index][0]), r.T) @ row_block(beta_matrix, beta_shapes, index)
            on_f = kron(r_next, identity(alpha_shapes[index][1])) @ row_block(alpha_matrix, alpha_shapes, index)
            coefficients = split_columns(on_g, g_shapes, g_blocks)
            for block, m in split_columns(-on_f, f_shapes, f_blocks).items():
                coefficients[block] = m
            system.add_rows(coefficients)

    def validate(x: FiberProductObject) -> None:
        c1.validate(x.a)
        c2.validate(x.b)
        source, target = alpha(x.a), beta(x.b)
        if not c0.is_isomorphism(x.r) or len(x.r) != len(c0.block_dims(source)):
            raise ShapeMismatch("r is not an isomorphism")
        if not c0.is_morphism(source, target, x.r):
            raise ShapeMismatch("r is not a morphism alpha(a) → beta(b)")

    return FiberProductCategory(
        name or f"{c1.name} x_{c0.name} {c2.name}", block_dims, add_equations, validate,
        c1=c1, c2=c2, c0=c0, alpha=alpha, beta=beta,
    )


def first_projection(fiber: FiberProductCategory) -> FunctorData:
    def on_morphism(x, y, comps):
        return fiber.split(x, comps).f

    return FunctorData("p1", fiber, fiber.c1, lambda x: x.a, on_morphism)


def second_projection(fiber: FiberProductCategory) -> FunctorData:
    def on_morphism(x, y, comps):
        return fiber.split(x, comps).g

    return FunctorData("p2", fiber, fiber.c2, lambda x: x.b, on_morphism)


def factor_through(fiber: FiberProductCategory, to_first: FunctorData, to_second: FunctorData,
                   comparison: Callable[[Any], Components]) -> FunctorData:
    """
    The functor D → c1 ×_c0 c2 induced by D → c1, D → c2 and natural
    isomorphisms comparison(d): alpha(to_first d) → beta(to_second d)

    Its composites with the two projections are to_first and to_second.
    """
    if to_first.target is not fiber.c1 or to_second.target is not fiber.c2:
        raise CategoryMismatch("factoring functors do not land in the factors of the fiber product")
    if to_first.source is not to_second.source:
        raise CategoryMismatch("factoring functors have different sources")

    def on_object(d):
        return FiberProductObject(to_first(d), to_second(d), tuple(comparison(d)))

    def on_morphism(d, e, comps):
        return tuple(to_first.on_morphism(d, e, comps)) + tuple(to_second.on_morphism(d, e, comps))

    return FunctorData("factor", to_first.source, fiber, on_object, on_morphism)


# ---------------------------------------------------------------------------
# Equivariant quivers inside the fiber product
# ---------------------------------------------------------------------------

def delta_target_category(kernel: ActionKernel) -> FiberProductCategory:
    """L_Psi ×_L Q: equivariant local systems, quivers and an isomorphism of their local systems"""
    c1 = equivariant_local_system_category(kernel.presentation)
    c2 = quiver_category()
    c0 = local_system_category()
    alpha = forget_local_system_equivariance(kernel.presentation, c1, c0)
    beta = vanishing_cycles_functor(c2, c0)
    return build_fiber_product(c1, c2, c0, alpha, beta)


def delta(x: EquivariantQuiver) -> FiberProductObject:
    """(ls(x), x without structure, identity)"""
    return FiberProductObject(ls_functor(x), restrict(x), tuple(identity(d) for d in x.quiver.dims))


def delta_morphism(components: Sequence[ExactMatrix]) -> FiberProductMorphism:
    return FiberProductMorphism(tuple(components), tuple(components))


def delta_functor(kernel: ActionKernel, fiber: Optional[FiberProductCategory] = None) -> FunctorData:
    """delta as the functor induced by ls and the restriction, compared by identities"""
    fiber = fiber or delta_target_category(kernel)
    source = equivariant_quiver_category(kernel)
    induced = factor_through(
        fiber, local_system_functor(kernel, source, fiber.c1), restriction_functor(kernel, source, fiber.c2),
        lambda x: tuple(identity(d) for d in x.quiver.dims),
    )
    return replace(induced, name="delta")


def lift_morphism(tau: FiberProductMorphism, x: EquivariantQuiver, y: EquivariantQuiver) -> Components:
    """
    The equivariant morphism σ with delta(σ) = tau

    σ is the quiver component of tau; it is checked against both the quiver
    and the equivariance conditions.

    Raises:
        LiftVerificationFailed: if tau is not a morphism between delta(x) and delta(y)
    """
    sigma = tuple(tau.g)
    if len(sigma) != x.quiver.n or any(
        s.shape != (y.quiver.dims[i], x.quiver.dims[i]) for i, s in enumerate(sigma)
    ):
        raise LiftVerificationFailed("quiver component has the wrong shape")
    if not is_equivariant_morphism(x, y, sigma):
        raise LiftVerificationFailed("quiver component is not an equivariant morphism",
                                     {"components": len(sigma)})
    if delta_morphism(sigma) != tau:
        raise LiftVerificationFailed("local-system component differs from the quiver component")
    logger.debug("lifted a fiber-product morphism on %d points", len(sigma))
    return sigma


@dataclass
class FullFaithfulnessReport:
    dim_equivariant: int
    dim_fiber: int

    @property
    def equal(self) -> bool:
        return self.dim_equivariant == self.dim_fiber

    def to_dict(self) -> Dict[str, Any]:
        return {"dim_equivariant": self.dim_equivariant, "dim_fiber": self.dim_fiber, "equal": self.equal}


def full_faithfulness_check(x: EquivariantQuiver, y: EquivariantQuiver,
                            fiber: Optional[FiberProductCategory] = None) -> FullFaithfulnessReport:
    """Compare Hom dimensions before and after delta, solved independently"""
    fiber = fiber or delta_target_category(x.kernel)
    dim_equivariant = hom_equivariant(x, y).dimension
    dim_fiber = fiber.hom_space(delta(x), delta(y)).dimension
    return FullFaithfulnessReport(dim_equivariant, dim_fiber)


# ---------------------------------------------------------------------------
# Ore square
# ---------------------------------------------------------------------------

@dataclass
class OreSquare:
    category: FiberProductCategory
    f_prime: FunctorData
    g_prime: FunctorData
    objects: List[FiberProductObject]
    report: EquivalenceReport


def ore_square(f: FunctorData, g: FunctorData, a_objects: Sequence[Any],
               c_objects: Sequence[Any]) -> OreSquare:
    """
    Complete f: A → B (an equivalence) and g: C → B to a square through
    B' = A ×_B C

    Objects of B' are triples (a, c, φ) with φ: f(a) ≅ g(c); one is built
    for every c in c_objects. The base change f': B' → C is checked with
    the Freyd criteria on those objects.

    Raises:
        NotAnEquivalence: if f or f' fails the criteria, with the witness
    """
    if f.target is not g.target:
        raise CategoryMismatch(f"{f.name} and {g.name} have different targets")
    f_report = check_equivalence(f, a_objects, [g(c) for c in c_objects])
    if not f_report.ok:
        raise NotAnEquivalence(f"{f.name} is not an equivalence on the given objects",
                               {"functor": f.name, **(f_report.witness or {})})
    fiber = build_fiber_product(f.source, g.source, f.target, f, g)
    objects = []
    for entry, c in zip(f_report.essential, c_objects):
        a = a_objects[entry["source"]]
        phi = f.target.find_isomorphism(f(a), g(c))
        objects.append(FiberProductObject(a, c, phi))
    f_prime = second_projection(fiber)
    g_prime = first_projection(fiber)
    report = check_equivalence(f_prime, objects, list(c_objects))
    if not report.ok:
        raise NotAnEquivalence("base change is not an equivalence on the given objects",
                               {"functor": "f'", **(report.witness or {})})
    return OreSquare(fiber, f_prime, g_prime, objects, report)
