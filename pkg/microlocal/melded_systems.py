"""
Melded Systems
Triples (a, b, gamma): a local system on the groupoid of the zero-section
stratum, an equivariant quiver family over a sheet covering, and the gluing
isomorphism between their pullbacks
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from .equivariant import (
    EquivariantLocalSystem,
    EquivariantQuiver,
    GroupPresentation,
    Word,
    add_equivariance_equations,
    format_word,
    validate_equivariant,
    validate_presentation,
)
from .errors import (
    GammaViolation,
    ModelMismatch,
    RelationViolation,
    ShapeMismatch,
    Singular,
    UnknownGenerator,
)
from .exact_kernel import (
    ExactMatrix,
    LinearSystem,
    SolutionSpace,
    Term,
    identity,
    invert,
    is_invertible,
)
from .quiver_core import LocalSystemQuiver, add_morphism_equations

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupoidArrow:
    name: str
    source: str
    target: str


@dataclass(frozen=True)
class Lambda0Model:
    """
    Presentation of a finite groupoid: objects, generating arrows and loop
    relations based at an object

    ``twist`` holds a ±1 sign per arrow (the orientation twist); arrows
    without an entry are untwisted.
    """

    objects: Tuple[str, ...]
    arrows: Tuple[GroupoidArrow, ...]
    relations: Tuple[Tuple[str, Word], ...] = ()
    twist: Tuple[Tuple[str, int], ...] = ()

    def arrow(self, name: str) -> GroupoidArrow:
        for a in self.arrows:
            if a.name == name:
                return a
        raise UnknownGenerator(f"unknown arrow {name!r}", {"arrow": name})

    def sign(self, name: str) -> int:
        return dict(self.twist).get(name, 1)

    def components(self) -> List[List[str]]:
        graph = nx.MultiGraph()
        graph.add_nodes_from(self.objects)
        graph.add_edges_from((a.source, a.target) for a in self.arrows)
        return sorted(sorted(c, key=self.objects.index) for c in nx.connected_components(graph))


def word_endpoint(model: Lambda0Model, start: str, word: Word) -> str:
    """Follow a word of arrows from ``start``; raises ShapeMismatch if it does not compose"""
    where = start
    for name, exponent in word:
        a = model.arrow(name)
        tail, head = (a.source, a.target) if exponent == 1 else (a.target, a.source)
        if tail != where:
            raise ShapeMismatch(f"arrow {name} does not start at {where}", {"arrow": name, "at": where})
        where = head
    return where


def validate_lambda0_model(model: Lambda0Model) -> None:
    names = [a.name for a in model.arrows]
    if len(set(names)) != len(names):
        raise ShapeMismatch("arrow names must be distinct")
    for a in model.arrows:
        if a.source not in model.objects or a.target not in model.objects:
            raise ShapeMismatch(f"arrow {a.name} has an unknown endpoint", {"arrow": a.name})
    for base, word in model.relations:
        if base not in model.objects:
            raise ShapeMismatch(f"relation based at unknown object {base}")
        if word_endpoint(model, base, word) != base:
            raise ShapeMismatch(f"relation {format_word(word)} is not a loop at {base}",
                                {"word": format_word(word)})
    for name, sign in model.twist:
        model.arrow(name)
        if sign not in (1, -1):
            raise ShapeMismatch(f"twist of {name} must be +1 or -1", {"arrow": name})


@dataclass(frozen=True)
class Lambda0Object:
    """A representation of the groupoid: a space per object, a matrix per arrow"""

    model: Lambda0Model
    dims: Tuple[int, ...]
    matrices: Tuple[ExactMatrix, ...]

    def dim(self, obj: str) -> int:
        return self.dims[self.model.objects.index(obj)]

    def matrix(self, name: str, twisted: bool = True) -> ExactMatrix:
        index = [a.name for a in self.model.arrows].index(name)
        m = self.matrices[index]
        return -m if twisted and self.model.sign(name) == -1 else m


def evaluate_word(a: Lambda0Object, start: str, word: Word, twisted: bool = True) -> ExactMatrix:
    """Matrix of a path, first letter applied first"""
    total = identity(a.dim(start))
    word_endpoint(a.model, start, word)
    for name, exponent in word:
        step = a.matrix(name, twisted)
        total = (step if exponent == 1 else invert(step)) @ total
    return total


def validate_lambda0_object(a: Lambda0Object) -> None:
    """
    Raises:
        ShapeMismatch: on malformed matrices
        Singular: for a non-invertible arrow matrix
        RelationViolation: if a twisted relation does not evaluate to the identity
    """
    model = a.model
    validate_lambda0_model(model)
    if len(a.dims) != len(model.objects) or len(a.matrices) != len(model.arrows):
        raise ShapeMismatch("one dimension per object and one matrix per arrow are required")
    for arrow, m in zip(model.arrows, a.matrices):
        expected = (a.dim(arrow.target), a.dim(arrow.source))
        if m.shape != expected:
            raise ShapeMismatch(f"matrix of {arrow.name} has shape {m.shape}, expected {expected}",
                                {"arrow": arrow.name})
        if not is_invertible(m):
            raise Singular(f"matrix of {arrow.name} is not invertible", {"arrow": arrow.name})
    for base, word in model.relations:
        if evaluate_word(a, base, word) != identity(a.dim(base)):
            raise RelationViolation(format_word(word), reason=f"monodromy at {base}")


def hom_lambda0(a: Lambda0Object, b: Lambda0Object) -> SolutionSpace:
    """Families f_o with f_t A(arrow) = B(arrow) f_s for every arrow s → t"""
    if a.model != b.model:
        raise ModelMismatch("representations of different groupoids")
    system = LinearSystem([(b.dims[k], a.dims[k]) for k in range(len(a.dims))])
    _add_lambda0_equations(system, a, b, list(range(len(a.dims))))
    return system.solve()


def _add_lambda0_equations(system: LinearSystem, a: Lambda0Object, b: Lambda0Object,
                           blocks: Sequence[int]) -> None:
    objects = a.model.objects
    for arrow in a.model.arrows:
        s, t = objects.index(arrow.source), objects.index(arrow.target)
        system.add_equation([
            Term(blocks[t], identity(b.dims[t]), a.matrix(arrow.name, twisted=False)),
            Term(blocks[s], -b.matrix(arrow.name, twisted=False), identity(a.dims[s])),
        ])


# ---------------------------------------------------------------------------
# Sheet covering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lambda1Model:
    """
    The group acting on the sheets, with the sheets that collide around each
    boundary generator
    """

    presentation: GroupPresentation
    collisions: Tuple[Tuple[str, Tuple[Tuple[int, ...], ...]], ...] = ()

    def partition(self, generator: str) -> Tuple[Tuple[int, ...], ...]:
        for g, blocks in self.collisions:
            if g == generator:
                return blocks
        raise UnknownGenerator(f"{generator!r} is not a boundary generator", {"generator": generator})


def validate_lambda1_model(model: Lambda1Model) -> None:
    p = model.presentation
    validate_presentation(p)
    for g, blocks in model.collisions:
        perm = p.perm(g)
        covered = sorted(i for block in blocks for i in block)
        if covered != list(range(p.n)):
            raise ShapeMismatch(f"collision data of {g} is not a partition of the sheets", {"generator": g})
        for block in blocks:
            if {perm[i] for i in block} != set(block):
                raise ShapeMismatch(f"{g} does not preserve the colliding block {list(block)}",
                                    {"generator": g, "block": [i + 1 for i in block]})


@dataclass(frozen=True)
class CoveringData:
    """
    The map from sheets to the groupoid

    Sheet i sits over ``sheet_objects[i]``; its fibre loop is the word
    ``fiber_words[i]``; generator g lifts to the path ``lift_words[g][i]``
    from the object of sheet i to the object of sheet g(i).
    """

    sheet_objects: Tuple[str, ...]
    fiber_words: Tuple[Word, ...]
    lift_words: Tuple[Tuple[str, Tuple[Word, ...]], ...] = ()

    def lift(self, generator: str) -> Tuple[Word, ...]:
        for g, words in self.lift_words:
            if g == generator:
                return words
        raise UnknownGenerator(f"no lift recorded for {generator!r}", {"generator": generator})


def validate_covering(lambda0: Lambda0Model, lambda1: Lambda1Model, covering: CoveringData) -> None:
    p = lambda1.presentation
    if len(covering.sheet_objects) != p.n or len(covering.fiber_words) != p.n:
        raise ModelMismatch(f"covering data describes {len(covering.sheet_objects)} sheets, model has {p.n}")
    for i, (obj, word) in enumerate(zip(covering.sheet_objects, covering.fiber_words)):
        if obj not in lambda0.objects:
            raise ModelMismatch(f"sheet {i + 1} sits over unknown object {obj}")
        if word_endpoint(lambda0, obj, word) != obj:
            raise ModelMismatch(f"fibre word of sheet {i + 1} is not a loop", {"index": i + 1})
    for g in p.generators:
        perm = p.perm(g)
        words = covering.lift(g)
        if len(words) != p.n:
            raise ModelMismatch(f"lift of {g} needs one word per sheet")
        for i, word in enumerate(words):
            end = word_endpoint(lambda0, covering.sheet_objects[i], word)
            if end != covering.sheet_objects[perm[i]]:
                raise ModelMismatch(f"lift of {g} at sheet {i + 1} ends at {end}",
                                    {"generator": g, "index": i + 1})


def pullback_local_system(a: Lambda0Object, lambda1: Lambda1Model,
                          covering: CoveringData) -> EquivariantLocalSystem:
    """s*a as an equivariant local system on the sheets"""
    p = lambda1.presentation
    dims = tuple(a.dim(obj) for obj in covering.sheet_objects)
    monodromies = tuple(
        evaluate_word(a, obj, word) for obj, word in zip(covering.sheet_objects, covering.fiber_words)
    )
    structure = tuple(
        tuple(evaluate_word(a, covering.sheet_objects[i], covering.lift(g)[i]) for i in range(p.n))
        for g in p.generators
    )
    return EquivariantLocalSystem(LocalSystemQuiver(dims, monodromies), p, structure)


@dataclass(frozen=True)
class MeldedObject:
    lambda1: Lambda1Model
    covering: CoveringData
    a: Lambda0Object
    b: EquivariantQuiver
    gamma: Tuple[ExactMatrix, ...]

    @property
    def lambda0(self) -> Lambda0Model:
        return self.a.model


def validate_melded(m: MeldedObject) -> None:
    """
    Check every component and the gluing isomorphism

    gamma_i maps the pulled-back space of sheet i to the quiver space M_i and
    must intertwine the fibre monodromy with 1 + m_ii and each lifted path
    with the structure map of b.

    Raises:
        GammaViolation: with the failing generator ("fiber" for the monodromy) and 1-based sheet index
        ModelMismatch: if a, b and the covering describe different models
    """
    validate_lambda0_object(m.a)
    validate_lambda1_model(m.lambda1)
    validate_covering(m.lambda0, m.lambda1, m.covering)
    if m.b.presentation != m.lambda1.presentation:
        raise ModelMismatch("equivariant quiver is over a different presentation")
    validate_equivariant(m.b)
    pulled = pullback_local_system(m.a, m.lambda1, m.covering)
    q = m.b.quiver
    p = m.lambda1.presentation
    if len(m.gamma) != p.n:
        raise ShapeMismatch(f"{len(m.gamma)} gluing maps for {p.n} sheets")
    for i, g in enumerate(m.gamma):
        if g.shape != (q.dims[i], pulled.ls.dims[i]) or not is_invertible(g):
            raise GammaViolation(f"gamma_{i + 1} is not an isomorphism", {"index": i + 1})
    for i, g in enumerate(m.gamma):
        vanishing = identity(q.dims[i]) + q.maps[i][i]
        if g @ pulled.ls.monodromies[i] != vanishing @ g:
            raise GammaViolation(f"gamma_{i + 1} does not intertwine the fibre monodromy",
                                 {"generator": "fiber", "index": i + 1})
    for k, generator in enumerate(p.generators):
        perm = p.point_action[k]
        for i in range(p.n):
            if m.gamma[perm[i]] @ pulled.structure[k][i] != m.b.structure[k][i] @ m.gamma[i]:
                raise GammaViolation(f"gamma does not intertwine {generator} at sheet {i + 1}",
                                     {"generator": generator, "index": i + 1})


def induced_models(b: EquivariantQuiver) -> Tuple[Lambda0Model, CoveringData, Lambda0Object]:
    """
    The groupoid generated by the sheets of an equivariant family

    One object per sheet, a fibre loop l<i> per sheet carrying 1 + m_ii and
    an arrow g@<i> from sheet i to sheet g(i) carrying gamma_{i,g}. Relations
    make the arrows commute with the fibre loops and make every group
    relation hold at every sheet.
    """
    p = b.presentation
    q = b.quiver
    objects = tuple(f"s{i + 1}" for i in range(p.n))
    arrows = [GroupoidArrow(f"l{i + 1}", objects[i], objects[i]) for i in range(p.n)]
    matrices = [identity(q.dims[i]) + q.maps[i][i] for i in range(p.n)]
    for k, g in enumerate(p.generators):
        perm = p.point_action[k]
        for i in range(p.n):
            arrows.append(GroupoidArrow(f"{g}@{i + 1}", objects[i], objects[perm[i]]))
            matrices.append(b.structure[k][i])

    relations = []
    for k, g in enumerate(p.generators):
        perm = p.point_action[k]
        for i in range(p.n):
            relations.append((objects[i], (
                (f"l{i + 1}", 1), (f"{g}@{i + 1}", 1), (f"l{perm[i] + 1}", -1), (f"{g}@{i + 1}", -1),
            )))
    for word in p.relations:
        for i in range(p.n):
            path = []
            where = i
            for g, exponent in word:
                if exponent == 1:
                    path.append((f"{g}@{where + 1}", 1))
                    where = p.perm(g)[where]
                else:
                    where = p.letter_perm((g, -1))[where]
                    path.append((f"{g}@{where + 1}", -1))
            relations.append((objects[i], tuple(path)))

    model = Lambda0Model(objects, tuple(arrows), tuple(relations))
    covering = CoveringData(
        objects,
        tuple(((f"l{i + 1}", 1),) for i in range(p.n)),
        tuple((g, tuple(((f"{g}@{i + 1}", 1),) for i in range(p.n))) for g in p.generators),
    )
    return model, covering, Lambda0Object(model, tuple(q.dims), tuple(matrices))


def from_equivariant_family(b: EquivariantQuiver, model: Optional[Lambda1Model] = None) -> MeldedObject:
    """The melded object whose local-system part is induced by b itself, glued by identities"""
    model = model or Lambda1Model(b.presentation)
    if model.presentation != b.presentation:
        raise ModelMismatch("family and model use different presentations")
    lambda0, covering, a = induced_models(b)
    m = MeldedObject(model, covering, a, b, tuple(identity(d) for d in b.quiver.dims))
    validate_melded(m)
    return m


def hom_melded(x: MeldedObject, y: MeldedObject) -> SolutionSpace:
    """
    Pairs (f, τ): f a morphism of groupoid representations, τ an equivariant
    quiver morphism, with τ_i gamma_i = gamma'_i f_{object of sheet i}

    Blocks are ordered f over the groupoid objects, then τ over the sheets.

    Raises:
        ModelMismatch: if x and y are over different models or coverings
    """
    if x.lambda0 != y.lambda0 or x.lambda1 != y.lambda1 or x.covering != y.covering:
        raise ModelMismatch("melded objects are over different models")
    objects = x.lambda0.objects
    n = x.lambda1.presentation.n
    shapes = [(y.a.dims[k], x.a.dims[k]) for k in range(len(objects))]
    shapes += [(y.b.quiver.dims[i], x.b.quiver.dims[i]) for i in range(n)]
    system = LinearSystem(shapes)
    f_blocks = list(range(len(objects)))
    tau_blocks = list(range(len(objects), len(objects) + n))
    _add_lambda0_equations(system, x.a, y.a, f_blocks)
    add_morphism_equations(system, x.b.quiver, y.b.quiver, tau_blocks)
    add_equivariance_equations(system, x.lambda1.presentation, x.b.structure, y.b.structure,
                               x.b.quiver.dims, y.b.quiver.dims, tau_blocks)
    for i, obj in enumerate(x.covering.sheet_objects):
        k = objects.index(obj)
        system.add_equation([
            Term(tau_blocks[i], identity(y.b.quiver.dims[i]), x.gamma[i]),
            Term(f_blocks[k], -y.gamma[i], identity(x.a.dims[k])),
        ])
    return system.solve()


# ---------------------------------------------------------------------------
# Variation around boundary generators
# ---------------------------------------------------------------------------

@dataclass
class VariationReport:
    generator: str
    blocks: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def no_variation(self) -> bool:
        return all(b["constant"] for b in self.blocks)

    @property
    def decision_dependent(self) -> bool:
        return not all(b["base_case"] for b in self.blocks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "generator": self.generator,
            "no_variation": self.no_variation,
            "label": "decision-dependent" if self.decision_dependent else "base-case",
            "blocks": self.blocks,
        }


def variation_report(m: MeldedObject, boundary_generator: str) -> VariationReport:
    """
    Compare the colliding-sheet block of the quiver with its transport
    around the boundary generator

    For a block B and g = boundary_generator the transported map at (j, i)
    is gamma_{j,g}⁻¹ m_{g(j)g(i)} gamma_{i,g}; the block has no variation
    when it equals m_ji for all i, j in B. Blocks that are single sheets or
    whose maps all vanish are the base case and always pass; any other
    verdict comes from this surrogate and is labelled decision-dependent.
    """
    partition = m.lambda1.partition(boundary_generator)
    p = m.lambda1.presentation
    perm = p.perm(boundary_generator)
    gamma = m.b.structure[p.index(boundary_generator)]
    q = m.b.quiver
    report = VariationReport(boundary_generator)
    for block in partition:
        zero = all(q.maps[j][i].is_zero() for j in block for i in block)
        constant = all(
            invert(gamma[j]) @ q.maps[perm[j]][perm[i]] @ gamma[i] == q.maps[j][i]
            for j in block for i in block
        )
        report.blocks.append({
            "sheets": [i + 1 for i in block],
            "constant": constant or zero or len(block) == 1,
            "base_case": zero or len(block) == 1,
        })
    logger.debug("variation around %s: %s", boundary_generator, report.to_dict())
    return report


def has_no_variation(m: MeldedObject, boundary_generator: str) -> bool:
    return variation_report(m, boundary_generator).no_variation
