"""
Equivariant Quivers
Group presentations acting on the point set, pluggable action kernels on
quiver data, equivariant quivers and equivariant local systems
"""

import logging
import re
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import (
    Diagram4Violation,
    KernelEvaluationError,
    PresentationMismatch,
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
    zeros,
)
from .quiver_core import (
    LocalSystemQuiver,
    Quiver,
    add_morphism_equations,
    is_morphism,
    vanishing_cycles,
    validate_local_system,
    validate_quiver,
)

logger = logging.getLogger(__name__)

# A word is a sequence of (generator, ±1) letters, read left to right.
Letter = Tuple[str, int]
Word = Tuple[Letter, ...]

_LETTER = re.compile(r"^([A-Za-z_][A-Za-z0-9_@]*)(?:\^(-?1))?$")


def parse_word(spec: Union[str, Sequence[str]]) -> Word:
    """
    Parse "t t^-1 s" or ["t", "t^-1", "s"] into a word

    The empty string and the empty list denote the empty word.
    """
    tokens = spec.split() if isinstance(spec, str) else list(spec)
    letters = []
    for token in tokens:
        match = _LETTER.match(token.strip())
        if not match:
            raise ValueError(f"malformed letter {token!r}")
        letters.append((match.group(1), int(match.group(2) or 1)))
    return tuple(letters)


def format_word(word: Word) -> str:
    return " ".join(g if e == 1 else f"{g}^-1" for g, e in word) or "e"


def inverse_word(word: Word) -> Word:
    return tuple((g, -e) for g, e in reversed(word))


@dataclass(frozen=True)
class GroupPresentation:
    """
    Finitely presented group acting on points 0..n-1

    ``point_action[k][i]`` is g_k(i). A word g₁g₂… moves point i along
    i → g₁(i) → g₂(g₁(i)) → …
    """

    n: int
    generators: Tuple[str, ...]
    relations: Tuple[Word, ...]
    point_action: Tuple[Tuple[int, ...], ...]

    def index(self, generator: str) -> int:
        try:
            return self.generators.index(generator)
        except ValueError:
            raise UnknownGenerator(f"unknown generator {generator!r}", {"generator": generator})

    def perm(self, generator: str) -> Tuple[int, ...]:
        return self.point_action[self.index(generator)]

    def letter_perm(self, letter: Letter) -> Tuple[int, ...]:
        p = self.perm(letter[0])
        if letter[1] == 1:
            return p
        inverse = [0] * self.n
        for i, image in enumerate(p):
            inverse[image] = i
        return tuple(inverse)

    def word_perm(self, word: Word) -> Tuple[int, ...]:
        where = list(range(self.n))
        for letter in word:
            p = self.letter_perm(letter)
            where = [p[w] for w in where]
        return tuple(where)


def trivial_presentation(n: int) -> GroupPresentation:
    return GroupPresentation(n, (), (), ())


def validate_presentation(p: GroupPresentation) -> None:
    """
    Raises:
        ShapeMismatch: if a point action is not a permutation of range(n)
        UnknownGenerator: if a relation uses an undeclared generator
        RelationViolation: if a relation moves some point
    """
    if len(p.point_action) != len(p.generators):
        raise ShapeMismatch("one permutation per generator is required")
    for g, perm in zip(p.generators, p.point_action):
        if sorted(perm) != list(range(p.n)):
            raise ShapeMismatch(f"action of {g} is not a permutation of {p.n} points", {"generator": g})
    for word in p.relations:
        for g, _ in word:
            p.index(g)
        if p.word_perm(word) != tuple(range(p.n)):
            raise RelationViolation(format_word(word), reason="point action")


# ---------------------------------------------------------------------------
# Kernel programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapRef:
    """m[j][i] of the input quiver (0-based)"""
    j: int
    i: int


@dataclass(frozen=True)
class Inv1p:
    """(1 + m_kk)⁻¹"""
    k: int


@dataclass(frozen=True)
class Eye:
    k: int


@dataclass(frozen=True)
class Zero:
    j: int
    i: int


@dataclass(frozen=True)
class Add:
    terms: tuple


@dataclass(frozen=True)
class Mul:
    """Matrix product, leftmost factor applied last"""
    factors: tuple


@dataclass(frozen=True)
class Neg:
    arg: object


Expression = Union[MapRef, Inv1p, Eye, Zero, Add, Mul, Neg]

_SYMBOL = re.compile(r"^(m|zero)\[(\d+)\]\[(\d+)\]$|^(inv1p|id)\[(\d+)\]$")


def parse_expression(node) -> Expression:
    """
    Parse the JSON form of a kernel expression

    Symbols are strings "m[j][i]", "inv1p[k]", "id[k]", "zero[j][i]" with
    1-based indices; operations are {"add": [...]}, {"mul": [...]},
    {"neg": expr}.
    """
    if isinstance(node, str):
        match = _SYMBOL.match(node.replace(" ", ""))
        if not match:
            raise ValueError(f"unknown symbol {node!r}")
        if match.group(1) == "m":
            return MapRef(int(match.group(2)) - 1, int(match.group(3)) - 1)
        if match.group(1) == "zero":
            return Zero(int(match.group(2)) - 1, int(match.group(3)) - 1)
        if match.group(4) == "inv1p":
            return Inv1p(int(match.group(5)) - 1)
        return Eye(int(match.group(5)) - 1)
    if isinstance(node, dict) and len(node) == 1:
        (op, arg), = node.items()
        if op == "add":
            return Add(tuple(parse_expression(a) for a in arg))
        if op == "mul":
            return Mul(tuple(parse_expression(a) for a in arg))
        if op == "neg":
            return Neg(parse_expression(arg))
    raise ValueError(f"malformed expression {node!r}")


def format_expression(expr: Expression):
    if isinstance(expr, MapRef):
        return f"m[{expr.j + 1}][{expr.i + 1}]"
    if isinstance(expr, Zero):
        return f"zero[{expr.j + 1}][{expr.i + 1}]"
    if isinstance(expr, Inv1p):
        return f"inv1p[{expr.k + 1}]"
    if isinstance(expr, Eye):
        return f"id[{expr.k + 1}]"
    if isinstance(expr, Add):
        return {"add": [format_expression(t) for t in expr.terms]}
    if isinstance(expr, Mul):
        return {"mul": [format_expression(f) for f in expr.factors]}
    return {"neg": format_expression(expr.arg)}


def evaluate(expr: Expression, q: Quiver) -> ExactMatrix:
    """
    Evaluate a kernel expression on a quiver

    Raises:
        KernelEvaluationError: on an out-of-range index, mismatched shapes or
            a singular 1 + m_kk
    """
    try:
        if isinstance(expr, MapRef):
            return q.maps[expr.j][expr.i]
        if isinstance(expr, Zero):
            return zeros(q.dims[expr.j], q.dims[expr.i])
        if isinstance(expr, Eye):
            return identity(q.dims[expr.k])
        if isinstance(expr, Inv1p):
            return invert(identity(q.dims[expr.k]) + q.maps[expr.k][expr.k])
        if isinstance(expr, Neg):
            return -evaluate(expr.arg, q)
        if isinstance(expr, Add):
            values = [evaluate(t, q) for t in expr.terms]
            total = values[0]
            for v in values[1:]:
                total = total + v
            return total
        if isinstance(expr, Mul):
            values = [evaluate(f, q) for f in expr.factors]
            total = values[0]
            for v in values[1:]:
                total = total @ v
            return total
    except IndexError:
        raise KernelEvaluationError(f"index out of range in {format_expression(expr)}")
    except (ShapeMismatch, Singular) as exc:
        raise KernelEvaluationError(f"cannot evaluate {format_expression(expr)}: {exc.message}")
    raise KernelEvaluationError(f"unknown expression node {expr!r}")


@dataclass(frozen=True, eq=False)
class ActionKernel:
    """
    Transformation programs Φ(g) on quiver data

    ``programs[g][(j, i)]`` is the formula for position (j, i) of Φ(g)Q,
    that is m̃_{g(j)g(i)}; a missing formula means the pure relabeling
    m_{g(j)g(i)}. ``inverse_programs`` does the same for g⁻¹; a kernel with
    formulas but no inverse program cannot evaluate inverse letters.
    """

    presentation: GroupPresentation
    programs: Dict[str, Dict[Tuple[int, int], Expression]] = field(default_factory=dict)
    inverse_programs: Dict[str, Dict[Tuple[int, int], Expression]] = field(default_factory=dict)
    name: str = "custom"

    @property
    def is_permutation(self) -> bool:
        return not any(self.programs.values()) and not any(self.inverse_programs.values())


def permutation_kernel(presentation: GroupPresentation) -> ActionKernel:
    """Φ(g) only relabels: position (j, i) of Φ(g)Q carries m_{g(j)g(i)}"""
    return ActionKernel(presentation, name="permutation")


def identity_kernel(n: int, generators: Sequence[str] = (), relations: Sequence[Word] = ()) -> ActionKernel:
    """Every generator fixes every point and leaves quivers unchanged"""
    presentation = GroupPresentation(
        n, tuple(generators), tuple(relations), tuple(tuple(range(n)) for _ in generators)
    )
    return ActionKernel(presentation, name="identity")


def _apply_letter(kernel: ActionKernel, letter: Letter, q: Quiver) -> Quiver:
    g, exponent = letter
    p = kernel.presentation.letter_perm(letter)
    formulas = (kernel.programs if exponent == 1 else kernel.inverse_programs).get(g, {})
    if exponent == -1 and not formulas and kernel.programs.get(g):
        raise KernelEvaluationError(f"kernel {kernel.name} has no inverse program for {g}",
                                    {"generator": g})
    n = q.n
    dims = tuple(q.dims[p[i]] for i in range(n))
    maps = []
    for j in range(n):
        row = []
        for i in range(n):
            expr = formulas.get((j, i), MapRef(p[j], p[i]))
            value = evaluate(expr, q)
            if value.shape != (dims[j], dims[i]):
                raise KernelEvaluationError(
                    f"formula for position ({j + 1},{i + 1}) of {g} has shape {value.shape}",
                    {"generator": g, "j": j + 1, "i": i + 1},
                )
            row.append(value)
        maps.append(tuple(row))
    return Quiver(dims, tuple(maps))


def apply_action(kernel: ActionKernel, word: Union[str, Word], q: Quiver) -> Quiver:
    """
    Φ(w)Q with Φ(g₁g₂…g_k) = Φ(g₁) ∘ Φ(g₂) ∘ … ∘ Φ(g_k)

    Position i of the result carries the data of sheet g_k(…g₁(i)) of q.
    """
    if isinstance(word, str):
        word = parse_word(word)
    for g, _ in word:
        kernel.presentation.index(g)
    result = q
    for letter in reversed(word):
        result = _apply_letter(kernel, letter, result)
    return result


def check_kernel(kernel: ActionKernel, samples: Sequence[Quiver]) -> int:
    """
    Acceptance gate for a kernel over sample quivers

    Checks the diagonal preservation m̃_{g(i)g(i)} = m_{g(i)g(i)}, that
    inverse programs undo their generator, and that every relation acts as
    the identity.

    Returns:
        number of samples checked

    Raises:
        KernelEvaluationError: describing the first failed gate
    """
    presentation = kernel.presentation
    for index, q in enumerate(samples):
        if q.n != presentation.n:
            raise ShapeMismatch(f"sample {index} has {q.n} points, kernel acts on {presentation.n}")
        for g in presentation.generators:
            p = presentation.perm(g)
            moved = apply_action(kernel, ((g, 1),), q)
            for i in range(q.n):
                if moved.maps[i][i] != q.maps[p[i]][p[i]]:
                    raise KernelEvaluationError(
                        f"generator {g} changes the diagonal map at {p[i] + 1}",
                        {"gate": "diagonal", "generator": g, "index": p[i] + 1, "sample": index},
                    )
            if kernel.inverse_programs.get(g) or not kernel.programs.get(g):
                if apply_action(kernel, ((g, -1), (g, 1)), q) != q:
                    raise KernelEvaluationError(
                        f"inverse program of {g} does not undo it",
                        {"gate": "inverse", "generator": g, "sample": index},
                    )
        for word in presentation.relations:
            if apply_action(kernel, word, q) != q:
                raise KernelEvaluationError(
                    f"relation {format_word(word)} does not act as the identity",
                    {"gate": "relation", "word": format_word(word), "sample": index},
                )
    logger.info("kernel %s passed its gates on %d samples", kernel.name, len(samples))
    return len(samples)


# ---------------------------------------------------------------------------
# Equivariant objects
# ---------------------------------------------------------------------------

Structure = Tuple[Tuple[ExactMatrix, ...], ...]


def _transport(presentation: GroupPresentation, structure: Structure, dims: Sequence[int],
               word: Word) -> List[ExactMatrix]:
    """Compose γ along a word: component i maps M_i to M_{w(i)}"""
    out = []
    for i in range(presentation.n):
        where = i
        total = identity(dims[i])
        for g, exponent in word:
            k = presentation.index(g)
            if exponent == 1:
                step = structure[k][where]
                where = presentation.perm(g)[where]
            else:
                source = presentation.letter_perm((g, -1))[where]
                step = invert(structure[k][source])
                where = source
            total = step @ total
        out.append(total)
    return out


def _check_structure_shapes(presentation: GroupPresentation, structure: Structure, dims: Sequence[int]) -> None:
    if len(structure) != len(presentation.generators):
        raise ShapeMismatch(f"{len(structure)} structure families for {len(presentation.generators)} generators")
    for k, g in enumerate(presentation.generators):
        perm = presentation.point_action[k]
        if len(structure[k]) != presentation.n:
            raise ShapeMismatch(f"generator {g} needs {presentation.n} structure maps")
        for i, gamma in enumerate(structure[k]):
            if gamma.shape != (dims[perm[i]], dims[i]):
                raise ShapeMismatch(
                    f"gamma_{i + 1},{g} has shape {gamma.shape}, expected {(dims[perm[i]], dims[i])}",
                    {"generator": g, "index": i + 1},
                )
            if not is_invertible(gamma):
                raise Singular(f"gamma_{i + 1},{g} is not invertible", {"generator": g, "index": i + 1})


@dataclass(frozen=True)
class EquivariantQuiver:
    """A quiver with maps γ_{i,g}: M_i → M_{g(i)} for every generator"""

    quiver: Quiver
    kernel: ActionKernel
    structure: Structure

    @property
    def presentation(self) -> GroupPresentation:
        return self.kernel.presentation

    def gamma(self, i: int, generator: str) -> ExactMatrix:
        return self.structure[self.presentation.index(generator)][i]


def with_trivial_structure(q: Quiver, kernel: ActionKernel) -> EquivariantQuiver:
    """Identity γ maps; valid exactly when the action fixes q up to relabeling"""
    p = kernel.presentation
    return EquivariantQuiver(q, kernel, tuple(
        tuple(identity(q.dims[i]) for i in range(q.n)) for _ in p.generators
    ))


def structure_along_word(e: EquivariantQuiver, word: Union[str, Word]) -> List[ExactMatrix]:
    if isinstance(word, str):
        word = parse_word(word)
    return _transport(e.presentation, e.structure, e.quiver.dims, word)


def validate_equivariant(e: EquivariantQuiver, kernel: Optional[ActionKernel] = None) -> None:
    """
    Check an equivariant quiver exactly

    Raises:
        NotInvertible / ShapeMismatch: from the underlying quiver
        Singular: for a non-invertible γ
        Diagram4Violation: if γ_{j,g} m_ji ≠ m̃_{g(j)g(i)} γ_{i,g}
        RelationViolation: if a relation's γ-transport is not the identity
    """
    kernel = kernel or e.kernel
    if kernel.presentation != e.presentation:
        raise PresentationMismatch("kernel and object use different presentations")
    presentation = kernel.presentation
    q = e.quiver
    if q.n != presentation.n:
        raise PresentationMismatch(f"quiver has {q.n} points, presentation acts on {presentation.n}")
    validate_presentation(presentation)
    validate_quiver(q)
    _check_structure_shapes(presentation, e.structure, q.dims)

    for k, g in enumerate(presentation.generators):
        moved = apply_action(kernel, ((g, 1),), q)
        gamma = e.structure[k]
        for j, i in product(range(q.n), repeat=2):
            if gamma[j] @ q.maps[j][i] != moved.maps[j][i] @ gamma[i]:
                raise Diagram4Violation(i + 1, j + 1, g)

    for word in presentation.relations:
        if apply_action(kernel, word, q) != q:
            raise RelationViolation(format_word(word), reason="kernel transport")
        for i, total in enumerate(_transport(presentation, e.structure, q.dims, word)):
            if total != identity(q.dims[i]):
                raise RelationViolation(format_word(word), index=i + 1)


def add_equivariance_equations(system: LinearSystem, presentation: GroupPresentation,
                               source: Structure, target: Structure,
                               source_dims: Sequence[int], target_dims: Sequence[int],
                               blocks: Sequence[int]) -> None:
    """Add τ_{g(i)} γ_{i,g} − γ'_{i,g} τ_i = 0 for every generator and point"""
    for k in range(len(presentation.generators)):
        perm = presentation.point_action[k]
        for i in range(presentation.n):
            system.add_equation([
                Term(blocks[perm[i]], identity(target_dims[perm[i]]), source[k][i]),
                Term(blocks[i], -target[k][i], identity(source_dims[i])),
            ])


def hom_equivariant(x: EquivariantQuiver, y: EquivariantQuiver) -> SolutionSpace:
    """
    Families (τ_i) that are quiver morphisms commuting with the structure maps

    Raises:
        PresentationMismatch: if x and y are over different presentations
    """
    if x.presentation != y.presentation:
        raise PresentationMismatch("objects are over different presentations")
    n = x.quiver.n
    system = LinearSystem([(y.quiver.dims[i], x.quiver.dims[i]) for i in range(n)])
    blocks = list(range(n))
    add_morphism_equations(system, x.quiver, y.quiver, blocks)
    add_equivariance_equations(system, x.presentation, x.structure, y.structure,
                               x.quiver.dims, y.quiver.dims, blocks)
    return system.solve()


def is_equivariant_morphism(x: EquivariantQuiver, y: EquivariantQuiver,
                            components: Sequence[ExactMatrix]) -> bool:
    if not is_morphism(x.quiver, y.quiver, components):
        return False
    p = x.presentation
    return all(
        components[p.point_action[k][i]] @ x.structure[k][i] == y.structure[k][i] @ components[i]
        for k in range(len(p.generators)) for i in range(p.n)
    )


def restrict(e: EquivariantQuiver) -> Quiver:
    """Forget the equivariant structure"""
    return e.quiver


# ---------------------------------------------------------------------------
# Equivariant local systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquivariantLocalSystem:
    ls: LocalSystemQuiver
    presentation: GroupPresentation
    structure: Structure


def validate_equivariant_local_system(a: EquivariantLocalSystem) -> None:
    """
    Structure maps must be morphisms L → Ψ(g)L, i.e. γ_{i,g} l_i = l_{g(i)} γ_{i,g},
    and relation words must transport to the identity
    """
    p = a.presentation
    if a.ls.n != p.n:
        raise PresentationMismatch(f"local system has {a.ls.n} points, presentation acts on {p.n}")
    validate_presentation(p)
    validate_local_system(a.ls)
    _check_structure_shapes(p, a.structure, a.ls.dims)
    monodromies = a.ls.monodromies
    for k, g in enumerate(p.generators):
        perm = p.point_action[k]
        for i in range(p.n):
            gamma = a.structure[k][i]
            if gamma @ monodromies[i] != monodromies[perm[i]] @ gamma:
                raise Diagram4Violation(i + 1, i + 1, g)
    for word in p.relations:
        for i, total in enumerate(_transport(p, a.structure, a.ls.dims, word)):
            if total != identity(a.ls.dims[i]):
                raise RelationViolation(format_word(word), index=i + 1)


def hom_equivariant_local_system(a: EquivariantLocalSystem, b: EquivariantLocalSystem) -> SolutionSpace:
    if a.presentation != b.presentation:
        raise PresentationMismatch("local systems are over different presentations")
    n = a.ls.n
    system = LinearSystem([(b.ls.dims[i], a.ls.dims[i]) for i in range(n)])
    for i in range(n):
        system.add_equation([
            Term(i, identity(b.ls.dims[i]), a.ls.monodromies[i]),
            Term(i, -b.ls.monodromies[i], identity(a.ls.dims[i])),
        ])
    add_equivariance_equations(system, a.presentation, a.structure, b.structure,
                               a.ls.dims, b.ls.dims, list(range(n)))
    return system.solve()


def ls_functor(e: EquivariantQuiver) -> EquivariantLocalSystem:
    """Vanishing cycles of the quiver, carrying the same structure maps"""
    return EquivariantLocalSystem(vanishing_cycles(e.quiver), e.presentation, e.structure)


def ls_functor_map(components: Sequence[ExactMatrix]) -> Tuple[ExactMatrix, ...]:
    return tuple(components)
