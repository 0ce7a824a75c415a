"""
Finite Sites and Stacks
Alexandrov sites, prestacks of presented categories, descent and gluing,
stalks, stack morphisms and stalkwise weak-isomorphism checks
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from .categories import (
    Components,
    EquivalenceReport,
    FunctorData,
    PresentedCategory,
    check_equivalence,
    identity_functor,
    split_columns,
    row_block,
)
from .errors import (
    CocycleViolation,
    CoherenceViolation,
    DescentInvalid,
    GluingUnsupported,
    IncoherentMorphism,
    InverseViolation,
    MathematicalViolation,
    NotOpenMap,
    ShapeMismatch,
    SiteError,
    Singular,
)
from .exact_kernel import (
    ExactMatrix,
    LinearSystem,
    SolutionSpace,
    Term,
    block_diag,
    identity,
    invert,
    is_invertible,
    is_zero,
    kron,
    rank,
    scalar,
    vec,
    vstack,
    zeros,
)

logger = logging.getLogger(__name__)


class PosetSite:
    """
    A finite Alexandrov site

    Opens are ordered by inclusion (``order`` lists generating pairs
    (V, U) meaning V ⊆ U); every point names its minimal open, and x lies
    in U exactly when its minimal open is ≤ U. ``covers`` lists the
    declared covering families of each open.

    Raises:
        SiteError: for unknown names, a cyclic order, a cover that misses
            points, or an intersection that is not an open
    """

    def __init__(self, opens: Sequence[str], order: Sequence[Tuple[str, str]],
                 points: Mapping[str, str], covers: Optional[Mapping[str, Sequence[Sequence[str]]]] = None):
        self.opens: Tuple[str, ...] = tuple(opens)
        self.points: Tuple[str, ...] = tuple(points)
        self.minimal: Dict[str, str] = dict(points)
        self.order: Tuple[Tuple[str, str], ...] = tuple(tuple(pair) for pair in order)
        graph = nx.DiGraph()
        graph.add_nodes_from(self.opens)
        for v, u in self.order:
            if v not in graph or u not in graph:
                raise SiteError(f"order pair ({v}, {u}) names an unknown open", {"pair": [v, u]})
            if v != u:
                graph.add_edge(v, u)
        if not nx.is_directed_acyclic_graph(graph):
            raise SiteError("inclusion order has a cycle", {"cycle": [list(e) for e in nx.find_cycle(graph)]})
        self.graph = graph
        self._closure = nx.transitive_closure_dag(graph)
        for x, u in self.minimal.items():
            if u not in graph:
                raise SiteError(f"point {x} has unknown minimal open {u}", {"point": x})
        self._points_of = {u: tuple(x for x in self.points if self.leq(self.minimal[x], u)) for u in self.opens}
        self.covers: Dict[str, Tuple[Tuple[str, ...], ...]] = {
            u: tuple(tuple(family) for family in families) for u, families in (covers or {}).items()
        }
        for u, families in self.covers.items():
            for family in families:
                if not self.is_covering(u, family):
                    raise SiteError(f"declared cover {list(family)} does not cover {u}", {"open": u})
        for u, v in combinations(self.opens, 2):
            self.meet(u, v)

    def leq(self, v: str, u: str) -> bool:
        return v == u or self._closure.has_edge(v, u)

    def points_of(self, u: str) -> Tuple[str, ...]:
        try:
            return self._points_of[u]
        except KeyError:
            raise SiteError(f"unknown open {u}", {"open": u})

    def minimal_open(self, x: str) -> str:
        try:
            return self.minimal[x]
        except KeyError:
            raise SiteError(f"unknown point {x}", {"point": x})

    def point_leq(self, x: str, y: str) -> bool:
        """x lies in every open containing y"""
        return self.leq(self.minimal[x], self.minimal[y])

    def comparable_pairs(self, u: str) -> List[Tuple[str, str]]:
        pts = self.points_of(u)
        return [(x, y) for x, y in product(pts, repeat=2) if x != y and self.point_leq(x, y)]

    def _open_with_points(self, points: frozenset, below: Sequence[str] = (), above: Sequence[str] = ()) -> Optional[str]:
        candidates = [
            w for w in self.opens
            if frozenset(self.points_of(w)) == points
            and all(self.leq(w, u) for u in below) and all(self.leq(u, w) for u in above)
        ]
        if not candidates:
            return None
        if below:
            best = [w for w in candidates if all(self.leq(c, w) for c in candidates)]
        else:
            best = [w for w in candidates if all(self.leq(w, c) for c in candidates)]
        return (best or candidates)[0]

    def meet(self, u: str, v: str) -> Optional[str]:
        """The open U ∩ V, or None when the intersection has no points"""
        if self.leq(u, v):
            return u
        if self.leq(v, u):
            return v
        common = frozenset(self.points_of(u)) & frozenset(self.points_of(v))
        if not common:
            return None
        w = self._open_with_points(common, below=(u, v))
        if w is None:
            raise SiteError(f"{u} ∩ {v} is not an open of the site", {"opens": [u, v]})
        return w

    def join(self, u: str, v: str) -> str:
        """The open U ∪ V"""
        union = frozenset(self.points_of(u)) | frozenset(self.points_of(v))
        w = self._open_with_points(union, above=(u, v))
        if w is None:
            raise SiteError(f"{u} ∪ {v} is not an open of the site", {"opens": [u, v]})
        return w

    def is_covering(self, u: str, family: Sequence[str]) -> bool:
        if any(not self.leq(member, u) for member in family):
            return False
        covered = {x for member in family for x in self.points_of(member)}
        return covered == set(self.points_of(u))

    def chains(self, length: int) -> List[Tuple[str, ...]]:
        """Weakly increasing sequences of opens of the given length, smallest first"""
        out = []
        for chain in product(self.opens, repeat=length):
            if all(self.leq(chain[k], chain[k + 1]) for k in range(length - 1)):
                out.append(chain)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "opens": list(self.opens),
            "order": [list(p) for p in self.order],
            "points": dict(self.minimal),
            "covers": {u: [list(f) for f in fams] for u, fams in self.covers.items()},
        }


def product_site(first: PosetSite, second: PosetSite) -> PosetSite:
    """Opens "U*V", points "x*y", product order and covers {U_i*V} and {U*V_j}"""
    opens = [f"{u}*{v}" for u, v in product(first.opens, second.opens)]
    order = [(f"{a}*{b}", f"{c}*{d}") for a, b, c, d in product(first.opens, second.opens, first.opens, second.opens)
             if first.leq(a, c) and second.leq(b, d) and (a, b) != (c, d)]
    points = {f"{x}*{y}": f"{first.minimal[x]}*{second.minimal[y]}" for x, y in product(first.points, second.points)}
    covers: Dict[str, List[List[str]]] = {}
    for u, v in product(first.opens, second.opens):
        families = [[f"{m}*{v}" for m in fam] for fam in first.covers.get(u, ())]
        families += [[f"{u}*{m}" for m in fam] for fam in second.covers.get(v, ())]
        if families:
            covers[f"{u}*{v}"] = families
    return PosetSite(opens, order, points, covers)


# ---------------------------------------------------------------------------
# Prestacks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PrestackData:
    """
    Categories over the opens of a site with restriction functors

    ``restrictions[(V, U)]`` is ρ_VU for every V ≤ U (including V = U).
    ``coherence(W, V, U, a)`` returns τ_WVU at a, a morphism
    ρ_WV ρ_VU a → ρ_WU a in F(W); None means strict restrictions with
    identity τ. ``gluer`` takes a completed descent datum and returns the
    glued object with its isomorphisms.
    """

    site: PosetSite
    categories: Dict[str, PresentedCategory]
    restrictions: Dict[Tuple[str, str], FunctorData]
    coherence: Optional[Callable[[str, str, str, Any], Components]] = None
    gluer: Optional[Callable[["DescentDatum"], Tuple[Any, Tuple[Components, ...]]]] = None
    name: str = "prestack"

    def restrict(self, v: str, u: str, obj):
        return self.restrictions[(v, u)](obj)

    def restrict_morphism(self, v: str, u: str, a, b, components: Sequence[ExactMatrix]) -> Components:
        return self.restrictions[(v, u)].on_morphism(a, b, components)

    def tau(self, w: str, v: str, u: str, obj) -> Components:
        if self.coherence is None:
            return self.categories[w].identity(self.restrict(w, u, obj))
        return tuple(self.coherence(w, v, u, obj))


def stalk(p: PrestackData, x: str) -> PresentedCategory:
    """The category at the minimal open of x"""
    return p.categories[p.site.minimal_open(x)]


@dataclass
class PrestackReport:
    violations: List[Dict[str, Any]] = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": self.ok, "checked": self.checked, "violations": self.violations}


def _compose(f: Sequence[ExactMatrix], g: Sequence[ExactMatrix]) -> Components:
    return tuple(x @ y for x, y in zip(f, g))


def check_prestack(p: PrestackData, samples: Mapping[str, Sequence[Any]]) -> PrestackReport:
    """
    Check identity restrictions, trivial coherence on degenerate chains and
    the coherence cocycle on every chain S ≤ W ≤ V ≤ U, for every sample
    object over U
    """
    site = p.site
    report = PrestackReport()
    for u in site.opens:
        objects = list(samples.get(u, ()))
        for index, a in enumerate(objects):
            report.checked += 1
            if p.restrict(u, u, a) != a:
                report.violations.append({"condition": "I.a", "open": u, "sample": index})
            for second, b in enumerate(objects):
                size = p.categories[u].hom_space(a, b).ambient_dim
                if p.restrictions[(u, u)].matrix(a, b) != identity(size):
                    report.violations.append({"condition": "I.a", "open": u, "pair": [index, second]})
        for v in site.opens:
            if not site.leq(v, u):
                continue
            for index, a in enumerate(objects):
                ident = p.categories[v].identity(p.restrict(v, u, a))
                if p.tau(v, v, u, a) != ident or p.tau(v, u, u, a) != ident:
                    report.violations.append({"condition": "I.b", "opens": [v, u], "sample": index})
    for s, w, v, u in site.chains(4):
        for index, a in enumerate(samples.get(u, ())):
            inner = p.restrict(v, u, a)
            tau_wvu = p.tau(w, v, u, a)
            moved = p.restrict_morphism(s, w, p.restrict(w, v, inner), p.restrict(w, u, a), tau_wvu)
            lhs = _compose(p.tau(s, w, u, a), moved)
            rhs = _compose(p.tau(s, v, u, a), p.tau(s, w, v, inner))
            if lhs != rhs:
                report.violations.append({"condition": "I.c", "opens": [s, w, v, u], "sample": index})
    logger.info("prestack %s: %d objects checked, %d violations", p.name, report.checked, len(report.violations))
    return report


def _conjugated_restriction(p: PrestackData, w: str, member: str, u: str, a, b) -> ExactMatrix:
    """
    Matrix of φ ↦ τ(b) ∘ ρ_{W,member}(φ) ∘ τ(a)⁻¹ from Hom(ρa, ρb) over the
    member to Hom(ρ_WU a, ρ_WU b) over W
    """
    a_i, b_i = p.restrict(member, u, a), p.restrict(member, u, b)
    m = p.restrictions[(w, member)].matrix(a_i, b_i)
    if p.coherence is None:
        return m
    tau_a, tau_b = p.tau(w, member, u, a), p.tau(w, member, u, b)
    factors = [kron(tb, invert(ta).T) for ta, tb in zip(tau_a, tau_b)]
    return block_diag(*factors) @ m


@dataclass
class HomSheafReport:
    dim_global: int
    dim_equalizer: int
    injective: bool

    @property
    def ok(self) -> bool:
        return self.injective and self.dim_global == self.dim_equalizer

    def to_dict(self) -> Dict[str, Any]:
        return {"dim_global": self.dim_global, "dim_equalizer": self.dim_equalizer,
                "injective": self.injective, "ok": self.ok}


def check_hom_sheaf(p: PrestackData, u: str, a, b, cover: Sequence[str]) -> HomSheafReport:
    """
    Compare Hom(a, b) over U with the morphisms over the cover members that
    agree on overlaps
    """
    site = p.site
    if not site.is_covering(u, cover):
        raise SiteError(f"{list(cover)} is not a cover of {u}", {"open": u})
    cover = list(cover)
    system = LinearSystem()
    member_blocks: List[List[int]] = []
    for member in cover:
        shapes = p.categories[member].block_shapes(p.restrict(member, u, a), p.restrict(member, u, b))
        blocks = [system.add_block(r, c) for r, c in shapes]
        member_blocks.append(blocks)
        p.categories[member].add_equations(system, p.restrict(member, u, a), p.restrict(member, u, b), blocks)
    for i, j in combinations(range(len(cover)), 2):
        w = site.meet(cover[i], cover[j])
        if w is None:
            continue
        left = _conjugated_restriction(p, w, cover[i], u, a, b)
        right = _conjugated_restriction(p, w, cover[j], u, a, b)
        coefficients = split_columns(left, [system.block_shapes[k] for k in member_blocks[i]], member_blocks[i])
        for block, m in split_columns(-right, [system.block_shapes[k] for k in member_blocks[j]],
                                      member_blocks[j]).items():
            coefficients[block] = coefficients[block] + m if block in coefficients else m
        system.add_rows(coefficients)
    equalizer = system.solve()

    global_space = p.categories[u].hom_space(a, b)
    if global_space.dimension:
        stacked = vstack(*[p.restrictions[(member, u)].matrix(a, b) for member in cover])
        injective = rank(stacked @ global_space.basis_matrix()) == global_space.dimension
    else:
        injective = True
    return HomSheafReport(global_space.dimension, equalizer.dimension, injective)


# ---------------------------------------------------------------------------
# Descent
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DescentDatum:
    """
    Objects over the members of a cover of ``open`` with isomorphisms on
    overlaps: ``sigma[(i, j)]`` maps ρ A_i → ρ A_j over U_i ∩ U_j
    (0-based member indices)
    """

    prestack: PrestackData
    open: str
    cover: Tuple[str, ...]
    objects: Tuple[Any, ...]
    sigma: Dict[Tuple[int, int], Components]

    def overlap(self, i: int, j: int) -> Optional[str]:
        return self.prestack.site.meet(self.cover[i], self.cover[j])

    def source(self, i: int, j: int):
        return self.prestack.restrict(self.overlap(i, j), self.cover[i], self.objects[i])

    def target(self, i: int, j: int):
        return self.prestack.restrict(self.overlap(i, j), self.cover[j], self.objects[j])


def _complete(d: DescentDatum) -> DescentDatum:
    p = d.prestack
    sigma = dict(d.sigma)
    n = len(d.cover)
    for i, j in product(range(n), repeat=2):
        if d.overlap(i, j) is None or (i, j) in sigma:
            continue
        if i == j:
            sigma[(i, i)] = p.categories[d.cover[i]].identity(d.objects[i])
        elif (j, i) in d.sigma:
            try:
                sigma[(i, j)] = tuple(invert(c) for c in d.sigma[(j, i)])
            except MathematicalViolation:
                raise DescentInvalid(f"sigma_{j + 1}{i + 1} is not invertible", {"i": j + 1, "j": i + 1})
        else:
            raise DescentInvalid(f"no isomorphism given on U_{i + 1} ∩ U_{j + 1}", {"i": i + 1, "j": j + 1})
    return DescentDatum(p, d.open, d.cover, d.objects, sigma)


def _sigma_at(d: DescentDatum, i: int, j: int, w: str) -> Components:
    """sigma_ij transported to W ≤ U_ij as a morphism ρ_{W,U_i}A_i → ρ_{W,U_j}A_j"""
    p = d.prestack
    uij = d.overlap(i, j)
    moved = p.restrict_morphism(w, uij, d.source(i, j), d.target(i, j), d.sigma[(i, j)])
    if p.coherence is None:
        return moved
    before = tuple(invert(c) for c in p.tau(w, uij, d.cover[i], d.objects[i]))
    after = p.tau(w, uij, d.cover[j], d.objects[j])
    return _compose(after, _compose(moved, before))


def check_descent(d: DescentDatum) -> DescentDatum:
    """
    Check a descent datum and return it with every σ_ij present

    Missing σ_ij are filled in from σ_ji⁻¹ and σ_ii from the identity.

    Raises:
        SiteError: if the members do not cover the open
        DescentInvalid: for an invalid object, a missing or non-invertible σ
        CocycleViolation: if some σ_ii is not the identity, or the composite
            around a triple overlap is not the identity (1-based indices)
        InverseViolation: if σ_ji ∘ σ_ij is not the identity
    """
    p = d.prestack
    site = p.site
    if not site.is_covering(d.open, d.cover):
        raise SiteError(f"{list(d.cover)} is not a cover of {d.open}", {"open": d.open})
    if len(d.objects) != len(d.cover):
        raise ShapeMismatch(f"{len(d.objects)} objects for {len(d.cover)} cover members")
    for i, (member, obj) in enumerate(zip(d.cover, d.objects)):
        try:
            p.categories[member].validate(obj)
        except MathematicalViolation as exc:
            raise DescentInvalid(f"object {i + 1} is invalid: {exc.message}", {"index": i + 1})
    full = _complete(d)
    n = len(d.cover)
    for (i, j), s in full.sigma.items():
        category = p.categories[full.overlap(i, j)]
        if not category.is_morphism(full.source(i, j), full.target(i, j), s) or not category.is_isomorphism(s):
            raise DescentInvalid(f"sigma_{i + 1}{j + 1} is not an isomorphism of the restrictions",
                                 {"i": i + 1, "j": j + 1})
    for i in range(n):
        if full.sigma[(i, i)] != p.categories[d.cover[i]].identity(d.objects[i]):
            raise CocycleViolation(i + 1, i + 1, i + 1)
    for i, j in combinations(range(n), 2):
        if (i, j) in full.sigma and _compose(full.sigma[(j, i)], full.sigma[(i, j)]) != \
                p.categories[full.overlap(i, j)].identity(full.source(i, j)):
            raise InverseViolation(i + 1, j + 1)
    for i, j, k in combinations(range(n), 3):
        uij = full.overlap(i, j)
        if uij is None:
            continue
        w = site.meet(uij, d.cover[k])
        if w is None:
            continue
        loop = _compose(_sigma_at(full, k, i, w), _compose(_sigma_at(full, j, k, w), _sigma_at(full, i, j, w)))
        if loop != p.categories[w].identity(p.restrict(w, d.cover[i], d.objects[i])):
            raise CocycleViolation(i + 1, j + 1, k + 1)
    logger.debug("descent datum on %s with %d members is valid", d.open, n)
    return full


@dataclass(frozen=True)
class GluedObject:
    """A glued object with isomorphisms sigmas[i]: ρ_{U_i,U} obj → A_i"""

    obj: Any
    sigmas: Tuple[Components, ...]


def glue(d: DescentDatum) -> GluedObject:
    """
    Glue a descent datum into an object over the open

    Raises:
        DescentInvalid: if the datum fails its checks (the original failure is the cause)
        GluingUnsupported: if the prestack has no gluing routine
    """
    try:
        full = check_descent(d)
    except (CocycleViolation, InverseViolation) as exc:
        raise DescentInvalid(f"descent datum rejected: {exc.message}", exc.witness) from exc
    p = d.prestack
    if p.gluer is None:
        raise GluingUnsupported(f"prestack {p.name} has no gluing routine")
    obj, sigmas = p.gluer(full)
    glued = GluedObject(obj, tuple(tuple(s) for s in sigmas))
    category = p.categories[d.open]
    category.validate(glued.obj)
    for i, member in enumerate(d.cover):
        restricted = p.restrict(member, d.open, glued.obj)
        c = p.categories[member]
        if not c.is_morphism(restricted, d.objects[i], glued.sigmas[i]) or not c.is_isomorphism(glued.sigmas[i]):
            raise DescentInvalid(f"glued isomorphism {i + 1} is not an isomorphism", {"index": i + 1})
    logger.debug("glued %d objects over %s", len(d.cover), d.open)
    return glued


def _gluing_system(p: PrestackData, u: str, cover: Sequence[str], first: GluedObject, second: GluedObject,
                   pieces: Sequence[Components]) -> Tuple[SolutionSpace, int]:
    """
    Solutions (φ, c) of σ'_i ∘ ρ(φ) = c · f_i ∘ σ_i over every member;
    returns the space and the index of the scalar block
    """
    a, b = first.obj, second.obj
    shapes = p.categories[u].block_shapes(a, b)
    system = LinearSystem(shapes)
    phi_blocks = list(range(len(shapes)))
    p.categories[u].add_equations(system, a, b, phi_blocks)
    c_block = system.add_block(1, 1)
    for i, member in enumerate(cover):
        restriction = p.restrictions[(member, u)]
        m = restriction.matrix(a, b)
        target_shapes = p.categories[member].block_shapes(p.restrict(member, u, a), p.restrict(member, u, b))
        sigma_b, sigma_a, f = second.sigmas[i], first.sigmas[i], pieces[i]
        for k, (rows, cols) in enumerate(target_shapes):
            left = kron(sigma_b[k], identity(cols)) @ row_block(m, target_shapes, k)
            coefficients = split_columns(left, shapes, phi_blocks)
            coefficients[c_block] = -vec(f[k] @ sigma_a[k])
            system.add_rows(coefficients)
    return system.solve(), c_block


def glue_morphism(p: PrestackData, u: str, cover: Sequence[str], first: GluedObject, second: GluedObject,
                  pieces: Sequence[Components]) -> Components:
    """
    The unique φ: first.obj → second.obj whose restriction to each member
    corresponds to pieces[i] under the gluing isomorphisms

    Raises:
        CoherenceViolation: if no such morphism exists or it is not unique
    """
    space, c_block = _gluing_system(p, u, cover, first, second, pieces)
    offset = space.ambient_dim - 1
    candidates = [v for v in space.basis if not is_zero(v[offset, 0])]
    if space.dimension != 1 or not candidates:
        raise CoherenceViolation("local morphisms do not glue to a unique morphism",
                                 {"dimension": space.dimension})
    v = candidates[0].scale(1 / candidates[0][offset, 0])
    return space.unflatten(v)[:c_block]


def compatible_isomorphisms(p: PrestackData, u: str, cover: Sequence[str], first: GluedObject,
                            second: GluedObject) -> SolutionSpace:
    """
    Morphisms first.obj → second.obj (with a scalar) compatible with the
    gluing isomorphisms; for two gluings of one datum it is 1-dimensional
    """
    pieces = [tuple(identity(s.rows) for s in sig) for sig in second.sigmas]
    space, _ = _gluing_system(p, u, cover, first, second, pieces)
    return space


def restriction_datum(p: PrestackData, u: str, cover: Sequence[str], obj) -> DescentDatum:
    """The canonical descent datum of an object: its restrictions, identified on overlaps"""
    cover = tuple(cover)
    objects = tuple(p.restrict(m, u, obj) for m in cover)
    sigma = {}
    for i, j in product(range(len(cover)), repeat=2):
        w = p.site.meet(cover[i], cover[j])
        if w is None:
            continue
        there = tuple(invert(c) for c in p.tau(w, cover[j], u, obj))
        sigma[(i, j)] = _compose(there, p.tau(w, cover[i], u, obj))
    return DescentDatum(p, u, cover, objects, sigma)


# ---------------------------------------------------------------------------
# Local systems on a finite site
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SiteLocalSystem:
    """
    A locally constant sheaf over an open: a space per point and invertible
    transitions A(y) → A(x) for x ≤ y
    """

    open: str
    points: Tuple[str, ...]
    dims: Tuple[int, ...]
    transitions: Tuple[Tuple[Tuple[str, str], ExactMatrix], ...] = ()

    def dim(self, x: str) -> int:
        return self.dims[self.points.index(x)]

    def transition(self, x: str, y: str) -> ExactMatrix:
        if x == y:
            return identity(self.dim(x))
        return dict(self.transitions)[(x, y)]


def make_local_system(site: PosetSite, u: str, dims: Mapping[str, int],
                      transitions: Mapping[Tuple[str, str], ExactMatrix]) -> SiteLocalSystem:
    pts = site.points_of(u)
    pairs = site.comparable_pairs(u)
    return SiteLocalSystem(u, pts, tuple(dims[x] for x in pts),
                           tuple(((x, y), transitions[(x, y)]) for x, y in pairs))


def gauge_local_system(site: PosetSite, u: str, gauges: Mapping[str, ExactMatrix]) -> SiteLocalSystem:
    """Transitions G_x G_y⁻¹; a trivializable local system"""
    return make_local_system(
        site, u, {x: gauges[x].rows for x in site.points_of(u)},
        {(x, y): gauges[x] @ invert(gauges[y]) for x, y in site.comparable_pairs(u)},
    )


def constant_local_system(site: PosetSite, u: str, dim: int) -> SiteLocalSystem:
    return gauge_local_system(site, u, {x: identity(dim) for x in site.points_of(u)})


def validate_site_local_system(site: PosetSite, u: str, a: SiteLocalSystem) -> None:
    if a.open != u or a.points != site.points_of(u):
        raise ShapeMismatch(f"local system lives over {a.open}, expected {u}", {"open": u})
    pairs = site.comparable_pairs(u)
    given = dict(a.transitions)
    if set(given) != set(pairs):
        raise ShapeMismatch(f"transitions over {u} must be given for exactly the comparable pairs")
    for (x, y), t in given.items():
        if t.shape != (a.dim(x), a.dim(y)):
            raise ShapeMismatch(f"transition {x} <- {y} has shape {t.shape}", {"pair": [x, y]})
        if not is_invertible(t):
            raise Singular(f"transition {x} <- {y} is not invertible", {"pair": [x, y]})
    pts = a.points
    for x, y, z in product(pts, repeat=3):
        if site.point_leq(x, y) and site.point_leq(y, z) and x != z:
            if a.transition(x, y) @ a.transition(y, z) != a.transition(x, z):
                raise DescentInvalid(f"transitions do not compose along {x} <= {y} <= {z}",
                                     {"points": [x, y, z]})


def _local_system_category(site: PosetSite, u: str) -> PresentedCategory:
    pairs = site.comparable_pairs(u)
    pts = site.points_of(u)

    def equations(system: LinearSystem, a: SiteLocalSystem, b: SiteLocalSystem, blocks):
        for x, y in pairs:
            ix, iy = pts.index(x), pts.index(y)
            system.add_equation([
                Term(blocks[ix], identity(b.dim(x)), a.transition(x, y)),
                Term(blocks[iy], -b.transition(x, y), identity(a.dim(y))),
            ])

    return PresentedCategory(f"Loc({u})", lambda a: a.dims, equations,
                             lambda a: validate_site_local_system(site, u, a))


def _local_system_restriction(site: PosetSite, v: str, u: str, source: PresentedCategory,
                              target: PresentedCategory) -> FunctorData:
    keep = [site.points_of(u).index(x) for x in site.points_of(v)]
    pairs = set(site.comparable_pairs(v))

    def on_object(a: SiteLocalSystem) -> SiteLocalSystem:
        return SiteLocalSystem(v, site.points_of(v), tuple(a.dims[k] for k in keep),
                               tuple(item for item in a.transitions if item[0] in pairs))

    return FunctorData(f"rho[{v},{u}]", source, target, on_object,
                       lambda a, b, comps: tuple(comps[k] for k in keep))


def _glue_local_systems(d: DescentDatum) -> Tuple[SiteLocalSystem, Tuple[Components, ...]]:
    """
    Each point takes its stalk from the first member containing it; the
    other members are identified with it through σ at that point
    """
    site = d.prestack.site
    u = d.open
    pts = site.points_of(u)
    home = {x: next(i for i, m in enumerate(d.cover) if x in site.points_of(m)) for x in pts}

    def sigma_at(i: int, j: int, x: str) -> ExactMatrix:
        if i == j:
            return identity(d.objects[i].dim(x))
        w = site.meet(d.cover[i], d.cover[j])
        return d.sigma[(i, j)][site.points_of(w).index(x)]

    def to_member(j: int, x: str) -> ExactMatrix:
        return sigma_at(home[x], j, x)

    dims = {x: d.objects[home[x]].dim(x) for x in pts}
    transitions = {}
    for x, y in site.comparable_pairs(u):
        j = home[y]
        transitions[(x, y)] = invert(to_member(j, x)) @ d.objects[j].transition(x, y)
    glued = make_local_system(site, u, dims, transitions)
    sigmas = tuple(
        tuple(to_member(j, x) for x in site.points_of(member))
        for j, member in enumerate(d.cover)
    )
    logger.debug("glued local system over %s: stalks taken from members %s", u, home)
    return glued, sigmas


def local_system_stack(site: PosetSite) -> PrestackData:
    """The stack of local systems, with strict restrictions and gluing"""
    categories = {u: _local_system_category(site, u) for u in site.opens}
    restrictions = {
        (v, u): _local_system_restriction(site, v, u, categories[u], categories[v])
        for v, u in product(site.opens, repeat=2) if site.leq(v, u)
    }
    return PrestackData(site, categories, restrictions, gluer=_glue_local_systems, name="local-systems")


def constant_prestack(site: PosetSite, category: PresentedCategory) -> PrestackData:
    """The same category everywhere with identity restrictions; no gluing"""
    restriction = identity_functor(category)
    return PrestackData(
        site, {u: category for u in site.opens},
        {(v, u): restriction for v, u in product(site.opens, repeat=2) if site.leq(v, u)},
        name=f"constant[{category.name}]",
    )


# ---------------------------------------------------------------------------
# Morphisms of prestacks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StackMorphismData:
    """
    Functors Θ(U) with comparisons Θ(V,U)(a): Θ(V)(ρ_VU a) → ρ'_VU(Θ(U) a);
    a missing ``comparisons`` means identities
    """

    source: PrestackData
    target: PrestackData
    functors: Dict[str, FunctorData]
    comparisons: Optional[Callable[[str, str, Any], Components]] = None
    name: str = "theta"

    def comparison(self, v: str, u: str, obj) -> Components:
        if self.comparisons is None:
            return self.target.categories[v].identity(self.functors[v](self.source.restrict(v, u, obj)))
        return tuple(self.comparisons(v, u, obj))


def check_stack_morphism(theta: StackMorphismData, samples: Mapping[str, Sequence[Any]]) -> int:
    """
    Check the comparison coherence on every chain W ≤ V ≤ U

    Returns:
        number of (chain, sample) pairs checked

    Raises:
        IncoherentMorphism: with the failing chain and sample
    """
    src, tgt = theta.source, theta.target
    checked = 0
    for w, v, u in src.site.chains(3):
        for index, a in enumerate(samples.get(u, ())):
            inner = src.restrict(v, u, a)
            image = theta.functors[u](a)
            checked += 1
            try:
                path_1 = _compose(
                    theta.comparison(w, u, a),
                    theta.functors[w].on_morphism(src.restrict(w, v, inner), src.restrict(w, u, a),
                                                  src.tau(w, v, u, a)),
                )
                moved = tgt.restrict_morphism(w, v, theta.functors[v](inner), tgt.restrict(v, u, image),
                                              theta.comparison(v, u, a))
                path_2 = _compose(tgt.tau(w, v, u, image), _compose(moved, theta.comparison(w, v, inner)))
                equal = path_1 == path_2
            except ShapeMismatch:
                equal = False
            if not equal:
                raise IncoherentMorphism(f"comparisons of {theta.name} do not cohere on {w} <= {v} <= {u}",
                                         {"chain": [w, v, u], "sample": index})
    return checked


def _per_open(p: PrestackData, build: Callable[[str], FunctorData]) -> Dict[str, FunctorData]:
    return {u: build(u) for u in p.site.opens}


def identity_morphism_of_stacks(p: PrestackData) -> StackMorphismData:
    return StackMorphismData(p, p, _per_open(p, lambda u: identity_functor(p.categories[u])), name="identity")


def scalar_conjugation_morphism(p: PrestackData, scalars: Mapping[str, Any]) -> StackMorphismData:
    """Transitions T_xy ↦ (c_x / c_y) T_xy on local systems; morphisms unchanged"""
    values = {x: scalar(c) for x, c in scalars.items()}

    def build(u: str) -> FunctorData:
        def on_object(a: SiteLocalSystem) -> SiteLocalSystem:
            return SiteLocalSystem(a.open, a.points, a.dims, tuple(
                ((x, y), t.scale(values[x] / values[y])) for (x, y), t in a.transitions
            ))

        return FunctorData(f"conj[{u}]", p.categories[u], p.categories[u], on_object, lambda a, b, comps: comps)

    return StackMorphismData(p, p, _per_open(p, build), name="scalar-conjugation")


def zero_morphism_of_stacks(p: PrestackData) -> StackMorphismData:
    """Every object goes to the zero local system"""
    def build(u: str) -> FunctorData:
        def on_object(a: SiteLocalSystem) -> SiteLocalSystem:
            return SiteLocalSystem(a.open, a.points, tuple(0 for _ in a.dims),
                                   tuple((pair, zeros(0, 0)) for pair, _ in a.transitions))

        return FunctorData(f"zero[{u}]", p.categories[u], p.categories[u], on_object,
                           lambda a, b, comps: tuple(zeros(0, 0) for _ in comps))

    return StackMorphismData(p, p, _per_open(p, build), name="zero")


def doubling_morphism_of_stacks(p: PrestackData) -> StackMorphismData:
    """A ↦ A ⊕ A"""
    def build(u: str) -> FunctorData:
        def on_object(a: SiteLocalSystem) -> SiteLocalSystem:
            return SiteLocalSystem(a.open, a.points, tuple(2 * d for d in a.dims),
                                   tuple((pair, block_diag(t, t)) for pair, t in a.transitions))

        return FunctorData(f"double[{u}]", p.categories[u], p.categories[u], on_object,
                           lambda a, b, comps: tuple(block_diag(c, c) for c in comps))

    return StackMorphismData(p, p, _per_open(p, build), name="doubling")


@dataclass
class WeakIsoVerdict:
    """
    Stalkwise Freyd verdicts; ``essential_checked`` is False when no target
    samples were given, so essential surjectivity was not tested
    """

    stalks: Dict[str, EquivalenceReport]
    cross_check: Optional[Dict[str, Any]] = None
    essential_checked: bool = True

    @property
    def weak_isomorphism(self) -> bool:
        return all(r.ok for r in self.stalks.values())

    @property
    def witness(self) -> Optional[Dict[str, Any]]:
        for x, r in self.stalks.items():
            if not r.ok:
                return {"point": x, **(r.witness or {})}
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "weak_isomorphism": self.weak_isomorphism,
            "stalks": {x: r.to_dict() for x, r in self.stalks.items()},
            "cross_check": self.cross_check,
            "essential_checked": self.essential_checked,
            "witness": self.witness,
        }


def _samples_at(p: PrestackData, u: str, samples: Mapping[str, Sequence[Any]]) -> List[Any]:
    out = list(samples.get(u, ()))
    for bigger in p.site.opens:
        if bigger != u and p.site.leq(u, bigger):
            out.extend(p.restrict(u, bigger, a) for a in samples.get(bigger, ()))
    return out


def check_weak_iso(theta: StackMorphismData, samples: Mapping[str, Sequence[Any]],
                   target_samples: Optional[Mapping[str, Sequence[Any]]] = None) -> WeakIsoVerdict:
    """
    Freyd criteria for Θ at the minimal open of every point

    Samples over larger opens are restricted down to each stalk. One open
    that is not minimal for any point is checked directly as a cross-check.

    Raises:
        IncoherentMorphism: if the comparisons do not cohere
    """
    check_stack_morphism(theta, samples)
    site = theta.source.site
    target_samples = target_samples or {}
    verdict = WeakIsoVerdict({}, essential_checked=any(target_samples.values()))
    if not verdict.essential_checked:
        logger.info("no target samples for %s; essential surjectivity not checked", theta.name)
    for x in site.points:
        u = site.minimal_open(x)
        verdict.stalks[x] = check_equivalence(
            theta.functors[u], _samples_at(theta.source, u, samples),
            _samples_at(theta.target, u, target_samples),
        )
    minimal = set(site.minimal.values())
    others = [u for u in site.opens if u not in minimal and samples.get(u)]
    if others:
        u = others[0]
        report = check_equivalence(theta.functors[u], list(samples[u]), list(target_samples.get(u, ())))
        verdict.cross_check = {"open": u, "ok": report.ok, "agrees": report.ok == verdict.weak_isomorphism}
    logger.info("weak isomorphism check of %s: %s", theta.name, verdict.weak_isomorphism)
    return verdict


@dataclass
class LocalExtension:
    """Θ over U1 ∪ U2 built by gluing, with the isomorphisms to the pieces"""

    open: str
    functor: FunctorData
    comparisons: Callable[[Any], Tuple[Components, ...]]


def extend_local_morphism(theta: StackMorphismData, u1: str, u2: str) -> LocalExtension:
    """
    Extend Θ from U1, U2 and their overlap to U1 ∪ U2

    An object a over the union is restricted to both pieces, sent through
    Θ(U1) and Θ(U2), and the images are glued along the image of the
    canonical identification over the overlap.

    Raises:
        GluingUnsupported: if the target prestack cannot glue
        CoherenceViolation: if the pieces disagree on the overlap
    """
    src, tgt = theta.source, theta.target
    site = src.site
    u = site.join(u1, u2)
    w = site.meet(u1, u2)
    cover = (u1, u2)
    if tgt.gluer is None:
        raise GluingUnsupported(f"prestack {tgt.name} has no gluing routine")
    cache: Dict[int, Tuple[Any, GluedObject]] = {}

    def glued(a) -> GluedObject:
        key = id(a)
        if key in cache and cache[key][0] is a:
            return cache[key][1]
        pieces = (src.restrict(u1, u, a), src.restrict(u2, u, a))
        images = tuple(theta.functors[m](piece) for m, piece in zip(cover, pieces))
        sigma = {}
        if w is not None:
            canonical = _compose(tuple(invert(c) for c in src.tau(w, u2, u, a)), src.tau(w, u1, u, a))
            left, right = src.restrict(w, u1, pieces[0]), src.restrict(w, u2, pieces[1])
            moved = theta.functors[w].on_morphism(left, right, canonical)
            try:
                before = tuple(invert(c) for c in theta.comparison(w, u1, pieces[0]))
                image = _compose(theta.comparison(w, u2, pieces[1]), _compose(moved, before))
            except (ShapeMismatch, MathematicalViolation) as exc:
                raise CoherenceViolation(f"comparisons over {w} do not compose", {"open": w}) from exc
            category = tgt.categories[w]
            source_obj = tgt.restrict(w, u1, images[0])
            target_obj = tgt.restrict(w, u2, images[1])
            if not category.is_morphism(source_obj, target_obj, image) or not category.is_isomorphism(image):
                raise CoherenceViolation(f"pieces of {theta.name} disagree over {w}", {"open": w})
            sigma[(0, 1)] = image
        datum = DescentDatum(tgt, u, cover, images, sigma)
        try:
            result = glue(datum)
        except (DescentInvalid, ShapeMismatch) as exc:
            raise CoherenceViolation(f"pieces of {theta.name} do not glue over {u}", {"open": u}) from exc
        cache[key] = (a, result)
        return result

    def on_morphism(a, b, comps):
        first, second = glued(a), glued(b)
        pieces = []
        for m in cover:
            ra, rb = src.restrict(m, u, a), src.restrict(m, u, b)
            pieces.append(theta.functors[m].on_morphism(ra, rb, src.restrict_morphism(m, u, a, b, comps)))
        return glue_morphism(tgt, u, cover, first, second, pieces)

    functor = FunctorData(f"{theta.name}[{u}]", src.categories[u], tgt.categories[u],
                          lambda a: glued(a).obj, on_morphism)
    return LocalExtension(u, functor, lambda a: glued(a).sigmas)


# ---------------------------------------------------------------------------
# Inverse image and stackification
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SiteMap:
    """An open map: every open of ``source`` goes to an open of ``target``"""

    source: PosetSite
    target: PosetSite
    open_map: Dict[str, str]

    def __call__(self, u: str) -> str:
        return self.open_map[u]


def validate_site_map(f: SiteMap) -> None:
    """
    Raises:
        NotOpenMap: if an open is unmapped, lands outside the target, breaks
            monotonicity, or a declared cover does not map to a cover
    """
    for u in f.source.opens:
        image = f.open_map.get(u)
        if image is None or image not in f.target.opens:
            raise NotOpenMap(f"{u} does not map to an open", {"open": u})
    for v, u in product(f.source.opens, repeat=2):
        if f.source.leq(v, u) and not f.target.leq(f(v), f(u)):
            raise NotOpenMap(f"{v} <= {u} is not preserved", {"opens": [v, u]})
    for u, families in f.source.covers.items():
        for family in families:
            if not f.target.is_covering(f(u), [f(m) for m in family]):
                raise NotOpenMap(f"cover {list(family)} of {u} does not map to a cover", {"open": u})


def projection_map(site: PosetSite, first: PosetSite) -> SiteMap:
    """U*V ↦ U for a site built by product_site"""
    return SiteMap(site, first, {u: u.split("*", 1)[0] for u in site.opens})


def inverse_image(f: SiteMap, p: PrestackData) -> PrestackData:
    """(f*F)(U) = F(f(U)) with restrictions, coherence and gluing carried along"""
    validate_site_map(f)
    if p.site is not f.target:
        raise NotOpenMap("prestack lives on a different site than the target of the map")
    categories = {u: p.categories[f(u)] for u in f.source.opens}
    restrictions = {
        (v, u): p.restrictions[(f(v), f(u))]
        for v, u in product(f.source.opens, repeat=2) if f.source.leq(v, u)
    }
    coherence = None
    if p.coherence is not None:
        def coherence(w, v, u, obj):
            return p.coherence(f(w), f(v), f(u), obj)

    gluer = None
    if p.gluer is not None:
        def gluer(d: DescentDatum):
            moved = DescentDatum(p, f(d.open), tuple(f(m) for m in d.cover), d.objects, d.sigma)
            return p.gluer(_complete(moved))

    return PrestackData(f.source, categories, restrictions, coherence, gluer, name=f"inverse-image[{p.name}]")


def stackify(p: PrestackData) -> PrestackData:
    raise NotImplementedError("stackification is not constructive; supply a stack directly")
