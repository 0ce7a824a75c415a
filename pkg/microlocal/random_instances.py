"""
Random Instances
Seeded generators for the batch suites: quivers, equivariant families,
Lagrangian triples and loops, finite sites with local systems and descent
data. Every generator takes an explicit random.Random so a seed reproduces
the whole run.

Matrix entries are drawn from {-2, ..., 2}; quivers are rejection-sampled
until every 1 + m_ii is invertible.
"""

import logging
import random
from fractions import Fraction
from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from .equivariant import (
    ActionKernel,
    EquivariantQuiver,
    GroupPresentation,
    identity_kernel,
    permutation_kernel,
)
from .exact_kernel import (
    ExactMatrix,
    SolutionSpace,
    block_diag,
    block_matrix,
    identity,
    invert,
    is_invertible,
    matrix,
    scalar,
    zeros,
)
from .melded_systems import GroupoidArrow, Lambda0Model, Lambda0Object
from .quiver_core import Quiver, conjugate_quiver, direct_sum
from .stack_site import (
    DescentDatum,
    PosetSite,
    PrestackData,
    SiteLocalSystem,
    make_local_system,
    restriction_datum,
)
from .symplectic_maslov import (
    LagrangianFrame,
    LagrangianTriple,
    SymplecticSpace,
    TripleLoop,
    graph_lagrangian,
)

logger = logging.getLogger(__name__)

ENTRY_RANGE = (-2, 2)
MAX_REJECTIONS = 200


def random_matrix(rng: random.Random, rows: int, cols: int) -> ExactMatrix:
    low, high = ENTRY_RANGE
    return matrix([[rng.randint(low, high) for _ in range(cols)] for _ in range(rows)], rows, cols)


def random_invertible(rng: random.Random, n: int) -> ExactMatrix:
    for _ in range(MAX_REJECTIONS):
        m = random_matrix(rng, n, n)
        if is_invertible(m):
            return m
    return identity(n)


def random_symmetric(rng: random.Random, n: int, max_rank: Optional[int] = None) -> ExactMatrix:
    """Sum of r random terms c·v·vᵀ, so the rank is at most r"""
    r = n if max_rank is None else max_rank
    total = zeros(n, n)
    for _ in range(r):
        v = random_matrix(rng, n, 1)
        total = total + (v @ v.T).scale(rng.choice([-2, -1, 1, 2]))
    return total


# ---------------------------------------------------------------------------
# Quivers
# ---------------------------------------------------------------------------

def random_quiver(rng: random.Random, n: int, max_dim: int) -> Quiver:
    dims = [rng.randint(1, max_dim) for _ in range(n)]
    return _sample_quiver(rng, dims, lambda j, i: random_matrix(rng, dims[j], dims[i]))


def _sample_quiver(rng: random.Random, dims: Sequence[int], draw) -> Quiver:
    for _ in range(MAX_REJECTIONS):
        q = Quiver(tuple(dims), tuple(tuple(draw(j, i) for i in range(len(dims))) for j in range(len(dims))))
        if all(is_invertible(identity(dims[i]) + q.maps[i][i]) for i in range(len(dims))):
            return q
    return Quiver.zero(dims)


def random_element(rng: random.Random, space: SolutionSpace) -> Tuple[ExactMatrix, ...]:
    """A random integer combination of a Hom basis"""
    if not space.dimension:
        return space.unflatten(zeros(space.ambient_dim, 1))
    low, high = ENTRY_RANGE
    return space.unflatten(space.element([rng.randint(low, high) for _ in range(space.dimension)]))


# ---------------------------------------------------------------------------
# Equivariant families
# ---------------------------------------------------------------------------

def _cycle_order(perm: Sequence[int]) -> int:
    order = 1
    for cycle in _cycles(perm):
        length = len(cycle)
        a, b = order, length
        while b:
            a, b = b, a % b
        order = order * length // a
    return order


def _cycles(perm: Sequence[int]) -> List[List[int]]:
    seen, out = set(), []
    for start in range(len(perm)):
        if start in seen:
            continue
        cycle, where = [], start
        while where not in seen:
            seen.add(where)
            cycle.append(where)
            where = perm[where]
        out.append(cycle)
    return out


def random_presentation(rng: random.Random, n: int, max_generators: int) -> GroupPresentation:
    """Random permutations with their order relations g^k"""
    count = rng.randint(1, max_generators)
    generators = tuple(f"g{k + 1}" for k in range(count))
    perms = []
    for _ in generators:
        perm = list(range(n))
        rng.shuffle(perm)
        perms.append(tuple(perm))
    relations = tuple(
        tuple((g, 1) for _ in range(_cycle_order(perm))) for g, perm in zip(generators, perms)
    )
    return GroupPresentation(n, generators, relations, tuple(perms))


def _pair_orbits(presentation: GroupPresentation) -> List[List[Tuple[int, int]]]:
    graph = nx.Graph()
    n = presentation.n
    graph.add_nodes_from(product(range(n), repeat=2))
    for perm in presentation.point_action:
        graph.add_edges_from(((j, i), (perm[j], perm[i])) for j, i in product(range(n), repeat=2))
    return [sorted(c) for c in sorted(nx.connected_components(graph), key=min)]


def invariant_quiver(rng: random.Random, presentation: GroupPresentation, max_dim: int) -> Quiver:
    """A quiver with m_{g(j)g(i)} = m_ji for every generator"""
    n = presentation.n
    point_orbits = {p: min(c) for c in _pair_orbits(presentation) for p in c if p[0] == p[1]}
    orbit_dim = {}
    dims = []
    for i in range(n):
        root = point_orbits[(i, i)]
        if root not in orbit_dim:
            orbit_dim[root] = rng.randint(1, max_dim)
        dims.append(orbit_dim[root])
    orbits = _pair_orbits(presentation)
    for _ in range(MAX_REJECTIONS):
        maps: Dict[Tuple[int, int], ExactMatrix] = {}
        for orbit in orbits:
            j, i = orbit[0]
            m = random_matrix(rng, dims[j], dims[i])
            for pair in orbit:
                maps[pair] = m
        q = Quiver.from_maps(dims, maps)
        if all(is_invertible(identity(dims[i]) + q.maps[i][i]) for i in range(n)):
            return q
    return Quiver.zero(dims)


def regauge(rng: random.Random, x: EquivariantQuiver) -> EquivariantQuiver:
    """Transport x along random P_i: m ↦ P_j m P_i⁻¹, γ_{i,g} ↦ P_{g(i)} γ_{i,g} P_i⁻¹"""
    changes = [random_invertible(rng, d) for d in x.quiver.dims]
    inverses = [invert(p) for p in changes]
    structure = tuple(
        tuple(changes[perm[i]] @ x.structure[k][i] @ inverses[i] for i in range(x.quiver.n))
        for k, perm in enumerate(x.presentation.point_action)
    )
    return EquivariantQuiver(conjugate_quiver(x.quiver, changes, inverses), x.kernel, structure)


def random_equivariant_quiver(rng: random.Random, kernel: ActionKernel, max_dim: int) -> EquivariantQuiver:
    """
    An invariant quiver with identity structure, twisted by a ±1 character on
    generators of even order, then regauged
    """
    p = kernel.presentation
    q = invariant_quiver(rng, p, max_dim)
    structure = []
    for k in range(len(p.generators)):
        sign = rng.choice([1, -1]) if _relation_power(p, k) % 2 == 0 else 1
        structure.append(tuple(identity(q.dims[i]).scale(sign) for i in range(p.n)))
    return regauge(rng, EquivariantQuiver(q, kernel, tuple(structure)))


def _relation_power(p: GroupPresentation, k: int) -> int:
    # generators without an order relation are unconstrained: report an even power
    g = p.generators[k]
    powers = [len(w) for w in p.relations if all(letter == (g, 1) for letter in w)]
    return powers[0] if powers else 2


def random_kernel(rng: random.Random, n: int, max_generators: int) -> ActionKernel:
    if rng.random() < 0.25:
        count = rng.randint(1, max_generators)
        generators = [f"g{k + 1}" for k in range(count)]
        return identity_kernel(n, generators)
    return permutation_kernel(random_presentation(rng, n, max_generators))


def equivariant_direct_sum(x: EquivariantQuiver, y: EquivariantQuiver) -> EquivariantQuiver:
    structure = tuple(
        tuple(block_diag(a, b) for a, b in zip(sx, sy)) for sx, sy in zip(x.structure, y.structure)
    )
    return EquivariantQuiver(direct_sum(x.quiver, y.quiver), x.kernel, structure)


def random_equivariant_pair(rng: random.Random, n: int, max_dim: int,
                            max_generators: int) -> Tuple[EquivariantQuiver, EquivariantQuiver]:
    """x together with y = x, a regauged copy, x ⊕ x or an independent family"""
    kernel = random_kernel(rng, n, max_generators)
    x = random_equivariant_quiver(rng, kernel, max_dim)
    choice = rng.randrange(4)
    if choice == 0:
        y = x
    elif choice == 1:
        y = regauge(rng, x)
    elif choice == 2 and 2 * max(x.quiver.dims) <= max_dim:
        y = equivariant_direct_sum(x, x)
    else:
        y = random_equivariant_quiver(rng, kernel, max_dim)
    return x, y


def zero_block_family(rng: random.Random, kernel: ActionKernel, block: Sequence[int],
                      max_dim: int) -> EquivariantQuiver:
    """A random family whose maps among the sheets of ``block`` all vanish"""
    x = random_equivariant_quiver(rng, kernel, max_dim)
    maps = {(j, i): x.quiver.maps[j][i] for j, i in product(range(x.quiver.n), repeat=2)
            if not (j in block and i in block)}
    q = Quiver.from_maps(x.quiver.dims, maps)
    return EquivariantQuiver(q, kernel, x.structure)


# ---------------------------------------------------------------------------
# Lagrangian triples and loops
# ---------------------------------------------------------------------------

def random_symplectic(rng: random.Random, n: int) -> ExactMatrix:
    """diag(A, A⁻ᵀ) · [[I, B], [0, I]] · [[I, 0], [C, I]] with B, C symmetric"""
    a = random_invertible(rng, n)
    b = random_symmetric(rng, n, rng.randint(0, n))
    c = random_symmetric(rng, n, rng.randint(0, n))
    z = zeros(n, n)
    scale = block_matrix([[a, z], [z, invert(a).T]])
    upper = block_matrix([[identity(n), b], [z, identity(n)]])
    lower = block_matrix([[identity(n), z], [c, identity(n)]])
    return scale @ upper @ lower


def random_triple(rng: random.Random, n: int) -> LagrangianTriple:
    """
    Graphs of S1, S1 + D12 and S1 + D12 + D23 with low-rank D, moved by a
    random symplectic matrix and given random frame bases
    """
    space = SymplecticSpace.standard(n)
    s1 = random_symmetric(rng, n)
    s2 = s1 + random_symmetric(rng, n, rng.randint(0, n))
    s3 = s2 + random_symmetric(rng, n, rng.randint(0, n))
    move = random_symplectic(rng, n)
    frames = []
    for s in (s1, s2, s3):
        base = graph_lagrangian(space, s)
        frames.append(LagrangianFrame(space, move @ base.basis @ random_invertible(rng, n)))
    return LagrangianTriple(*frames)


LOOP_PARAMETERS: Tuple[Optional[Fraction], ...] = (
    Fraction(0), Fraction(1, 3), Fraction(1), Fraction(3), None,
    Fraction(-3), Fraction(-1), Fraction(-1, 3), Fraction(0),
)


def _midpoint(a: Optional[Fraction], b: Optional[Fraction]) -> Fraction:
    if a is None:
        return 2 * b
    if b is None:
        return 2 * a
    return (a + b) / 2


def refine_parameters(params: Sequence[Optional[Fraction]]) -> List[Optional[Fraction]]:
    out: List[Optional[Fraction]] = []
    for a, b in zip(params, params[1:]):
        out.extend([a, _midpoint(a, b)])
    out.append(params[-1])
    return out


def unit_phase(u: Optional[Fraction]):
    """(1 − u²)/(1 + u²) + i·2u/(1 + u²); u = None is the point at infinity"""
    if u is None:
        return scalar(-1)
    d = 1 + u * u
    return scalar(((1 - u * u) / d, 2 * u / d))


def phase_loop(t: LagrangianTriple, level: int = 1, frame: int = 0) -> TripleLoop:
    """
    The loop that turns the basis of one frame once around the unit circle

    ``level`` counts halvings of the base parameter grid.
    """
    params: List[Optional[Fraction]] = list(LOOP_PARAMETERS)
    for _ in range(level):
        params = refine_parameters(params)
    samples = []
    for u in params:
        frames = list(t.frames)
        frames[frame] = LagrangianFrame(t.space, frames[frame].basis.scale(unit_phase(u)))
        samples.append(LagrangianTriple(*frames))
    return TripleLoop(tuple(samples))


def constant_loop(t: LagrangianTriple, length: int = 4) -> TripleLoop:
    return TripleLoop(tuple(t for _ in range(length)))


# ---------------------------------------------------------------------------
# Finite sites
# ---------------------------------------------------------------------------

def down_set_site(points: Sequence[str], below: Sequence[Tuple[str, str]]) -> PosetSite:
    """
    The site of a finite poset: opens are the principal down-sets, the whole
    space and all their intersections; the whole space is covered by the
    principal down-sets of the maximal points
    """
    order = nx.DiGraph()
    order.add_nodes_from(points)
    order.add_edges_from(below)
    closure = nx.transitive_closure_dag(order)

    def down(x: str) -> frozenset:
        return frozenset([x]) | frozenset(closure.predecessors(x))

    sets = {down(x) for x in points} | {frozenset(points)}
    changed = True
    while changed:
        changed = False
        for a, b in combinations(list(sets), 2):
            c = a & b
            if c and c not in sets:
                sets.add(c)
                changed = True

    def name(s: frozenset) -> str:
        return "+".join(x for x in points if x in s)

    ordered = sorted(sets, key=lambda s: (len(s), name(s)))
    opens = [name(s) for s in ordered]
    inclusions = [(name(a), name(b)) for a, b in product(ordered, repeat=2) if a < b]
    minimal = {x: name(down(x)) for x in points}
    maximal = [x for x in points if not any(closure.has_edge(x, y) for y in points)]
    whole = name(frozenset(points))
    covers = {whole: [[name(down(x)) for x in maximal]]}
    return PosetSite(opens, inclusions, minimal, covers)


def pseudo_circle_site() -> PosetSite:
    """Two open points below two closed points"""
    return down_set_site(["a", "b", "c", "d"], [("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")])


def random_site(rng: random.Random, max_points: int = 3) -> PosetSite:
    if max_points >= 4 and rng.random() < 0.25:
        return pseudo_circle_site()
    count = rng.randint(2, max(2, min(max_points, 3)))
    points = [f"p{k + 1}" for k in range(count)]
    below = [(x, y) for x, y in combinations(points, 2) if rng.random() < 0.4]
    logger.debug("random site on %s with order %s", points, below)
    return down_set_site(points, below)


def whole_space(site: PosetSite) -> str:
    return max(site.opens, key=lambda u: len(site.points_of(u)))


def _free_pairs(site: PosetSite, u: str) -> List[Tuple[str, str]]:
    """Comparable pairs that are not part of any longer chain"""
    pairs = site.comparable_pairs(u)
    inside = set(site.points_of(u))
    free = []
    for x, y in pairs:
        chained = any(
            z not in (x, y) and (site.point_leq(z, x) or site.point_leq(y, z) or
                                 (site.point_leq(x, z) and site.point_leq(z, y)))
            for z in inside
        )
        if not chained:
            free.append((x, y))
    return free


def random_site_local_system(rng: random.Random, site: PosetSite, u: str, dim: int) -> SiteLocalSystem:
    """
    Gauge transitions G_x G_y⁻¹, with an extra random twist on pairs that no
    composite constrains
    """
    gauges = {x: random_invertible(rng, dim) for x in site.points_of(u)}
    twisted = set(pair for pair in _free_pairs(site, u) if rng.random() < 0.5)
    transitions = {}
    for x, y in site.comparable_pairs(u):
        twist = random_invertible(rng, dim) if (x, y) in twisted else identity(dim)
        transitions[(x, y)] = gauges[x] @ twist @ invert(gauges[y])
    return make_local_system(site, u, {x: dim for x in site.points_of(u)}, transitions)


def regauged_object(rng: random.Random, site: PosetSite, a: SiteLocalSystem) -> Tuple[SiteLocalSystem, Tuple[ExactMatrix, ...]]:
    """H·a for random H_x, with the components of H"""
    h = {x: random_invertible(rng, a.dim(x)) for x in a.points}
    transitions = {(x, y): h[x] @ t @ invert(h[y]) for (x, y), t in a.transitions}
    moved = make_local_system(site, a.open, {x: a.dim(x) for x in a.points}, transitions)
    return moved, tuple(h[x] for x in a.points)


def random_descent_datum(rng: random.Random, p: PrestackData, u: str, cover: Sequence[str],
                         obj: SiteLocalSystem) -> Tuple[DescentDatum, Tuple[Tuple[ExactMatrix, ...], ...]]:
    """
    The restriction datum of obj with every member regauged

    Returns the datum and the isomorphisms ρ obj → A_i.
    """
    site = p.site
    base = restriction_datum(p, u, cover, obj)
    objects, gauges = [], []
    for member, local in zip(base.cover, base.objects):
        moved, h = regauged_object(rng, site, local)
        objects.append(moved)
        gauges.append(h)
    sigma = {}
    for (i, j), s in base.sigma.items():
        w = site.meet(base.cover[i], base.cover[j])
        sigma[(i, j)] = tuple(
            _component(site, base.cover[j], gauges[j], x) @ s[k] @ invert(_component(site, base.cover[i], gauges[i], x))
            for k, x in enumerate(site.points_of(w))
        )
    return DescentDatum(p, u, base.cover, tuple(objects), sigma), tuple(gauges)


def _component(site: PosetSite, member: str, gauge: Sequence[ExactMatrix], x: str) -> ExactMatrix:
    return gauge[site.points_of(member).index(x)]


def plant_violation(d: DescentDatum) -> Tuple[DescentDatum, str]:
    """
    Break a valid datum so the damage is always detectable: doubling one σ_ij
    of an overlapping pair (σ_ji kept) breaks the inverse law, doubling σ_ii
    breaks the unit law
    """
    sigma = dict(d.sigma)
    pairs = sorted(k for k in sigma if k[0] != k[1] and (k[1], k[0]) in sigma)
    if pairs:
        key = pairs[0]
        kind = "inverse"
    else:
        key = (0, 0)
        kind = "unit"
        if key not in sigma:
            sigma[key] = d.prestack.categories[d.cover[0]].identity(d.objects[0])
    sigma[key] = tuple(c.scale(2) for c in sigma[key])
    return DescentDatum(d.prestack, d.open, d.cover, d.objects, sigma), kind


# ---------------------------------------------------------------------------
# Groupoid representations
# ---------------------------------------------------------------------------

def random_groupoid_representation(rng: random.Random, objects: int, arrows: int,
                                   max_dim: int) -> Lambda0Object:
    """A free groupoid on random arrows with invertible matrices; dims constant on components"""
    names = tuple(f"o{k + 1}" for k in range(objects))
    edges = []
    for k in range(arrows):
        s, t = rng.choice(names), rng.choice(names)
        edges.append(GroupoidArrow(f"e{k + 1}", s, t))
    model = Lambda0Model(names, tuple(edges))
    dims = {}
    for component in model.components():
        d = rng.randint(1, max_dim)
        for obj in component:
            dims[obj] = d
    matrices = tuple(random_invertible(rng, dims[e.source]) for e in edges)
    return Lambda0Object(model, tuple(dims[o] for o in names), matrices)


def regauged_representation(rng: random.Random, a: Lambda0Object) -> Lambda0Object:
    h = {o: random_invertible(rng, a.dim(o)) for o in a.model.objects}
    matrices = tuple(h[e.target] @ m @ invert(h[e.source]) for e, m in zip(a.model.arrows, a.matrices))
    return Lambda0Object(a.model, a.dims, matrices)
