"""
Batch Suites
Seeded property suites over random instances, with replayable failures

Each suite draws its cases from microlocal.random_instances. Case k of a
suite run with seed s uses random.Random(f"{s}:{suite}:{k}"), so a single
failing case is replayed from (suite, seed, case, caps) alone.
"""

import hashlib
import logging
import random
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Tuple

import networkx as nx
import pandas as pd
import sympy
from sympy import QQ_I

from .equivariant import (
    EquivariantQuiver,
    GroupPresentation,
    hom_equivariant,
    permutation_kernel,
)
from .errors import (
    CocycleViolation,
    GammaViolation,
    InverseViolation,
    ParseError,
    UnknownSuite,
    WorkbenchError,
)
from .exact_kernel import ExactMatrix, congruence_signature, identity, is_invertible, matrix
from .fiber_product import delta, delta_morphism, delta_target_category, full_faithfulness_check, lift_morphism
from .melded_systems import (
    CoveringData,
    Lambda0Object,
    Lambda1Model,
    MeldedObject,
    from_equivariant_family,
    hom_melded,
    validate_melded,
    variation_report,
)
from .quiver_core import (
    Quiver,
    QuiverMorphism,
    compose,
    compose_ls,
    direct_sum,
    hom_basis,
    identity_morphism,
    validate_local_system,
    vanishing_cycles,
    vanishing_cycles_map,
)
from .random_instances import (
    constant_loop,
    phase_loop,
    random_descent_datum,
    random_element,
    random_equivariant_pair,
    random_equivariant_quiver,
    random_groupoid_representation,
    random_kernel,
    random_presentation,
    random_quiver,
    random_site,
    random_site_local_system,
    random_symplectic,
    random_triple,
    plant_violation,
    regauged_representation,
    whole_space,
    zero_block_family,
)
from .serialization import dumps, encode_descent, encode_equivariant, encode_quiver, encode_triple
from .stack_site import (
    GluedObject,
    check_descent,
    check_weak_iso,
    compatible_isomorphisms,
    doubling_morphism_of_stacks,
    glue,
    identity_morphism_of_stacks,
    local_system_stack,
    scalar_conjugation_morphism,
    zero_morphism_of_stacks,
)
from .symplectic_maslov import TripleLoop, act, maslov_holonomy, negative_frame, refined_holonomy, triple_form

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """
    Seed and size caps of a suite run; ``cases`` overrides the per-suite
    default count
    """

    seed: int = 1
    cases: Optional[int] = None
    max_n: int = 4
    max_dim: int = 3
    max_generators: int = 2
    json_out: Optional[str] = None

    def __post_init__(self):
        for name in ("max_n", "max_dim", "max_generators"):
            if getattr(self, name) < 1:
                raise ParseError(f"--{name.replace('_', '-')}", "must be positive")
        if self.cases is not None and self.cases < 1:
            raise ParseError("--cases", "must be positive")

    def caps(self) -> Dict[str, int]:
        return {"max_n": self.max_n, "max_dim": self.max_dim, "max_generators": self.max_generators}


DEFAULT_RUN_CONFIG = RunConfig()


class CaseContext:
    """Random source of one case plus the input document it records"""

    def __init__(self, suite: str, index: int, config: RunConfig):
        self.suite = suite
        self.index = index
        self.config = config
        self.rng = random.Random(f"{config.seed}:{suite}:{index}")
        self.input: Any = None

    def record(self, doc: Any) -> None:
        self.input = doc


@dataclass
class CaseResult:
    case: int
    digest: str
    passed: bool
    witness: Optional[Dict[str, Any]] = None
    replay: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"case": self.case, "digest": self.digest, "passed": self.passed}
        if not self.passed:
            out["witness"] = self.witness
            out["replay"] = self.replay
        return out


@dataclass
class Report:
    """Outcome of one suite run; ``seconds`` stays out of the JSON document"""

    suite: str
    seed: int
    results: List[CaseResult] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def failures(self) -> List[CaseResult]:
        return [r for r in self.results if not r.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "cases": len(self.results),
            "passed": len(self.results) - len(self.failures),
            "failed": len(self.failures),
            "results": [r.to_dict() for r in self.results],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"case": r.case, "digest": r.digest, "passed": r.passed,
              "witness": None if r.passed else dumps(r.witness)} for r in self.results],
            columns=["case", "digest", "passed", "witness"],
        )


def summary_frame(reports: List[Report]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"suite": r.suite, "cases": len(r.results), "failed": len(r.failures),
          "seconds": round(r.seconds, 2)} for r in reports],
        columns=["suite", "cases", "failed", "seconds"],
    )


def _digest(doc: Any) -> str:
    return hashlib.sha256(dumps(doc).encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Lagrangian triples
# ---------------------------------------------------------------------------

def _triple_dimension(ctx: CaseContext) -> int:
    return ctx.rng.randint(1, min(ctx.config.max_n, 4))


def _triple_rank(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    t = random_triple(ctx.rng, _triple_dimension(ctx))
    ctx.record(encode_triple(t))
    n = t.space.n
    report = triple_form(t)
    expected = 3 * n - sum(t.profile)
    if report.complex_rank != expected:
        return {"rank": report.complex_rank, "expected": expected, "profile": list(t.profile)}
    return None


def _triple_signature(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    t = random_triple(ctx.rng, _triple_dimension(ctx))
    ctx.record(encode_triple(t))
    report = triple_form(t)
    signature = report.real_signature
    if signature.positive != signature.negative or signature.null != 2 * sum(t.profile):
        return {"signature": list(signature.as_tuple()), "profile": list(t.profile)}
    frame = negative_frame(report)
    restricted = congruence_signature(frame.T @ report.realified @ frame)
    if restricted.as_tuple() != (0, frame.cols, 0):
        return {"negative_frame_signature": list(restricted.as_tuple()), "columns": frame.cols}
    return None


def _triple_invariance(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    t = random_triple(ctx.rng, _triple_dimension(ctx))
    s = random_symplectic(ctx.rng, t.space.n)
    ctx.record(encode_triple(t))
    moved = act(s, t)
    if triple_form(moved).q_matrix != triple_form(t).q_matrix or moved.profile != t.profile:
        return {"check": "symplectic invariance", "profile": list(t.profile), "moved_profile": list(moved.profile)}
    return None


def _maslov_loops(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    """Refinement, doubling, reversal, rotation and constant loops"""
    rng = ctx.rng
    t = random_triple(rng, rng.randint(1, min(ctx.config.max_n, 2)))
    frame = rng.randrange(3)
    ctx.record({"triple": encode_triple(t), "phase_frame": frame + 1})

    def build(level: int) -> TripleLoop:
        return phase_loop(t, level, frame)

    holonomy, level = refined_holonomy(build, 2)
    finer, _ = refined_holonomy(build, level + 1, level + 2)
    loop = build(level)
    checks = {
        "refined": finer == holonomy,
        "doubled": maslov_holonomy(loop.doubled()) == 1,
        "reversed": maslov_holonomy(loop.reversed()) == holonomy,
        "rotated": maslov_holonomy(loop.rotated(rng.randrange(len(loop.samples) - 1))) == holonomy,
        "constant": maslov_holonomy(constant_loop(t)) == 1,
    }
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        return {"holonomy": holonomy, "level": level, "failed": failed}
    return None


# ---------------------------------------------------------------------------
# Quivers and the embedding delta
# ---------------------------------------------------------------------------

def _quiver_points(ctx: CaseContext) -> int:
    return ctx.rng.randint(1, ctx.config.max_n)


def _random_morphism(ctx: CaseContext, q: Quiver, q2: Quiver) -> QuiverMorphism:
    return QuiverMorphism(q, q2, random_element(ctx.rng, hom_basis(q, q2)))


def _vc_functor(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    n = _quiver_points(ctx)
    q1, q2, q3 = (random_quiver(ctx.rng, n, ctx.config.max_dim) for _ in range(3))
    ctx.record([encode_quiver(q) for q in (q1, q2, q3)])
    for index, q in enumerate((q1, q2, q3)):
        validate_local_system(vanishing_cycles(q))
        if vanishing_cycles_map(identity_morphism(q)).components != identity_morphism(q).components:
            return {"check": "identity", "quiver": index + 1}
    g = _random_morphism(ctx, q1, q2)
    f = _random_morphism(ctx, q2, q3)
    if vanishing_cycles_map(compose(f, g)) != compose_ls(vanishing_cycles_map(f), vanishing_cycles_map(g)):
        return {"check": "composition"}
    return None


def _hom_additivity(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    n = _quiver_points(ctx)
    cap = max(1, ctx.config.max_dim // 2)
    q1, q2, q3 = (random_quiver(ctx.rng, n, cap) for _ in range(3))
    ctx.record([encode_quiver(q) for q in (q1, q2, q3)])
    total = direct_sum(q1, q2)
    out_dim = hom_basis(total, q3).dimension
    out_parts = hom_basis(q1, q3).dimension + hom_basis(q2, q3).dimension
    in_dim = hom_basis(q3, total).dimension
    in_parts = hom_basis(q3, q1).dimension + hom_basis(q3, q2).dimension
    if out_dim != out_parts or in_dim != in_parts:
        return {"hom_from_sum": [out_dim, out_parts], "hom_into_sum": [in_dim, in_parts]}
    return None


def _delta_pair(ctx: CaseContext) -> Tuple[EquivariantQuiver, EquivariantQuiver]:
    cfg = ctx.config
    return random_equivariant_pair(ctx.rng, ctx.rng.randint(1, cfg.max_n), cfg.max_dim, cfg.max_generators)


def _delta_ff(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    """Hom dimensions agree across delta; every sampled fiber-product morphism lifts"""
    x, y = _delta_pair(ctx)
    ctx.record({"x": encode_equivariant(x), "y": encode_equivariant(y)})
    fiber = delta_target_category(x.kernel)
    report = full_faithfulness_check(x, y, fiber)
    if not report.equal:
        return {"check": "hom dimensions", **report.to_dict()}
    source, target = delta(x), delta(y)
    space = fiber.hom_space(source, target)
    for attempt in range(2):
        tau = fiber.split(source, random_element(ctx.rng, space))
        lifted = lift_morphism(tau, x, y)
        if delta_morphism(lifted) != tau:
            return {"check": "lift round trip", "sample": attempt}
    sigma = random_element(ctx.rng, hom_equivariant(x, y))
    if tuple(lift_morphism(delta_morphism(sigma), x, y)) != tuple(sigma):
        return {"check": "lift of delta"}
    return None


def delta_batch(config: RunConfig, count: int = 20) -> List[Dict[str, Any]]:
    """
    Full-faithfulness rows for the seeded pairs of the delta-ff suite

    Row k uses the same pair as case k of that suite.
    """
    rows = []
    for index in range(config.cases or count):
        x, y = _delta_pair(CaseContext("delta-ff", index, config))
        rows.append({"pair": index, **full_faithfulness_check(x, y).to_dict()})
    logger.info("delta batch: %d pairs, seed %d", len(rows), config.seed)
    return rows


def delta_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=["pair", "dim_equivariant", "dim_fiber", "equal"])


# ---------------------------------------------------------------------------
# Melded objects
# ---------------------------------------------------------------------------

def _perturbation_breaks(b: EquivariantQuiver, sheet: int, changed: ExactMatrix) -> bool:
    """Whether replacing the identity gluing map of one sheet by ``changed`` breaks intertwining"""
    if not is_invertible(changed):
        return True
    q = b.quiver
    p = b.presentation
    gamma = [identity(d) for d in q.dims]
    gamma[sheet] = changed
    vanishing = identity(q.dims[sheet]) + q.maps[sheet][sheet]
    if changed @ vanishing != vanishing @ changed:
        return True
    return any(
        gamma[p.point_action[k][i]] @ b.structure[k][i] != b.structure[k][i] @ gamma[i]
        for k in range(len(p.generators)) for i in range(p.n)
    )


def _to_sympy(m: ExactMatrix) -> sympy.Matrix:
    return sympy.Matrix(m.rows, m.cols, [QQ_I.to_sympy(v) for row in m.entries for v in row])


def _independent_hom_dimension(a: Lambda0Object, b: Lambda0Object) -> int:
    """Hom of groupoid representations through sympy's own linear algebra"""
    unknowns = {
        o: sympy.Matrix(b.dim(o), a.dim(o), lambda r, c: sympy.Symbol(f"f_{o}_{r}_{c}"))
        for o in a.model.objects
    }
    equations = []
    for arrow, ma, mb in zip(a.model.arrows, a.matrices, b.matrices):
        difference = _to_sympy(mb) * unknowns[arrow.source] - unknowns[arrow.target] * _to_sympy(ma)
        equations.extend(difference)
    symbols = [s for o in a.model.objects for s in unknowns[o]]
    if not equations:
        return len(symbols)
    coefficients, _ = sympy.linear_eq_to_matrix(equations, symbols)
    return len(symbols) - coefficients.rank()


def _empty_sheet_melded(a: Lambda0Object) -> MeldedObject:
    presentation = GroupPresentation(0, (), (), ())
    family = EquivariantQuiver(Quiver((), ()), permutation_kernel(presentation), ())
    return MeldedObject(Lambda1Model(presentation), CoveringData((), ()), a, family, ())


def _melded(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    rng = ctx.rng
    cfg = ctx.config
    kernel = random_kernel(rng, rng.randint(1, cfg.max_n), cfg.max_generators)
    b = random_equivariant_quiver(rng, kernel, cfg.max_dim)
    ctx.record(encode_equivariant(b))
    m = from_equivariant_family(b)

    sheet = rng.randrange(b.quiver.n)
    d = b.quiver.dims[sheet]
    bump = [[0] * d for _ in range(d)]
    bump[rng.randrange(d)][rng.randrange(d)] = rng.choice([-1, 1, 2])
    changed = identity(d) + matrix(bump, d, d)
    gamma = tuple(changed if i == sheet else g for i, g in enumerate(m.gamma))
    perturbed = MeldedObject(m.lambda1, m.covering, m.a, m.b, gamma)
    expected = _perturbation_breaks(b, sheet, changed)
    try:
        validate_melded(perturbed)
        detected = False
    except GammaViolation:
        detected = True
    if detected != expected:
        return {"check": "gamma perturbation", "sheet": sheet + 1, "expected": expected, "detected": detected}

    a = random_groupoid_representation(rng, rng.randint(1, 3), rng.randint(1, 3), cfg.max_dim)
    other = a if rng.random() < 0.5 else regauged_representation(rng, a)
    ours = hom_melded(_empty_sheet_melded(a), _empty_sheet_melded(other)).dimension
    theirs = _independent_hom_dimension(a, other)
    if ours != theirs:
        return {"check": "empty sheet model", "hom_melded": ours, "independent": theirs}
    return None


def _point_orbits(presentation: GroupPresentation) -> List[List[int]]:
    graph = nx.Graph()
    graph.add_nodes_from(range(presentation.n))
    for perm in presentation.point_action:
        graph.add_edges_from((i, perm[i]) for i in range(presentation.n))
    return [sorted(c) for c in sorted(nx.connected_components(graph), key=min)]


def _no_variation(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    """
    Colliding blocks are the group orbits; even cases zero every block with
    two or more sheets
    """
    rng = ctx.rng
    cfg = ctx.config
    kernel = permutation_kernel(random_presentation(rng, rng.randint(2, max(2, cfg.max_n)), cfg.max_generators))
    p = kernel.presentation
    orbits = _point_orbits(p)
    colliding = [i for orbit in orbits if len(orbit) > 1 for i in orbit]
    zeroed = ctx.index % 2 == 0
    if zeroed:
        b = zero_block_family(rng, kernel, colliding, cfg.max_dim)
    else:
        b = random_equivariant_quiver(rng, kernel, cfg.max_dim)
    ctx.record(encode_equivariant(b))
    generator = p.generators[0]
    model = Lambda1Model(p, ((generator, tuple(tuple(o) for o in orbits)),))
    report = variation_report(from_equivariant_family(b, model), generator)
    nonzero = any(
        not b.quiver.maps[j][i].is_zero()
        for orbit in orbits if len(orbit) > 1 for j, i in product(orbit, repeat=2)
    )
    if zeroed and not report.no_variation:
        return {"check": "zero colliding blocks", **report.to_dict()}
    if report.decision_dependent != nonzero:
        return {"check": "label", **report.to_dict()}
    return None


# ---------------------------------------------------------------------------
# Sites and stacks
# ---------------------------------------------------------------------------

def _descent_glue(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    rng = ctx.rng
    site = random_site(rng, min(ctx.config.max_n, 4))
    p = local_system_stack(site)
    u = whole_space(site)
    cover = site.covers[u][0]
    obj = random_site_local_system(rng, site, u, rng.randint(1, ctx.config.max_dim))
    datum, gauges = random_descent_datum(rng, p, u, cover, obj)
    ctx.record(encode_descent(datum))
    glued = glue(datum)
    space = compatible_isomorphisms(p, u, cover, GluedObject(obj, gauges), glued)
    if space.dimension != 1:
        return {"check": "compatible isomorphism", "dimension": space.dimension}
    broken, kind = plant_violation(datum)
    try:
        check_descent(broken)
    except (CocycleViolation, InverseViolation):
        return None
    return {"check": "planted violation", "kind": kind}


def _weak_iso(ctx: CaseContext) -> Optional[Dict[str, Any]]:
    """Even cases plant an equivalence, odd cases a morphism that is not one"""
    rng = ctx.rng
    site = random_site(rng, min(ctx.config.max_n, 3))
    p = local_system_stack(site)
    u = whole_space(site)
    dim = rng.randint(1, ctx.config.max_dim)
    samples = {u: [random_site_local_system(rng, site, u, dim) for _ in range(2)]}
    positive = ctx.index % 2 == 0
    if positive and rng.random() < 0.5:
        theta = identity_morphism_of_stacks(p)
    elif positive:
        theta = scalar_conjugation_morphism(p, {x: rng.choice([-2, -1, 2, 3]) for x in site.points})
    elif rng.random() < 0.5:
        theta = zero_morphism_of_stacks(p)
    else:
        theta = doubling_morphism_of_stacks(p)
    ctx.record({"site": site.to_dict(), "morphism": theta.name, "dimension": dim})
    target_samples = {u: [theta.functors[u](a) for a in samples[u]]} if positive else {}
    verdict = check_weak_iso(theta, samples, target_samples)
    if verdict.weak_isomorphism != positive:
        return {"check": "verdict", "expected": positive, **verdict.to_dict()}
    if not positive and verdict.witness is None:
        return {"check": "missing witness"}
    if verdict.cross_check is not None and not verdict.cross_check["agrees"]:
        return {"check": "cross check", **verdict.cross_check}
    return None


SUITES: Dict[str, Dict[str, Any]] = {
    "triple-rank": {"name": "Triple-form rank identity", "cases": 200, "run": _triple_rank},
    "triple-signature": {"name": "Triple-form signature and negative frame", "cases": 200,
                         "run": _triple_signature},
    "triple-invariance": {"name": "Symplectic invariance of the triple form", "cases": 100,
                          "run": _triple_invariance},
    "maslov-loops": {"name": "Maslov holonomy on loops", "cases": 20, "run": _maslov_loops},
    "delta-ff": {"name": "Full faithfulness of delta", "cases": 100, "run": _delta_ff},
    "vc-functor": {"name": "Vanishing-cycle functoriality", "cases": 100, "run": _vc_functor},
    "hom-additivity": {"name": "Hom additivity under direct sums", "cases": 100, "run": _hom_additivity},
    "descent-glue": {"name": "Descent and gluing of local systems", "cases": 50, "run": _descent_glue},
    "weak-iso": {"name": "Stalkwise weak isomorphisms", "cases": 60, "run": _weak_iso},
    "melded": {"name": "Melded object consistency", "cases": 100, "run": _melded},
    "no-variation": {"name": "No-variation base case", "cases": 100, "run": _no_variation},
}


def _suite_config(name: str) -> Dict[str, Any]:
    try:
        return SUITES[name]
    except KeyError:
        raise UnknownSuite(f"unknown suite {name!r}", {"suite": name, "known": sorted(SUITES)})


def run_case(name: str, index: int, config: RunConfig) -> CaseResult:
    run: Callable[[CaseContext], Optional[Dict[str, Any]]] = _suite_config(name)["run"]
    ctx = CaseContext(name, index, config)
    try:
        witness = run(ctx)
    except WorkbenchError as exc:
        witness = {"raised": exc.to_dict()}
    replay = {"suite": name, "seed": config.seed, "case": index, "caps": config.caps()}
    digest = _digest(ctx.input if ctx.input is not None else replay)
    if witness is not None:
        logger.info("%s case %d failed: %s", name, index, witness)
    return CaseResult(index, digest, witness is None, witness, replay)


def run_suite(config: RunConfig, suite: str) -> Report:
    """
    Run every case of a suite

    Raises:
        UnknownSuite: if no suite has that name
    """
    entry = _suite_config(suite)
    count = config.cases or entry["cases"]
    logger.info("running %s: %d cases, seed %d", suite, count, config.seed)
    report = Report(suite, config.seed)
    start = time.perf_counter()
    for index in range(count):
        report.results.append(run_case(suite, index, config))
    report.seconds = time.perf_counter() - start
    logger.info("%s finished: %d/%d passed in %.2fs", suite, count - len(report.failures), count, report.seconds)
    return report


def replay(doc: Dict[str, Any]) -> CaseResult:
    """Re-run one case from the replay document of a failure"""
    for key in ("suite", "seed", "case"):
        if key not in doc:
            raise ParseError("replay", f"missing key {key!r}")
    config = RunConfig(seed=doc["seed"], **doc.get("caps", {}))
    return run_case(doc["suite"], doc["case"], config)
