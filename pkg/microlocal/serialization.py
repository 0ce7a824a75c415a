"""
JSON Formats
Decoders and canonical encoders for every input file of the workbench

Scalars are {"num": int, "den": int} or {"re": rational, "im": rational};
plain integers and "p/q" strings are accepted on input. Matrices are
row-major nested arrays. Indices in keys ("j,i", "i,j") and permutations are
1-based. Every decoding failure is a ParseError naming its location.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sympy import QQ, QQ_I

from .equivariant import (
    ActionKernel,
    EquivariantQuiver,
    GroupPresentation,
    format_expression,
    format_word,
    identity_kernel,
    parse_expression,
    parse_word,
    permutation_kernel,
)
from .errors import ParseError, WorkbenchError
from .exact_kernel import ExactMatrix, Scalar, SolutionSpace, identity, matrix, rational, zeros
from .fiber_product import FiberProductMorphism
from .melded_systems import (
    CoveringData,
    GroupoidArrow,
    Lambda0Model,
    Lambda0Object,
    Lambda1Model,
    MeldedObject,
    from_equivariant_family,
)
from .quiver_core import LocalSystemQuiver, Quiver
from .stack_site import (
    DescentDatum,
    PosetSite,
    PrestackData,
    SiteLocalSystem,
    StackMorphismData,
    doubling_morphism_of_stacks,
    identity_morphism_of_stacks,
    local_system_stack,
    make_local_system,
    scalar_conjugation_morphism,
    zero_morphism_of_stacks,
)
from .symplectic_maslov import LagrangianFrame, LagrangianTriple, SymplecticSpace, TripleLoop

logger = logging.getLogger(__name__)


def _get(doc: Dict[str, Any], key: str, location: str, default: Any = ...) -> Any:
    if not isinstance(doc, dict):
        raise ParseError(location, "expected an object")
    if key not in doc:
        if default is ...:
            raise ParseError(location, f"missing key {key!r}")
        return default
    return doc[key]


def _require(condition: bool, location: str, message: str) -> None:
    if not condition:
        raise ParseError(location, message)


def _int(node, location: str) -> int:
    _require(isinstance(node, int) and not isinstance(node, bool), location, f"expected an integer, got {node!r}")
    return node


# ---------------------------------------------------------------------------
# Scalars and matrices
# ---------------------------------------------------------------------------

def decode_rational(node, location: str):
    if isinstance(node, dict):
        num = _int(_get(node, "num", location), f"{location}.num")
        den = _int(_get(node, "den", location, 1), f"{location}.den")
        _require(den != 0, location, "zero denominator")
        return QQ(num, den)
    if isinstance(node, str):
        try:
            return rational(node)
        except (ValueError, ZeroDivisionError):
            raise ParseError(location, f"not an exact rational: {node!r}")
    if isinstance(node, int) and not isinstance(node, bool):
        return QQ(node)
    raise ParseError(location, f"not an exact rational: {node!r}")


def decode_scalar(node, location: str) -> Scalar:
    if isinstance(node, dict) and ("re" in node or "im" in node):
        re = decode_rational(node.get("re", 0), f"{location}.re")
        im = decode_rational(node.get("im", 0), f"{location}.im")
        return QQ_I(re, im)
    return QQ_I(decode_rational(node, location), QQ.zero)


def encode_rational(value) -> Dict[str, int]:
    return {"num": int(QQ.numer(value)), "den": int(QQ.denom(value))}


def encode_scalar(value: Scalar) -> Dict[str, Any]:
    if value.y == QQ.zero:
        return encode_rational(value.x)
    return {"re": encode_rational(value.x), "im": encode_rational(value.y)}


def decode_matrix(node, location: str, rows: Optional[int] = None, cols: Optional[int] = None) -> ExactMatrix:
    """A nested array; an empty array stands for a matrix with a zero dimension of the expected shape"""
    _require(isinstance(node, list), location, "expected a matrix (list of rows)")
    if not node or all(isinstance(r, list) and not r for r in node):
        r = rows if rows is not None else len(node)
        c = cols if cols is not None else 0
        _require(r == 0 or c == 0, location, f"empty matrix where shape {r}x{c} was expected")
        return zeros(r, c)
    width = None
    entries = []
    for i, row in enumerate(node):
        _require(isinstance(row, list), f"{location}[{i}]", "expected a row")
        if width is None:
            width = len(row)
        _require(len(row) == width, f"{location}[{i}]", "rows have different lengths")
        entries.append([decode_scalar(v, f"{location}[{i}][{j}]") for j, v in enumerate(row)])
    m = matrix(entries, len(entries), width)
    if rows is not None and cols is not None:
        _require(m.shape == (rows, cols), location, f"matrix has shape {m.rows}x{m.cols}, expected {rows}x{cols}")
    return m


def encode_matrix(m: ExactMatrix) -> List[List[Any]]:
    return [[encode_scalar(v) for v in row] for row in m.entries]


def encode_components(components: Sequence[ExactMatrix]) -> List[List[List[Any]]]:
    return [encode_matrix(c) for c in components]


def encode_space(space: SolutionSpace) -> Dict[str, Any]:
    return {"dimension": space.dimension, "basis": [encode_components(b) for b in space.block_basis()]}


def _pair_key(key: str, location: str, n: int) -> Tuple[int, int]:
    parts = key.split(",")
    try:
        j, i = (int(p) for p in parts)
    except ValueError:
        raise ParseError(location, f"key {key!r} is not of the form 'j,i'")
    _require(1 <= j <= n and 1 <= i <= n, location, f"index pair {key!r} is out of range 1..{n}")
    return j - 1, i - 1


def _word(node, location: str):
    try:
        return parse_word(node)
    except (ValueError, AttributeError):
        raise ParseError(location, f"malformed word {node!r}")


# ---------------------------------------------------------------------------
# Symplectic data
# ---------------------------------------------------------------------------

def _space(doc: Dict[str, Any], location: str) -> SymplecticSpace:
    n = _int(_get(doc, "n", location), f"{location}.n")
    omega = _get(doc, "omega", location, None)
    if omega is None:
        return SymplecticSpace.standard(n)
    return SymplecticSpace(n, decode_matrix(omega, f"{location}.omega", 2 * n, 2 * n))


def _frames(space: SymplecticSpace, node, location: str) -> LagrangianTriple:
    _require(isinstance(node, list) and len(node) == 3, location, "a triple needs three frames")
    n = space.n
    return LagrangianTriple(*(
        LagrangianFrame(space, decode_matrix(f, f"{location}[{k}]", 2 * n, n)) for k, f in enumerate(node)
    ))


def decode_triple(doc: Dict[str, Any]) -> LagrangianTriple:
    space = _space(doc, "triple")
    return _frames(space, _get(doc, "frames", "triple"), "triple.frames")


def encode_triple(t: LagrangianTriple) -> Dict[str, Any]:
    return {"n": t.space.n, "omega": encode_matrix(t.space.omega),
            "frames": [encode_matrix(f.basis) for f in t.frames]}


def decode_loop(doc: Dict[str, Any]) -> TripleLoop:
    space = _space(doc, "loop")
    samples = _get(doc, "samples", "loop")
    _require(isinstance(samples, list), "loop.samples", "expected a list of triples")
    return TripleLoop(tuple(_frames(space, s, f"loop.samples[{k}]") for k, s in enumerate(samples)))


def encode_loop(loop: TripleLoop) -> Dict[str, Any]:
    space = loop.samples[0].space
    return {"n": space.n, "omega": encode_matrix(space.omega),
            "samples": [[encode_matrix(f.basis) for f in t.frames] for t in loop.samples]}


# ---------------------------------------------------------------------------
# Quivers, presentations, kernels
# ---------------------------------------------------------------------------

def decode_quiver(doc: Dict[str, Any], location: str = "quiver") -> Quiver:
    dims = _get(doc, "dims", location)
    _require(isinstance(dims, list), f"{location}.dims", "expected a list of dimensions")
    dims = [_int(d, f"{location}.dims[{k}]") for k, d in enumerate(dims)]
    _require(all(d >= 0 for d in dims), f"{location}.dims", "dimensions must be non-negative")
    n = _get(doc, "n", location, len(dims))
    _require(n == len(dims), f"{location}.n", f"n = {n} but {len(dims)} dimensions given")
    maps = {}
    for key, node in _get(doc, "maps", location, {}).items():
        j, i = _pair_key(key, f"{location}.maps", n)
        maps[(j, i)] = decode_matrix(node, f"{location}.maps[{key}]", dims[j], dims[i])
    return Quiver.from_maps(dims, maps)


def encode_quiver(q: Quiver) -> Dict[str, Any]:
    return {
        "n": q.n,
        "dims": list(q.dims),
        "maps": {f"{j + 1},{i + 1}": encode_matrix(q.maps[j][i])
                 for j in range(q.n) for i in range(q.n) if not q.maps[j][i].is_zero()},
    }


def decode_local_system_quiver(doc: Dict[str, Any], location: str = "local_system") -> LocalSystemQuiver:
    dims = [_int(d, f"{location}.dims") for d in _get(doc, "dims", location)]
    monodromies = _get(doc, "monodromies", location)
    _require(len(monodromies) == len(dims), location, "one monodromy per point is required")
    return LocalSystemQuiver(tuple(dims), tuple(
        decode_matrix(m, f"{location}.monodromies[{k}]", dims[k], dims[k]) for k, m in enumerate(monodromies)
    ))


def encode_local_system_quiver(ls: LocalSystemQuiver) -> Dict[str, Any]:
    return {"n": ls.n, "dims": list(ls.dims), "monodromies": encode_components(ls.monodromies)}


def decode_presentation(doc: Dict[str, Any], location: str = "presentation",
                        n: Optional[int] = None) -> GroupPresentation:
    generators = _get(doc, "generators", location, [])
    _require(isinstance(generators, list) and all(isinstance(g, str) for g in generators),
             f"{location}.generators", "expected a list of generator names")
    perms = _get(doc, "perm", location, {})
    n = _get(doc, "n", location, n)
    if n is None:
        _require(bool(perms), location, "the number of points is required")
        n = len(next(iter(perms.values())))
    point_action = []
    for g in generators:
        perm = _get(perms, g, f"{location}.perm")
        _require(isinstance(perm, list) and len(perm) == n, f"{location}.perm.{g}",
                 f"expected a permutation of 1..{n}")
        point_action.append(tuple(_int(v, f"{location}.perm.{g}") - 1 for v in perm))
    relations = tuple(
        _word(r, f"{location}.relations[{k}]") for k, r in enumerate(_get(doc, "relations", location, []))
    )
    return GroupPresentation(n, tuple(generators), relations, tuple(point_action))


def encode_presentation(p: GroupPresentation) -> Dict[str, Any]:
    return {
        "n": p.n,
        "generators": list(p.generators),
        "relations": [format_word(w) for w in p.relations],
        "perm": {g: [v + 1 for v in perm] for g, perm in zip(p.generators, p.point_action)},
    }


def _programs(node, location: str, n: int) -> Dict[str, Dict[Tuple[int, int], Any]]:
    out = {}
    for g, formulas in (node or {}).items():
        out[g] = {}
        for key, expr in formulas.items():
            pair = _pair_key(key, f"{location}.{g}", n)
            try:
                out[g][pair] = parse_expression(expr)
            except ValueError as exc:
                raise ParseError(f"{location}.{g}[{key}]", str(exc))
    return out


def decode_kernel(doc: Dict[str, Any], location: str = "kernel") -> ActionKernel:
    """A built-in kernel {"builtin": "permutation" | "identity"} or expression programs"""
    presentation = decode_presentation(_get(doc, "presentation", location), f"{location}.presentation")
    builtin = _get(doc, "builtin", location, None)
    if builtin == "permutation":
        return permutation_kernel(presentation)
    if builtin == "identity":
        _require(all(perm == tuple(range(presentation.n)) for perm in presentation.point_action),
                 f"{location}.presentation", "the identity kernel needs generators fixing every point")
        return identity_kernel(presentation.n, presentation.generators, presentation.relations)
    _require(builtin is None, f"{location}.builtin", f"unknown built-in kernel {builtin!r}")
    return ActionKernel(
        presentation,
        _programs(_get(doc, "programs", location, {}), f"{location}.programs", presentation.n),
        _programs(_get(doc, "inverse_programs", location, {}), f"{location}.inverse_programs", presentation.n),
        _get(doc, "name", location, "custom"),
    )


def encode_kernel(kernel: ActionKernel) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"name": kernel.name, "presentation": encode_presentation(kernel.presentation)}
    if kernel.is_permutation and kernel.name in ("permutation", "identity"):
        doc["builtin"] = kernel.name
        return doc

    def programs(node):
        return {g: {f"{j + 1},{i + 1}": format_expression(e) for (j, i), e in formulas.items()}
                for g, formulas in node.items()}

    doc["programs"] = programs(kernel.programs)
    doc["inverse_programs"] = programs(kernel.inverse_programs)
    return doc


def decode_equivariant(doc: Dict[str, Any], kernel: Optional[ActionKernel] = None,
                       location: str = "equivariant") -> EquivariantQuiver:
    """{"quiver": ..., "kernel": ..., "structure": {g: [gamma per point]}}; an explicit kernel wins"""
    q = decode_quiver(_get(doc, "quiver", location), f"{location}.quiver")
    if kernel is None:
        kernel = decode_kernel(_get(doc, "kernel", location), f"{location}.kernel")
    p = kernel.presentation
    _require(p.n == q.n, location, f"kernel acts on {p.n} points, quiver has {q.n}")
    structure_doc = _get(doc, "structure", location, {})
    structure = []
    for k, g in enumerate(p.generators):
        perm = p.point_action[k]
        if g not in structure_doc:
            _require(perm == tuple(range(q.n)) or all(q.dims[perm[i]] == q.dims[i] for i in range(q.n)),
                     f"{location}.structure", f"missing structure maps for {g}")
            structure.append(tuple(identity(q.dims[i]) for i in range(q.n)))
            continue
        gammas = structure_doc[g]
        _require(isinstance(gammas, list) and len(gammas) == q.n, f"{location}.structure.{g}",
                 "one structure map per point is required")
        structure.append(tuple(
            decode_matrix(m, f"{location}.structure.{g}[{i}]", q.dims[perm[i]], q.dims[i])
            for i, m in enumerate(gammas)
        ))
    return EquivariantQuiver(q, kernel, tuple(structure))


def encode_equivariant(e: EquivariantQuiver) -> Dict[str, Any]:
    return {
        "quiver": encode_quiver(e.quiver),
        "kernel": encode_kernel(e.kernel),
        "structure": {g: encode_components(s) for g, s in zip(e.presentation.generators, e.structure)},
    }


def decode_fiber_morphism(doc: Dict[str, Any], location: str = "tau") -> FiberProductMorphism:
    f = [decode_matrix(m, f"{location}.f[{k}]") for k, m in enumerate(_get(doc, "f", location))]
    g = [decode_matrix(m, f"{location}.g[{k}]") for k, m in enumerate(_get(doc, "g", location))]
    return FiberProductMorphism(tuple(f), tuple(g))


# ---------------------------------------------------------------------------
# Melded objects
# ---------------------------------------------------------------------------

def decode_lambda0_model(doc: Dict[str, Any], location: str = "lambda0") -> Lambda0Model:
    objects = tuple(_get(doc, "objects", location))
    arrows = tuple(
        GroupoidArrow(_get(a, "name", f"{location}.arrows[{k}]"), _get(a, "source", f"{location}.arrows[{k}]"),
                      _get(a, "target", f"{location}.arrows[{k}]"))
        for k, a in enumerate(_get(doc, "arrows", location, []))
    )
    relations = tuple(
        (_get(r, "base", f"{location}.relations[{k}]"),
         _word(_get(r, "word", f"{location}.relations[{k}]"), f"{location}.relations[{k}].word"))
        for k, r in enumerate(_get(doc, "relations", location, []))
    )
    twist = tuple(sorted((name, _int(s, f"{location}.twist.{name}"))
                         for name, s in _get(doc, "twist", location, {}).items()))
    return Lambda0Model(objects, arrows, relations, twist)


def encode_lambda0_model(model: Lambda0Model) -> Dict[str, Any]:
    return {
        "objects": list(model.objects),
        "arrows": [{"name": a.name, "source": a.source, "target": a.target} for a in model.arrows],
        "relations": [{"base": base, "word": format_word(w)} for base, w in model.relations],
        "twist": dict(model.twist),
    }


def decode_lambda0_object(model: Lambda0Model, doc: Dict[str, Any], location: str = "a") -> Lambda0Object:
    dims_doc = _get(doc, "dims", location)
    dims = tuple(_int(_get(dims_doc, o, f"{location}.dims"), f"{location}.dims.{o}") for o in model.objects)
    matrices_doc = _get(doc, "matrices", location)
    by_object = dict(zip(model.objects, dims))
    _require(all(a.source in by_object and a.target in by_object for a in model.arrows), location,
             "an arrow has an unknown endpoint")
    matrices = tuple(
        decode_matrix(_get(matrices_doc, a.name, f"{location}.matrices"), f"{location}.matrices.{a.name}",
                      by_object[a.target], by_object[a.source])
        for a in model.arrows
    )
    return Lambda0Object(model, dims, matrices)


def encode_lambda0_object(a: Lambda0Object) -> Dict[str, Any]:
    return {
        "dims": dict(zip(a.model.objects, a.dims)),
        "matrices": {arrow.name: encode_matrix(m) for arrow, m in zip(a.model.arrows, a.matrices)},
    }


def decode_melded(doc: Dict[str, Any], location: str = "melded") -> MeldedObject:
    """
    A melded object, or {"family": equivariant, "collisions": ...} for the
    object induced by an equivariant family
    """
    if "family" in doc:
        b = decode_equivariant(doc["family"], location=f"{location}.family")
        model = Lambda1Model(b.presentation, _collisions(doc, location, b.presentation))
        return from_equivariant_family(b, model)
    lambda1_doc = _get(doc, "lambda1", location)
    presentation = decode_presentation(_get(lambda1_doc, "presentation", f"{location}.lambda1"),
                                       f"{location}.lambda1.presentation")
    lambda1 = Lambda1Model(presentation, _collisions(lambda1_doc, f"{location}.lambda1", presentation))
    model = decode_lambda0_model(_get(doc, "lambda0", location), f"{location}.lambda0")
    a = decode_lambda0_object(model, _get(doc, "a", location), f"{location}.a")
    cov = _get(doc, "covering", location)
    lifts = _get(cov, "lift_words", f"{location}.covering", {})
    covering = CoveringData(
        tuple(_get(cov, "sheet_objects", f"{location}.covering")),
        tuple(_word(w, f"{location}.covering.fiber_words[{k}]")
              for k, w in enumerate(_get(cov, "fiber_words", f"{location}.covering"))),
        tuple((g, tuple(_word(w, f"{location}.covering.lift_words.{g}") for w in lifts.get(g, [])))
              for g in presentation.generators),
    )
    b_doc = _get(doc, "b", location)
    kernel = None if "kernel" in b_doc else permutation_kernel(presentation)
    b = decode_equivariant(b_doc, kernel, f"{location}.b")
    gamma_doc = _get(doc, "gamma", location)
    _require(isinstance(gamma_doc, list), f"{location}.gamma", "expected one matrix per sheet")
    gamma = tuple(decode_matrix(m, f"{location}.gamma[{k}]") for k, m in enumerate(gamma_doc))
    return MeldedObject(lambda1, covering, a, b, gamma)


def _collisions(doc: Dict[str, Any], location: str, presentation: GroupPresentation):
    out = []
    for g, blocks in _get(doc, "collisions", location, {}).items():
        _require(g in presentation.generators, f"{location}.collisions", f"unknown generator {g!r}")
        out.append((g, tuple(tuple(_int(i, f"{location}.collisions.{g}") - 1 for i in block) for block in blocks)))
    return tuple(out)


def encode_melded(m: MeldedObject) -> Dict[str, Any]:
    return {
        "lambda0": encode_lambda0_model(m.lambda0),
        "a": encode_lambda0_object(m.a),
        "lambda1": {
            "presentation": encode_presentation(m.lambda1.presentation),
            "collisions": {g: [[i + 1 for i in block] for block in blocks] for g, blocks in m.lambda1.collisions},
        },
        "covering": {
            "sheet_objects": list(m.covering.sheet_objects),
            "fiber_words": [format_word(w) for w in m.covering.fiber_words],
            "lift_words": {g: [format_word(w) for w in words] for g, words in m.covering.lift_words},
        },
        "b": encode_equivariant(m.b),
        "gamma": encode_components(m.gamma),
    }


# ---------------------------------------------------------------------------
# Sites, local systems, descent data
# ---------------------------------------------------------------------------

def decode_site(doc: Dict[str, Any], location: str = "site") -> PosetSite:
    opens = _get(doc, "opens", location)
    order = _get(doc, "order", location, [])
    _require(all(isinstance(p, list) and len(p) == 2 for p in order), f"{location}.order",
             "order entries are [smaller, larger] pairs")
    points = _get(doc, "points", location)
    _require(isinstance(points, dict), f"{location}.points", "expected {point: minimal open}")
    return PosetSite(opens, [tuple(p) for p in order], points, _get(doc, "covers", location, {}))


def encode_site(site: PosetSite) -> Dict[str, Any]:
    return site.to_dict()


def _point_pair(key: str, location: str) -> Tuple[str, str]:
    parts = key.split(",")
    _require(len(parts) == 2, location, f"key {key!r} is not of the form 'x,y'")
    return parts[0].strip(), parts[1].strip()


def decode_site_local_system(site: PosetSite, doc: Dict[str, Any], location: str = "object") -> SiteLocalSystem:
    """{"open": U, "dims": {x: d}, "transitions": {"x,y": matrix}} with x ≤ y"""
    u = _get(doc, "open", location)
    _require(u in site.opens, f"{location}.open", f"unknown open {u!r}")
    dims_doc = _get(doc, "dims", location)
    dims = {x: _int(_get(dims_doc, x, f"{location}.dims"), f"{location}.dims.{x}") for x in site.points_of(u)}
    transitions = {}
    given = _get(doc, "transitions", location, {})
    for key, node in given.items():
        x, y = _point_pair(key, f"{location}.transitions")
        _require(x in dims and y in dims, f"{location}.transitions", f"pair {key!r} leaves {u}")
        transitions[(x, y)] = decode_matrix(node, f"{location}.transitions[{key}]", dims[x], dims[y])
    for x, y in site.comparable_pairs(u):
        _require((x, y) in transitions, f"{location}.transitions", f"missing transition '{x},{y}'")
    return make_local_system(site, u, dims, transitions)


def encode_site_local_system(a: SiteLocalSystem) -> Dict[str, Any]:
    return {
        "open": a.open,
        "dims": dict(zip(a.points, a.dims)),
        "transitions": {f"{x},{y}": encode_matrix(t) for (x, y), t in a.transitions},
    }


def decode_samples(site: PosetSite, node, location: str) -> Dict[str, List[SiteLocalSystem]]:
    _require(isinstance(node, dict), location, "expected {open: [objects]}")
    return {
        u: [decode_site_local_system(site, obj, f"{location}.{u}[{k}]") for k, obj in enumerate(objs)]
        for u, objs in node.items()
    }


def decode_prestack(site: PosetSite, doc: Dict[str, Any], location: str = "prestack") -> PrestackData:
    kind = _get(doc, "kind", location, "local-systems")
    _require(kind == "local-systems", f"{location}.kind", f"unsupported prestack kind {kind!r}")
    return local_system_stack(site)


def decode_descent(doc: Dict[str, Any], location: str = "datum") -> DescentDatum:
    """
    {"site": ..., "prestack": {...}, "open": U, "cover": [U_1, ...],
    "objects": [...], "sigma": {"i,j": [matrix per point of U_i ∩ U_j]}}
    """
    site = decode_site(_get(doc, "site", location), f"{location}.site")
    p = decode_prestack(site, _get(doc, "prestack", location, {}), f"{location}.prestack")
    u = _get(doc, "open", location)
    cover = tuple(_get(doc, "cover", location))
    _require(all(m in site.opens for m in cover), f"{location}.cover", "cover names an unknown open")
    objects = tuple(
        decode_site_local_system(site, obj, f"{location}.objects[{k}]")
        for k, obj in enumerate(_get(doc, "objects", location))
    )
    sigma = {}
    for key, comps in _get(doc, "sigma", location, {}).items():
        i, j = _pair_key(key, f"{location}.sigma", len(cover))
        w = site.meet(cover[i], cover[j])
        _require(w is not None, f"{location}.sigma[{key}]", "members do not overlap")
        pts = site.points_of(w)
        _require(isinstance(comps, list) and len(comps) == len(pts), f"{location}.sigma[{key}]",
                 f"expected one matrix per point of {w}")
        sigma[(i, j)] = tuple(decode_matrix(m, f"{location}.sigma[{key}][{k}]") for k, m in enumerate(comps))
    return DescentDatum(p, u, cover, objects, sigma)


def encode_descent(d: DescentDatum) -> Dict[str, Any]:
    return {
        "site": encode_site(d.prestack.site),
        "prestack": {"kind": "local-systems"},
        "open": d.open,
        "cover": list(d.cover),
        "objects": [encode_site_local_system(a) for a in d.objects],
        "sigma": {f"{i + 1},{j + 1}": encode_components(s) for (i, j), s in sorted(d.sigma.items())},
    }


STACK_MORPHISMS = {
    "identity": lambda p, doc, location: identity_morphism_of_stacks(p),
    "zero": lambda p, doc, location: zero_morphism_of_stacks(p),
    "doubling": lambda p, doc, location: doubling_morphism_of_stacks(p),
    "scalar-conjugation": lambda p, doc, location: scalar_conjugation_morphism(p, {
        x: decode_scalar(c, f"{location}.scalars.{x}") for x, c in _get(doc, "scalars", location).items()
    }),
}


def decode_stack_morphism(doc: Dict[str, Any], location: str = "theta"):
    """
    {"site": ..., "morphism": name, "scalars"?: {point: scalar},
    "samples": {open: [objects]}, "target_samples"?: {...}}

    Returns the morphism of local-system stacks with its source and target samples.
    """
    site = decode_site(_get(doc, "site", location), f"{location}.site")
    p = local_system_stack(site)
    name = _get(doc, "morphism", location)
    _require(name in STACK_MORPHISMS, f"{location}.morphism",
             f"unknown stack morphism {name!r}; known: {', '.join(STACK_MORPHISMS)}")
    theta: StackMorphismData = STACK_MORPHISMS[name](p, doc, location)
    if name == "scalar-conjugation":
        missing = [x for x in site.points if x not in doc["scalars"]]
        _require(not missing, f"{location}.scalars", f"no scalar for {missing}")
        zero = [x for x, c in doc["scalars"].items() if decode_scalar(c, location) == QQ_I.zero]
        _require(not zero, f"{location}.scalars", f"scalars must be nonzero, got 0 at {zero}")
    samples = decode_samples(site, _get(doc, "samples", location), f"{location}.samples")
    targets = decode_samples(site, _get(doc, "target_samples", location, {}), f"{location}.target_samples")
    return theta, samples, targets


# ---------------------------------------------------------------------------
# Registry and file helpers
# ---------------------------------------------------------------------------

FORMATS: Dict[str, Dict[str, Any]] = {
    "triple": {"name": "Lagrangian triple", "decode": decode_triple, "encode": encode_triple},
    "loop": {"name": "Loop of Lagrangian triples", "decode": decode_loop, "encode": encode_loop},
    "quiver": {"name": "Quiver", "decode": decode_quiver, "encode": encode_quiver},
    "local-system": {"name": "Local-system quiver", "decode": decode_local_system_quiver,
                     "encode": encode_local_system_quiver},
    "presentation": {"name": "Group presentation", "decode": decode_presentation,
                     "encode": encode_presentation},
    "kernel": {"name": "Action kernel", "decode": decode_kernel, "encode": encode_kernel},
    "equivariant": {"name": "Equivariant quiver", "decode": decode_equivariant, "encode": encode_equivariant},
    "melded": {"name": "Melded object", "decode": decode_melded, "encode": encode_melded},
    "site": {"name": "Finite site", "decode": decode_site, "encode": encode_site},
    "descent": {"name": "Descent datum", "decode": decode_descent, "encode": encode_descent},
}


def dumps(doc: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent"""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)


def load_json(path: str) -> Any:
    file = Path(path)
    if not file.exists():
        raise ParseError(path, "file does not exist")
    try:
        return json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg)


def decode(fmt: str, doc: Any):
    try:
        config = FORMATS[fmt]
    except KeyError:
        raise ParseError("format", f"unknown format {fmt!r}; known: {', '.join(FORMATS)}")
    return config["decode"](doc)


def convert(doc: Any, fmt: str) -> Dict[str, Any]:
    """Decode and re-encode: canonical key order, reduced rationals, explicit defaults"""
    value = decode(fmt, doc)
    logger.debug("normalized a %s document", FORMATS[fmt]["name"])
    return FORMATS[fmt]["encode"](value)


def error_document(exc: WorkbenchError) -> Dict[str, Any]:
    return exc.to_dict()
