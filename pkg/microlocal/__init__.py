"""
Microlocal Workbench Package
"""

from .errors import MathematicalViolation, ParseError, WorkbenchError
from .exact_kernel import (
    ExactMatrix,
    LinearSystem,
    SolutionSpace,
    congruence_signature,
    identity,
    matrix,
    nullspace_basis,
    rank,
    solve_homogeneous,
)
from .symplectic_maslov import (
    LagrangianFrame,
    LagrangianTriple,
    SymplecticSpace,
    TripleLoop,
    intersection_profile,
    maslov_holonomy,
    negative_frame,
    refined_holonomy,
    triple_form,
)
from .quiver_core import Quiver, hom_basis, validate_quiver, vanishing_cycles, vanishing_cycles_map
from .equivariant import (
    ActionKernel,
    EquivariantQuiver,
    GroupPresentation,
    apply_action,
    check_kernel,
    hom_equivariant,
    identity_kernel,
    permutation_kernel,
    validate_equivariant,
)
from .fiber_product import build_fiber_product, delta, full_faithfulness_check, lift_morphism, ore_square
from .melded_systems import from_equivariant_family, has_no_variation, hom_melded, validate_melded
from .stack_site import (
    PosetSite,
    check_descent,
    check_prestack,
    check_weak_iso,
    extend_local_morphism,
    glue,
    local_system_stack,
    stalk,
)
from .serialization import FORMATS, convert, dumps, load_json
from .suites import DEFAULT_RUN_CONFIG, SUITES, RunConfig, replay, run_suite

__all__ = [
    'WorkbenchError',
    'MathematicalViolation',
    'ParseError',
    'ExactMatrix',
    'LinearSystem',
    'SolutionSpace',
    'matrix',
    'identity',
    'rank',
    'nullspace_basis',
    'solve_homogeneous',
    'congruence_signature',
    'SymplecticSpace',
    'LagrangianFrame',
    'LagrangianTriple',
    'TripleLoop',
    'intersection_profile',
    'triple_form',
    'negative_frame',
    'refined_holonomy',
    'maslov_holonomy',
    'Quiver',
    'validate_quiver',
    'hom_basis',
    'vanishing_cycles',
    'vanishing_cycles_map',
    'GroupPresentation',
    'ActionKernel',
    'EquivariantQuiver',
    'identity_kernel',
    'permutation_kernel',
    'apply_action',
    'check_kernel',
    'validate_equivariant',
    'hom_equivariant',
    'build_fiber_product',
    'delta',
    'lift_morphism',
    'full_faithfulness_check',
    'ore_square',
    'validate_melded',
    'from_equivariant_family',
    'hom_melded',
    'has_no_variation',
    'PosetSite',
    'stalk',
    'check_prestack',
    'check_descent',
    'glue',
    'local_system_stack',
    'check_weak_iso',
    'extend_local_morphism',
    'FORMATS',
    'convert',
    'dumps',
    'load_json',
    'RunConfig',
    'DEFAULT_RUN_CONFIG',
    'SUITES',
    'run_suite',
    'replay',
]
