"""
Example usage scripts for the Microlocal Workbench
Demonstrates the library calls behind each CLI subcommand on sample_inputs/
"""

from pathlib import Path

from microlocal.equivariant import hom_equivariant
from microlocal.errors import WorkbenchError
from microlocal.fiber_product import full_faithfulness_check, lift_morphism
from microlocal.melded_systems import variation_report
from microlocal.quiver_core import hom_basis, vanishing_cycles
from microlocal.serialization import (
    convert,
    decode_descent,
    decode_equivariant,
    decode_fiber_morphism,
    decode_melded,
    decode_quiver,
    decode_stack_morphism,
    decode_triple,
    dumps,
    encode_site_local_system,
    load_json,
)
from microlocal.stack_site import check_weak_iso, glue
from microlocal.symplectic_maslov import triple_form

SAMPLES = Path("sample_inputs")


def example_1_triple_form():
    """Example 1: Rank and signature of a triple form"""
    print("\n" + "="*60)
    print("EXAMPLE 1: Triple Form")
    print("="*60)

    for name in ("triple_n1.json", "triple_n2_degenerate.json"):
        t = decode_triple(load_json(SAMPLES / name))
        report = triple_form(t)
        print(f"{name:28s} profile={t.profile} rank={report.complex_rank} "
              f"signature={report.real_signature.as_tuple()}")


def example_2_quiver_hom():
    """Example 2: Hom spaces and vanishing cycles of quivers"""
    print("\n" + "="*60)
    print("EXAMPLE 2: Quiver Hom")
    print("="*60)

    a = decode_quiver(load_json(SAMPLES / "quiver_a.json"))
    b = decode_quiver(load_json(SAMPLES / "quiver_b.json"))
    for label, (q, q2) in {"a -> a": (a, a), "a -> b": (a, b), "b -> b": (b, b)}.items():
        print(f"  dim Hom({label}) = {hom_basis(q, q2).dimension}")
    print(f"  monodromies of vc(a): {vanishing_cycles(a).monodromies}")


def example_3_delta():
    """Example 3: The embedding delta and lifting"""
    print("\n" + "="*60)
    print("EXAMPLE 3: Delta")
    print("="*60)

    x = decode_equivariant(load_json(SAMPLES / "equivariant_a.json"))
    y = decode_equivariant(load_json(SAMPLES / "equivariant_b.json"))
    print(f"  dim Hom(x, x) = {hom_equivariant(x, x).dimension}")
    print(f"  full faithfulness on (x, y): {full_faithfulness_check(x, y).to_dict()}")
    tau = decode_fiber_morphism(load_json(SAMPLES / "tau_a_a.json"))
    print(f"  lifted morphism: {lift_morphism(tau, x, x)}")


def example_4_melded_variation():
    """Example 4: Variation report of a melded object"""
    print("\n" + "="*60)
    print("EXAMPLE 4: Melded Variation")
    print("="*60)

    m = decode_melded(load_json(SAMPLES / "melded_family.json"))
    print(dumps(variation_report(m, "s").to_dict()))


def example_5_gluing():
    """Example 5: Gluing a descent datum"""
    print("\n" + "="*60)
    print("EXAMPLE 5: Gluing")
    print("="*60)

    glued = glue(decode_descent(load_json(SAMPLES / "descent_fork.json")))
    print(dumps(encode_site_local_system(glued.obj)))


def example_6_weak_isomorphism():
    """Example 6: Stalkwise check of stack morphisms"""
    print("\n" + "="*60)
    print("EXAMPLE 6: Weak Isomorphism")
    print("="*60)

    for name in ("theta_scalar.json", "theta_doubling.json"):
        theta, samples, targets = decode_stack_morphism(load_json(SAMPLES / name))
        verdict = check_weak_iso(theta, samples, targets)
        print(f"  {name:22s} weak isomorphism: {verdict.weak_isomorphism}; witness: {verdict.witness}")


def example_7_error_handling():
    """Example 7: Errors carry machine-readable witnesses"""
    print("\n" + "="*60)
    print("EXAMPLE 7: Error Handling")
    print("="*60)

    try:
        convert({"n": 1, "frames": [[[1], [0]], [[{"num": 1, "den": 0}], [1]], [[1], [1]]]}, "triple")
    except WorkbenchError as exc:
        print(f"❌ {type(exc).__name__} ({exc.kind}): {exc.message}")
        print(dumps(exc.to_dict()))


def main():
    """Run all examples"""
    print("\n" + "="*70)
    print("MICROLOCAL WORKBENCH - USAGE EXAMPLES")
    print("="*70)

    examples = [
        ("Triple Form", example_1_triple_form),
        ("Quiver Hom", example_2_quiver_hom),
        ("Delta", example_3_delta),
        ("Melded Variation", example_4_melded_variation),
        ("Gluing", example_5_gluing),
        ("Weak Isomorphism", example_6_weak_isomorphism),
        ("Error Handling", example_7_error_handling),
    ]

    for _, run in examples:
        run()


if __name__ == "__main__":
    main()
