"""
Test script for the JSON formats, the batch suites and the command line
Usage: pytest test_main.py
"""

import json

import pytest

from main import run
from microlocal.errors import ParseError, UnknownSuite
from microlocal.serialization import convert, decode, decode_scalar, load_json
from microlocal.suites import (
    DEFAULT_RUN_CONFIG,
    SUITES,
    RunConfig,
    delta_batch,
    replay,
    run_case,
    run_suite,
    summary_frame,
)

SAMPLE_FILES = {
    "triple": "sample_inputs/triple_n1.json",
    "quiver": "sample_inputs/quiver_a.json",
    "kernel": "sample_inputs/kernel_swap.json",
    "equivariant": "sample_inputs/equivariant_a.json",
    "melded": "sample_inputs/melded_family.json",
    "site": "sample_inputs/site_fork.json",
    "descent": "sample_inputs/descent_fork.json",
}

SMALL_RUN = RunConfig(seed=7, cases=2, max_n=2, max_dim=2, max_generators=2)


@pytest.mark.parametrize("fmt", list(SAMPLE_FILES))
def test_convert_is_idempotent(fmt):
    once = convert(load_json(SAMPLE_FILES[fmt]), fmt)
    assert convert(once, fmt) == once


def test_scalars_must_be_exact():
    assert decode_scalar("6/4", "x") == decode_scalar({"num": 3, "den": 2}, "x")
    with pytest.raises(ParseError):
        decode_scalar({"num": 1, "den": 0}, "x")
    with pytest.raises(ParseError) as exc:
        decode_scalar(0.5, "entry")
    assert exc.value.witness == {"location": "entry"}


def test_unknown_format():
    with pytest.raises(ParseError):
        decode("spreadsheet", {})


def test_missing_file():
    with pytest.raises(ParseError) as exc:
        load_json("sample_inputs/nowhere.json")
    assert exc.value.kind == "input"


def test_cli_success():
    doc, code = run(["quiver", "hom", SAMPLE_FILES["quiver"], SAMPLE_FILES["quiver"]])
    assert code == 0
    assert doc["dimension"] == 1


def test_cli_violation():
    doc, code = run(["stack", "weakiso", "sample_inputs/theta_doubling.json"])
    assert code == 1
    assert doc["weak_isomorphism"] is False


def test_cli_input_error():
    doc, code = run(["quiver", "vc", "sample_inputs/nowhere.json"])
    assert code == 2
    assert doc["error"] == "ParseError"


def test_cli_glue():
    doc, code = run(["stack", "glue", SAMPLE_FILES["descent"]])
    assert code == 0
    assert len(doc["sigmas"]) == 2


def test_cli_maslov_triple():
    doc, code = run(["maslov", "triple", SAMPLE_FILES["triple"]])
    assert code == 0
    assert doc["complex_rank"] == 3
    assert doc["signature"] == [3, 3, 0]


def test_cli_maslov_holonomy():
    doc, code = run(["maslov", "holonomy", "sample_inputs/loop_constant.json"])
    assert code == 0
    assert doc == {"holonomy": 1, "samples": 3}


def test_cli_equiv_check():
    doc, code = run(["equiv", "check", SAMPLE_FILES["equivariant"]])
    assert code == 0
    assert doc["valid"] is True


def test_cli_equiv_check_with_kernel_file():
    doc, code = run(["equiv", "check", SAMPLE_FILES["equivariant"], SAMPLE_FILES["kernel"]])
    assert code == 0
    assert doc["valid"] is True


def test_cli_equiv_check_rejects_extra_files():
    doc, code = run(["equiv", "check", SAMPLE_FILES["equivariant"], SAMPLE_FILES["kernel"], SAMPLE_FILES["kernel"]])
    assert code == 2
    assert doc["error"] == "ParseError"


def test_cli_equiv_hom():
    doc, code = run(["equiv", "hom", SAMPLE_FILES["equivariant"], "sample_inputs/equivariant_b.json"])
    assert code == 0
    assert doc["dimension"] >= 0


def test_cli_delta_lift():
    a = SAMPLE_FILES["equivariant"]
    doc, code = run(["delta", "lift", "sample_inputs/tau_a_a.json", "--x", a, "--y", a])
    assert code == 0
    assert len(doc["morphism"]) == 2


def test_cli_delta_lift_needs_objects():
    doc, code = run(["delta", "lift", "sample_inputs/tau_a_a.json"])
    assert code == 2


def test_cli_delta_check_runs_the_seeded_batch():
    doc, code = run(["delta", "check", "--cases", "3"])
    assert code == 0
    assert [row["pair"] for row in doc["rows"]] == [0, 1, 2]
    assert all(row["dim_equivariant"] == row["dim_fiber"] for row in doc["rows"])


def test_cli_delta_check_on_files():
    doc, code = run(["delta", "check", SAMPLE_FILES["equivariant"], "sample_inputs/equivariant_b.json"])
    assert code == 0
    assert len(doc["rows"]) == 4
    assert doc["equal"] is True


def test_delta_batch_matches_the_suite_pairs():
    rows = delta_batch(SMALL_RUN)
    assert len(rows) == SMALL_RUN.cases
    assert all(row["equal"] for row in rows)


def test_cli_melded_check():
    doc, code = run(["melded", "check", SAMPLE_FILES["melded"]])
    assert code == 0
    assert doc == {"valid": True}


def test_cli_melded_hom():
    doc, code = run(["melded", "hom", SAMPLE_FILES["melded"], SAMPLE_FILES["melded"]])
    assert code == 0
    assert doc["dimension"] >= 1


def test_cli_melded_variation():
    doc, code = run(["melded", "variation", SAMPLE_FILES["melded"], "--generator", "s"])
    assert code == 0
    assert doc["generator"] == "s"
    assert doc["label"] in ("base-case", "decision-dependent")


def test_cli_stack_check():
    doc, code = run(["stack", "check", SAMPLE_FILES["site"], "sample_inputs/prestack_local_systems.json"])
    assert code == 0


def test_cli_stack_stalk():
    doc, code = run(["stack", "stalk", SAMPLE_FILES["site"], "sample_inputs/prestack_local_systems.json",
                     "--point", "b"])
    assert code == 0
    assert doc["open"] == "a+b"
    assert len(doc["objects"]) == 2


def test_cli_stack_stalk_unknown_point():
    doc, code = run(["stack", "stalk", SAMPLE_FILES["site"], "sample_inputs/prestack_local_systems.json",
                     "--point", "z"])
    assert code == 2


def test_cli_suite():
    doc, code = run(["suite", "maslov-loops", "--cases", "2", "--max-n", "1"])
    assert code == 0
    assert doc["failed"] == 0


def test_maslov_loops_refines_degenerate_steps():
    result = run_case("maslov-loops", 5, DEFAULT_RUN_CONFIG)
    assert result.passed, result.witness


def test_cli_convert_writes_file(tmp_path):
    out = tmp_path / "site.json"
    doc, code = run(["convert", SAMPLE_FILES["site"], "--format", "site", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text(encoding="utf-8")) == doc


def test_unknown_suite():
    with pytest.raises(UnknownSuite):
        run_suite(SMALL_RUN, "everything")


@pytest.mark.parametrize("suite", list(SUITES))
def test_small_suite_runs(suite):
    report = run_suite(SMALL_RUN, suite)
    assert report.ok
    assert report.to_dict()["cases"] == 2
    assert list(summary_frame([report])["suite"]) == [suite]


def test_suites_are_reproducible():
    first = run_suite(SMALL_RUN, "vc-functor")
    second = run_suite(SMALL_RUN, "vc-functor")
    assert [r.digest for r in first.results] == [r.digest for r in second.results]


def test_replay_reruns_one_case():
    report = run_suite(SMALL_RUN, "triple-signature")
    case = report.results[1]
    again = replay(case.replay)
    assert again.digest == case.digest
    assert again.passed == case.passed


def test_replay_needs_a_seed():
    with pytest.raises(ParseError):
        replay({"suite": "melded", "case": 0})


@pytest.mark.parametrize("field", ["cases", "max_n", "max_dim"])
def test_run_config_rejects_non_positive_caps(field):
    with pytest.raises(ParseError):
        RunConfig(**{field: 0})


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
