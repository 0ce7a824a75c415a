"""
Quick test script - runs every suite at a small size and prints a summary
Usage: python quick_test.py [cases] [seed]
"""

import sys

from microlocal.errors import WorkbenchError
from microlocal.suites import SUITES, RunConfig, run_suite, summary_frame

cases = int(sys.argv[1]) if len(sys.argv) > 1 else 3
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
config = RunConfig(seed=seed, cases=cases, max_n=3, max_dim=2, max_generators=2)

print("\n" + "="*70)
print("QUICK TEST - Microlocal Workbench")
print("="*70)

reports = []
for name in SUITES:
    try:
        report = run_suite(config, name)
    except WorkbenchError as exc:
        print(f"❌ {name}: {exc.message}")
        continue
    reports.append(report)
    mark = "✓" if report.ok else "✗"
    print(f"  {mark} {name:20s} {len(report.results) - len(report.failures)}/{len(report.results)}")

print("\n" + summary_frame(reports).to_string(index=False))

failed = [r for r in reports if not r.ok]
if failed or len(reports) != len(SUITES):
    print("\n" + "="*70)
    print("❌ Some suites failed")
    print("="*70)
    for report in failed:
        first = report.failures[0]
        print(f"\n{report.suite}: case {first.case} -> {first.witness}")
        print(f"  replay: python main.py suite {report.suite} --seed {seed} --cases {first.case + 1}")
    sys.exit(1)

print("\n" + "="*70)
print("✅ SUCCESS! All suites passed")
print("="*70)
print()
