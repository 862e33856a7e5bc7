"""Walkthrough: verifying every hand-written backward pass numerically.

Each stage of the model ships with an analytic gradient. The harness bumps
one tensor entry at a time and compares a central difference of a random
probe against the analytic value. Anything above tolerance is a defect.
"""

from fsca.gradcheck import run_suite

results = run_suite(seed=0, rounds=3)
width = max(len(r.name) for r in results)
print(f"{'stage':<{width}}  {'worst rel err':>13}  {'tolerance':>9}  verdict")
for r in results:
    print(f"{r.name:<{width}}  {r.worst:13.3e}  {r.tolerance:9.0e}  "
          f"{'ok' if r.passed else 'WRONG GRADIENT'}")

bad = [r.name for r in results if not r.passed]
print()
print("all gradients verified" if not bad else f"failures: {bad}")
