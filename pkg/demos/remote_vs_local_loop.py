"""
Remote and local control loops
==============================

The same square path is streamed to the simulated plant twice: once through
a gateway that adds 120 +/- 10 ms in each direction, once through one that
adds 20 +/- 5 ms. The delay estimator should recover roughly the injected
one-way latency, and the position errors on the horizontal edges show how
much the latency costs.
"""

from cdpr import reference_robot
from cdpr.analysis import compare_logs, delay_report, horizontal_windows
from cdpr.netloop import run_experiment
from cdpr.trajectory import plan_square

robot = reference_robot()

for speed in (100, 1000):
    plan = plan_square((750, 850), 200, speed)
    remote = run_experiment(robot, plan, gateway=(120, 10), seed=42)
    local = run_experiment(robot, plan, gateway=(20, 5), seed=42)

    print(f"--- {speed} mm/s, {len(remote)} cycles")
    for name, log in (("remote", remote), ("local", local)):
        delays = delay_report(log).delays_ms
        print(f"{name:>6} delay: " + ", ".join(f"{d:.1f} ms" for d in delays))

    report = compare_logs(remote, local, horizontal_windows(plan))
    for label, row in zip(report.segment_labels, report.rows):
        print(f"{label:>6}: remote {row.error_a:.3f} %  local {row.error_b:.3f} %  "
              f"diff {row.difference:+.3f} %")
