"""Completion time as a function of the number of edge devices.

More devices shrink every local solve but split the band during data
distribution, push upload outages up and require more global iterations.
The Monte-Carlo mean sits between the two closed-form bounds.
"""

from edgetime import SystemConfig, avg_completion_mc
from edgetime.planner import k_seed

rows = []
for k in range(1, 31):
    est = avg_completion_mc(SystemConfig.default(k), trials=10_000, seed=k_seed(0, k))
    rows.append((k, est))
    print(f"K={k:2d}  mean {est.mean_s:12.4f} s  +- {est.stderr_s:.4f}"
          f"   bounds [{est.lower_bound_s:.4f}, {est.upper_bound_s:.4f}]  M_K={est.iterations_m_k}")

k_best, best = min(rows, key=lambda r: r[1].mean_s)
print(f"\nfastest: K={k_best} at {best.mean_s:.3f} s (single device {rows[0][1].mean_s:.3f} s)")
