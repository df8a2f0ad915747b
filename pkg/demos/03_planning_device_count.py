"""Deciding how many devices to use without simulating every K.

Bound-based verdicts for adding one device, the large-dataset stationary
point, and the exhaustive optimum across SNR and bandwidth.
"""

from edgetime import SystemConfig, addition_verdict, q_of_k, stationary_point
from edgetime.experiments import ExperimentConfig, run_optimal_k_vs_snr

for k in (1, 3, 4, 10):
    v = addition_verdict(SystemConfig.default(k))
    print(f"K={k:2d} -> K+1: {v.verdict:13s} margin {v.margin_s:+.4f} s")

heavy = SystemConfig.default(4, c_range=(1e-7, 1e-7))
print("\nstationary K (c = 1e-7):", [round(r, 3) for r in stationary_point(heavy)])
print("stationary K (defaults):", stationary_point(SystemConfig.default(4)), "(communication dominates)")
print("Q(K) on defaults:", [round(q_of_k(k, SystemConfig.default(k)), 3) for k in (1, 2, 4, 8, 16)])

cfg = ExperimentConfig(k_max=40, trials=4000)
table = run_optimal_k_vs_snr(cfg, snr_grid_db=(5, 15, 25), bandwidths_hz=(20e6, 40e6))
print("\nrho_min_dB  bandwidth  k*")
for rho, bw, k_star in table.rows:
    print(f"{rho:9.0f}  {bw / 1e6:6.0f} MHz  {k_star}")
