"""Orthogonal versus non-orthogonal upload.

NOMA gives every device the whole band but decodes them one after another
with the weaker ones as interference. At low SNR the wider band wins; at
high SNR the interference does.
"""

from edgetime.experiments import ExperimentConfig, run_oma_vs_noma

cfg = ExperimentConfig(k_max=20, trials=5000, noma_trials=50_000)
table = run_oma_vs_noma(cfg, snr_grid_db=(10.0, 30.0))

for rho in (10.0, 30.0):
    rows = [r for r in table.rows if r[0] == rho]
    oma = min(rows, key=lambda r: r[2])
    noma = min(rows, key=lambda r: r[4])
    print(f"rho_min {rho:.0f} dB: best OMA {oma[2]:.4f} s at K={oma[1]}, "
          f"best NOMA {noma[4]:.4f} s at K={noma[1]}")
