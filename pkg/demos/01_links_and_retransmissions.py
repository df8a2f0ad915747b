"""How often does a link fail, and how many attempts does a phase take?

Outage probabilities for the three phases on the default radio, then the
expected worst-device attempt count that every synchronous phase pays.
"""

from edgetime import RadioConfig, SnrProfile, phase_outages
from edgetime.retransmission import expected_max_tx_bounds, expected_max_tx_iid

radio = RadioConfig()  # 20 MHz, 5 Mbit/s per phase

print("K   p_dist(10dB)  p_up(10dB)  p_mul")
for k in (1, 2, 4, 8, 16):
    snr = SnrProfile.spaced(k, (10, 10), (10, 10))
    out = phase_outages(snr, radio)
    print(f"{k:<3} {out.p_dist[0]:.5f}       {out.p_up[0]:.5f}     {out.p_mul:.5f}")

# Splitting the band K ways hurts distribution far more than upload: the
# device keeps its full power on a narrower band, the server splits its own.
print()
print("p    K   E[max L]  Jensen  union")
for p in (0.1, 0.5):
    for k in (2, 10, 30):
        lo, hi = expected_max_tx_bounds(p, k)
        print(f"{p:<4} {k:<3} {expected_max_tx_iid(p, k):8.4f}  {lo:6.3f}  {hi:6.2f}")
