"""
What the mixture looks like photon by photon
============================================

The simulation draws Alice's pulse train, lets Eve act block by block and
sends the result through Bob's coupler and interferometer. Rates match the
honest line, but the patterns around detected decoys give Eve away.
"""

from cowqkd.montecarlo import SimConfig, compare, simulate
from cowqkd.params import ProtocolParams

link = ProtocolParams(mu=0.85, f=0.1, tB=0.99, eta=0.1, alpha_att=0.25, length_km=80)

for strategy in ("honest", "mix"):
    stats = simulate(SimConfig(link, strategy, windows=1_000_000, seed=2))
    print(f"\n{strategy}: {stats.counts.counted_windows} counted windows")
    for row in compare(stats):
        print(f"  {row.name:20s} {row.value:.4e}  analytic {row.analytic:.4e}  z = {row.z:+.2f}")
    # Absent entries (no counts in that class) print as None.
    shown = [None if e is None else e.value for e in (stats.qber, stats.visibility_decoy, stats.visibility_10)]
    print("  QBER {}, V_decoy {}, V_10 {}".format(*shown))

# The USD4b branch resends a decoy only after seeing "0 a a 0", so every
# decoy it produces sits between a bit 0 and a bit 1. Honest decoys have
# that neighbourhood with probability ((1 - f)/2)^2.
#
# Eve picks one strategy per block of 1000 windows and only a few dozen
# blocks go to USD3 or USD4a, so the mixture's rates scatter far more than
# counting noise alone would suggest. The z-scores use the spread between
# blocks; longer runs shrink it.
