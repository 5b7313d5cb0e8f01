"""
A zero-error attack that reproduces every detection rate
========================================================

Three USD attacks distort Bob's statistics in different directions. Mixed
in the right proportions, and combined with a lossless line for the rest of
the time, they reproduce the six rates of an honest lossy fibre exactly.
"""

import numpy as np

from cowqkd.curves import crossover_length, evaluate_curve
from cowqkd.detection import honest_rates_linear
from cowqkd.mix import mixture_rates, optimize_mu, solve_mix
from cowqkd.params import ProtocolParams

link = ProtocolParams(mu=0.2, f=0.1, tB=0.99, eta=0.1, alpha_att=0.25, length_km=100)
mix, coeffs = solve_mix(link)
print(f"t = {link.t:.3e}")
print(f"pass-through q0 = {mix.q0:.4f}, USD3 q1 = {mix.q1:.4f}, USD4a q2 = {mix.q2:.4f}, USD4b q3 = {mix.q3:.4f}")

# Side by side: honest line vs Eve's mixture.
names = ("D_B bit", "D_B decoy", "M1 even", "M2 even", "M1 odd", "M2 odd")
for name, h, e in zip(names, honest_rates_linear(link).as_array(), mixture_rates(mix, link).as_array()):
    print(f"{name:10s} honest {h:.6e}  mixture {e:.6e}")

# Only the untouched fraction q0 can carry secret key. The best mu shrinks
# with distance and the rate falls as t^(3/2).
for km in (50, 100, 150, 200):
    p = link.replace(length_km=km)
    res = optimize_mu(p)
    mu_max = "beyond bracket" if res.mu_max is None else f"{res.mu_max:.4f}"
    print(f"{km:3d} km  mu_opt = {res.mu_opt:.4f}  R = {res.r_opt:.3e}  mu_max = {mu_max}")

# Against the collective beam-splitting attack the mixture is only the
# stronger bound beyond some distance.
print(f"mixture beats beam splitting beyond {crossover_length('MIX', 'BS', link, 60, 160):.1f} km")
print(f"with empty decoys: {crossover_length('MIX_ED', 'BS', link.replace(f0=0.05, empty_decoy=True), 80, 180):.1f} km")

bs = evaluate_curve("BS", link)
print(f"BS at 100 km: mu_opt = {bs.mu_opt:.4f}, R = {bs.r:.3e}")
print("residuals:", np.abs(mixture_rates(mix, link).as_array() - honest_rates_linear(link).as_array()).max())
