"""Acceptance checks, one group of tests per criterion.

Each criterion gets one summary line at the end of the run (see conftest).
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from cowqkd.bounds import (
    binary_entropy,
    r_perfect_visibility,
    r_zero_qber,
    three_state_pns_zero_error,
    three_state_single_photon,
    xi_constant,
)
from cowqkd.curves import crossover_length, empty_decoy_params
from cowqkd.detection import attack_rates, honest_rates
from cowqkd.mix import mix_asymptotics, mu_f, optimize_mu, solve_mix, verify_mix_residuals
from cowqkd.montecarlo import SimConfig, compare, simulate
from cowqkd.params import ProtocolParams
from cowqkd.states import UsdKind, build_state_set, usd_conclusive_closed_form, usd_conclusive_oracle

SIX = 6


def report(num, label, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} {label}: {detail}")


# 1. USD closed forms against the Gram-matrix oracle


def test_c01_usd_closed_form_vs_oracle():
    start = time.perf_counter()
    worst = 0.0
    for kind, mu in itertools.product(UsdKind, (0.1, 0.25, 0.5, 1.0, 2.0)):
        oracle = usd_conclusive_oracle(build_state_set(kind), mu).conclusive_prob
        closed = usd_conclusive_closed_form(kind, mu).conclusive_prob
        worst = max(worst, abs(oracle - closed))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 1.0
    report(1, "usd", ok, f"max |diff| = {worst:.2e}, {elapsed:.3f} s")
    assert worst < 1e-10
    assert elapsed < 1.0


# 2. Beam-splitting constants


def test_c02_xi_constant():
    xi, g = xi_constant.__wrapped__()
    ok = abs(xi - 0.4583) <= 5e-4 and abs(g - 0.1428) <= 5e-4
    report(2, "xi", ok, f"xi = {xi:.6f}, g(xi) = {g:.6f}")
    assert xi == pytest.approx(0.4583, abs=5e-4)
    assert g == pytest.approx(0.1428, abs=5e-4)


# 3. Mixture residuals and the decoy-fraction limit


def test_c03_mix_residuals():
    worst = 0.0
    for f, mu, t in itertools.product((0.05, 0.1, 0.2), (0.02, 0.05, 0.1), (0.001, 0.01, 0.1)):
        p = ProtocolParams(mu=mu, f=f, transmission=t)
        mix, _ = solve_mix(p)
        assert mix.feasible
        worst = max(worst, float(np.abs(verify_mix_residuals(mix, p)).max()))
    report(3, "residuals", worst < 1e-12, f"max residual = {worst:.2e}")
    assert worst < 1e-12


def test_c03_infeasible_decoy_fraction():
    mix, _ = solve_mix(ProtocolParams(mu=0.05, f=0.3, transmission=0.01))
    report(3, "f=0.3", not mix.feasible, f"feasible = {mix.feasible}")
    assert not mix.feasible


# 4. Minimum of mu F


def test_c04_mu_f_minimum():
    p = ProtocolParams(f=0.1)
    mus = np.linspace(0.2, 6.0, 5801)
    vals = np.array([mu_f(p.replace(mu=m)) for m in mus])
    k = int(vals.argmin())
    ok = 50 <= vals[k] <= 200 and abs(mus[k] - 2) <= 0.5
    report(4, "muF", ok, f"min mu F = {vals[k]:.2f} at mu = {mus[k]:.3f}")
    assert 50 <= vals[k] <= 200
    assert mus[k] == pytest.approx(2.0, abs=0.5)


# 5. Long-distance asymptotics


def test_c05_asymptotics_200_km(fiber_link):
    p = fiber_link.replace(length_km=200)
    res = optimize_mu(p)
    asym = mix_asymptotics(p)
    d_mu = res.mu_opt / asym["mu_opt"] - 1
    d_r = res.r_opt / asym["r_opt"] - 1
    ratio = res.mu_max / res.mu_opt
    ok = abs(d_mu) < 0.05 and abs(d_r) < 0.05 and abs(ratio / math.sqrt(3) - 1) < 0.05
    report(5, "200km", ok, f"mu_opt dev {d_mu:+.3%}, R dev {d_r:+.3%}, mu_max/mu_opt = {ratio:.4f}")
    assert abs(d_mu) < 0.05
    assert abs(d_r) < 0.05
    assert ratio == pytest.approx(math.sqrt(3), rel=0.05)


def test_c05_empty_decoy_slope(fiber_link):
    lengths = np.linspace(150, 250, 11)
    ts, rs = [], []
    for ell in lengths:
        q = empty_decoy_params(fiber_link.replace(length_km=float(ell), f0=0.05, empty_decoy=True))
        ts.append(q.t)
        rs.append(optimize_mu(q).r_opt)
    slope = np.polyfit(np.log(ts), np.log(rs), 1)[0]
    ok = abs(slope - 4 / 3) <= 0.05
    report(5, "ed-slope", ok, f"slope = {slope:.4f}")
    assert slope == pytest.approx(4 / 3, abs=0.05)


# 6. Crossovers with the beam-splitting curve


@pytest.mark.parametrize(
    "curve,target,lo,hi",
    [("MIX", 100, 60, 160), ("MIX_ED", 120, 80, 180), ("USD3_ONLY", 50, 20, 100)],
)
def test_c06_crossover(fiber_link, curve, target, lo, hi):
    start = time.perf_counter()
    p = fiber_link.replace(f0=0.05, empty_decoy=True) if curve == "MIX_ED" else fiber_link
    ell = crossover_length(curve, "BS", p, lo, hi)
    elapsed = time.perf_counter() - start
    ok = abs(ell - target) <= 10 and elapsed < 30
    report(6, curve, ok, f"crossover at {ell:.2f} km (target {target} +/- 10), {elapsed:.2f} s")
    assert ell == pytest.approx(target, abs=10)
    assert elapsed < 30


# 7. Three-state protocol thresholds


def test_c07_three_state():
    root = brentq(lambda q: three_state_single_photon(q, 1.0).r, 0.05, 0.2, xtol=1e-12)
    grid = np.linspace(0, 0.5, 101)
    err_v = max(abs(three_state_single_photon(q, 1.0).r - r_perfect_visibility(q)) for q in grid)
    err_q = max(abs(three_state_single_photon(0.0, v).r - r_zero_qber(v)) for v in np.linspace(0, 1, 101))
    ts = np.logspace(-4, -1, 7)
    rates = [three_state_pns_zero_error(ProtocolParams(transmission=t)).rate for t in ts]
    slope = np.polyfit(np.log(ts), np.log(rates), 1)[0]
    ok = abs(root - 0.11) <= 5e-4 and err_v < 1e-12 and err_q < 1e-12 and abs(slope - 2) <= 0.02
    report(7, "three-state", ok, f"Q root = {root:.5f}, identity errors {err_v:.1e}/{err_q:.1e}, PNS slope {slope:.4f}")
    assert root == pytest.approx(0.1100, abs=5e-4)
    assert err_v < 1e-12 and err_q < 1e-12
    assert slope == pytest.approx(2.0, abs=0.02)
    assert three_state_single_photon(0.05, 1.0).r == pytest.approx(1 - 2 * binary_entropy(0.05), abs=1e-12)


# 8. Monte Carlo against the honest analytic rates


def test_c08_mc_honest():
    p = ProtocolParams(mu=0.5, transmission=0.1, tB=0.9, eta=0.1, f=0.1)
    start = time.perf_counter()
    stats = simulate(SimConfig(p, "honest", windows=1_000_000, seed=8))
    elapsed = time.perf_counter() - start
    rows = compare(stats, honest_rates(p))[:SIX]
    worst = max(abs(r.z) for r in rows)
    c = stats.counts
    ratio = c.d_m2_even / c.d_b_bit
    expect = honest_rates(p).d_m2_even / honest_rates(p).d_b_bit
    err = ratio * math.sqrt(1 / c.d_m2_even + 1 / c.d_b_bit)
    ok = worst < 3 and abs(ratio - expect) < 3 * err and elapsed < 60
    report(8, "honest", ok, f"max |z| = {worst:.2f}, dM2even/dBbit z = {(ratio - expect) / err:+.2f}, {elapsed:.1f} s")
    assert worst < 3
    assert abs(ratio - expect) < 3 * err
    assert elapsed < 60


# 9. Monte Carlo under attack, zero-error property and the mixture signature


@pytest.mark.parametrize("strategy", ["usd3", "usd4a", "usd4b"])
def test_c09_attack_rates(strategy):
    p = ProtocolParams(mu=0.8, f=0.1, tB=0.9, eta=0.1)
    stats = simulate(SimConfig(p, strategy, windows=1_000_000, seed=9))
    rows = compare(stats, attack_rates(strategy.upper(), p))[:SIX]
    worst = max(abs(r.z) for r in rows)
    # USD4b forwards decoys only, so no bit is sifted and QBER is absent.
    qber = None if stats.qber is None else stats.qber.value
    zero_err = qber in (None, 0.0) and all(
        v is None or v.value == 1.0 for v in (stats.visibility_decoy, stats.visibility_10)
    )
    report(9, strategy, worst < 3 and zero_err, f"max |z| = {worst:.2f}, QBER = {qber}")
    assert worst < 3
    assert zero_err


def test_c09_mix_signature_150_km(fiber_link):
    p0 = fiber_link.replace(length_km=150)
    p = p0.replace(mu=optimize_mu(p0).mu_opt)
    stats = simulate(SimConfig(p, "mix", windows=10_000_000, seed=9))
    rows = {r.name: r for r in compare(stats)}
    worst = max(abs(rows[n].z) for n in list(rows)[:SIX])
    bias = rows["decoy_neighbor_bias"]
    zero_err = stats.qber.value == 0.0 and all(
        v is None or v.value == 1.0 for v in (stats.visibility_decoy, stats.visibility_10)
    )
    ok = worst < 3 and zero_err and bias.z > 5
    report(
        9,
        "mix-150km",
        ok,
        f"mu = {p.mu:.4f}, max |z| of six rates = {worst:.2f}, QBER = {stats.qber.value}, "
        f"decoy-neighbour bias {bias.value:.3f} vs {bias.analytic:.3f} from "
        f"{stats.decoy_neighbor_bias.count} detected decoys, z = {bias.z:.2f}",
    )
    assert worst < 3
    assert zero_err
    assert bias.z > 5


# 10. Determinism


def test_c10_determinism():
    p = ProtocolParams(mu=0.3, f=0.1, length_km=70)
    cfg = SimConfig(p, "mix", windows=200_000, seed=1234, shard_windows=50_000)
    a = simulate(cfg).to_json()
    b = simulate(cfg).to_json()
    c = simulate(SimConfig(p, "mix", windows=200_000, seed=1234, shard_windows=50_000, workers=2)).to_json()
    ok = a == b == c
    report(10, "json", ok, f"{len(a)} bytes, identical = {ok}")
    assert a.encode() == b.encode() == c.encode()
