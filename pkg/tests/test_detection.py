import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cowqkd.detection import (
    AttackKind,
    attack_rates,
    conclusive_prob_weighted,
    honest_rates,
    honest_rates_linear,
    reconstruct_from_data_line,
)
from cowqkd.params import ForwardingModel, ProtocolParams

# Evaluated at 30 digits with mpmath from the (1 +/- f) textbook forms of the
# six honest rates, independently of the code's full-slot-probability form.
HONEST_MU05_T01 = (
    0.0040409011533864855,
    0.00089797803408588566,
    0.00016248047112603254,
    0.00011249296904295959,
    0.00021308332677492343,
    6.1871132973627777e-5,
)
# USD4b at f=0.1, mu=1, tB=0.9, eta=0.1, single-photon forwarding (same method).
USD4B_MU1 = (0.0, 0.00016826332443327952, 9.3479624685155287e-6, 0.0, 4.6739812342577643e-6, 4.6739812342577643e-6)


def test_honest_frozen_vector():
    p = ProtocolParams(mu=0.5, transmission=0.1, tB=0.9, eta=0.1, f=0.1)
    np.testing.assert_allclose(honest_rates(p).as_array(), HONEST_MU05_T01, rtol=1e-13)


def test_usd4b_frozen_vector():
    p = ProtocolParams(mu=1.0, f=0.1, tB=0.9, eta=0.1)
    np.testing.assert_allclose(attack_rates("USD4B", p).as_array(), USD4B_MU1, rtol=1e-13, atol=1e-20)


def test_vacuum_limit():
    p = ProtocolParams(mu=1e-9, f=0.0, transmission=1e-6)
    assert np.all(honest_rates(p).as_array() < 1e-15)


def test_no_monitor_light_when_tb_is_one():
    p = ProtocolParams(mu=0.3, f=0.2, tB=1.0, transmission=1.0)
    r = honest_rates(p)
    assert r.d_m1_even == r.d_m2_even == r.d_m1_odd == r.d_m2_odd == 0.0
    assert r.d_b_bit == pytest.approx(0.8 * (1 - math.exp(-0.3 * 0.1)), rel=1e-14)


def test_usd3_weighted_conclusive():
    p = ProtocolParams(mu=0.5, f=0.1)
    assert conclusive_prob_weighted("USD3", p) == pytest.approx(0.45**2 * (1 - math.exp(-0.5)) ** 2, rel=1e-14)
    p = ProtocolParams(mu=math.log(2), f=0.1)
    assert conclusive_prob_weighted("USD3", p) == pytest.approx(0.050625, rel=1e-14)


def test_usd4b_needs_decoys():
    assert conclusive_prob_weighted("USD4B", ProtocolParams(mu=1.0, f=0.0)) == 0.0


def test_usd3_empty_decoy_weighted():
    p = ProtocolParams(mu=0.5, f=0.1, f0=0.05, empty_decoy=True)
    expect = 0.45 * (0.45 + 0.05) * (1 - math.exp(-0.5)) ** 3
    assert conclusive_prob_weighted("USD3", p) == pytest.approx(expect, rel=1e-14)


def test_attack_structure():
    p = ProtocolParams(mu=0.7, f=0.1, tB=0.9)
    assert attack_rates("USD4A", p).d_m2_odd == 0.0
    assert attack_rates("USD4B", p).d_m2_even == 0.0
    assert attack_rates("USD3", p).d_b_decoy == 0.0
    assert attack_rates("USD4A", p).d_b_decoy == 0.0
    assert attack_rates("USD4B", p).d_b_bit == 0.0


def test_usd3_two_thirds_factor():
    p = ProtocolParams(mu=0.4, f=0.1, tB=0.9, eta=0.2)
    r = attack_rates("USD3", p)
    pc = conclusive_prob_weighted("USD3", p)
    assert r.d_b_bit == pytest.approx(2 / 3 * pc * 0.9 * 0.2)
    assert r.d_m1_odd == pytest.approx(2 / 3 * pc * 0.1 * 0.2 / 4)


def test_reconstruction_from_data_line():
    p = ProtocolParams(mu=0.2, f=0.15, tB=0.95, eta=0.1, transmission=0.01)
    lin = honest_rates_linear(p)
    f, x, monitors = reconstruct_from_data_line(lin.d_b_bit, lin.d_b_decoy, p.tB)
    assert f == pytest.approx(0.15, abs=1e-12)
    assert x == pytest.approx(math.exp(-0.2 * 0.01 * 0.1), rel=1e-12)
    np.testing.assert_allclose(monitors, lin.as_array()[2:], rtol=1e-9)


params_strategy = st.builds(
    ProtocolParams,
    mu=st.floats(0.01, 2.0),
    f=st.floats(0.0, 0.3),
    tB=st.floats(0.5, 0.999),
    eta=st.floats(0.01, 1.0),
)


@settings(max_examples=50, deadline=None)
@given(p=params_strategy, kind=st.sampled_from(list(AttackKind)))
def test_bright_dominates_single_photon(p, kind):
    bright = attack_rates(kind, p, ForwardingModel.BRIGHT_PULSE).as_array()
    photon = attack_rates(kind, p, ForwardingModel.SINGLE_PHOTON).as_array()
    assert np.all(bright >= photon - 1e-18)


@settings(max_examples=50, deadline=None)
@given(p=params_strategy, kind=st.sampled_from(list(AttackKind)), k=st.floats(0.1, 0.99))
def test_single_photon_rates_linear_in_eta(p, kind, k):
    a = attack_rates(kind, p).as_array()
    b = attack_rates(kind, p.replace(eta=p.eta * k)).as_array()
    np.testing.assert_allclose(b, k * a, rtol=1e-12, atol=1e-300)


@settings(max_examples=50, deadline=None)
@given(p=params_strategy)
def test_linear_honest_bounds_exact(p):
    assert np.all(honest_rates_linear(p).as_array() >= honest_rates(p).as_array() - 1e-18)
