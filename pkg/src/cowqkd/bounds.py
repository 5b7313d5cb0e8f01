"""Reference security bounds: beam-splitting attack and the three-state protocol."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .optimize import golden_max
from .params import InvalidInputError, ProtocolParams


def binary_entropy(p):
    """h(p) in bits, with h(0) = h(1) = 0. Accepts scalars or arrays."""
    p = np.asarray(p, dtype=float)
    inside = (p > 0) & (p < 1)
    q = np.where(inside, p, 0.5)
    out = np.where(inside, -q * np.log2(q) - (1 - q) * np.log2(1 - q), 0.0)
    return float(out) if out.ndim == 0 else out


def shannon_entropy(probs) -> float:
    probs = np.asarray(probs, dtype=float)
    nz = probs[probs > 0]
    return float(-(nz * np.log2(nz)).sum())


# --- beam-splitting attack -------------------------------------------------


@dataclass(frozen=True)
class BsAttackResult:
    overlap: float
    i_usd: float
    i_me: float
    chi_holevo: float
    rate: float
    mu: float


def bs_attack(p: ProtocolParams) -> BsAttackResult:
    """Eve's information on one bit from the beam-split fraction ``1 - t``.

    The rate is the Devetak-Winter bound against the collective version of
    the attack.
    """
    ov = math.exp(-p.mu * (1 - p.t))
    i_usd = 1 - ov
    i_me = 1 - binary_entropy(0.5 - 0.5 * math.sqrt(max(0.0, 1 - ov * ov)))
    chi = binary_entropy((1 - ov) / 2)
    rate = (1 - p.f) * -math.expm1(-p.mu * p.t * p.tB * p.eta) * (1 - chi)
    return BsAttackResult(ov, i_usd, i_me, chi, rate, p.mu)


def g_bs(x: float) -> float:
    return x * (1 - binary_entropy((1 - math.exp(-x)) / 2))


@functools.lru_cache(maxsize=1)
def xi_constant() -> tuple[float, float]:
    """Maximiser ``xi`` of ``g(x) = x [1 - h((1 - e^-x)/2)]`` and ``g(xi)``."""
    return golden_max(g_bs, 0.01, 3.0, xtol=1e-10)


@dataclass(frozen=True)
class BsOptimum:
    xi: float
    g_xi: float
    mu_opt: float
    rate: float


def bs_optimal_mu(p: ProtocolParams) -> BsOptimum:
    """Optimal mean photon number against the collective BS attack (``mu t tB eta << 1``)."""
    t = p.t
    if t >= 1:
        raise InvalidInputError("the beam-splitting optimum needs a lossy channel (t < 1)")
    xi, g = xi_constant()
    return BsOptimum(xi, g, xi / (1 - t), g * t / (1 - t) * p.tB * p.eta * (1 - p.f))


# --- three-state protocol ----------------------------------------------------


@dataclass(frozen=True)
class BellDiagonalWeights:
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3, self.lambda4])


@dataclass(frozen=True)
class ThreeStateBound:
    r: float
    weights: BellDiagonalWeights

    @property
    def clamped(self) -> float:
        return max(0.0, self.r)


def _check_qv(q: float, v: float):
    if not 0.0 <= q <= 0.5:
        raise InvalidInputError(f"Q must lie in [0, 1/2], got {q}")
    if not 0.0 <= v <= 1.0:
        raise InvalidInputError(f"V must lie in [0, 1], got {v}")


def bell_weights(q: float, v: float) -> BellDiagonalWeights:
    """Bell-diagonal weights attaining the infimum for QBER ``q`` and visibility ``v``."""
    _check_qv(q, v)
    s = math.sqrt(max(0.0, (1 - v * v) * q * (1 - q)))
    plus = (1 + v) / 2 - q * v - s
    minus = (1 - v) / 2 + q * v + s
    return BellDiagonalWeights((1 - q) * plus, (1 - q) * minus, q * minus, q * plus)


def three_state_single_photon(q: float, v: float) -> ThreeStateBound:
    """Single-photon lower bound ``r(Q, V) = 1 - H(lambda)``; may be negative."""
    w = bell_weights(q, v)
    return ThreeStateBound(1 - shannon_entropy(np.clip(w.as_array(), 0, None)), w)


def r_perfect_visibility(q: float) -> float:
    return 1 - 2 * binary_entropy(q)


def r_zero_qber(v: float) -> float:
    return 1 - binary_entropy((1 - v) / 2)


def in_constraint_set(lams, q: float, v: float, tol: float = 1e-12) -> bool:
    """Whether Bell-diagonal weights are compatible with the observed ``(Q, V)``."""
    l1, l2, l3, l4 = lams
    if min(lams) < -tol or abs(sum(lams) - 1) > tol or abs(l3 + l4 - q) > tol:
        return False
    r1, r2, r3, r4 = (math.sqrt(max(x, 0.0)) for x in lams)
    hi, lo = (1 + v) / 2, (1 - v) / 2
    return (r1 - r3) ** 2 - tol <= hi <= (r1 + r3) ** 2 + tol and (r2 - r4) ** 2 - tol <= lo <= (r2 + r4) ** 2 + tol


@dataclass(frozen=True)
class WcpBound:
    per_bit: float
    rate: float
    delta: float
    q1: float
    v1: float
    vacuous: bool


def tagged_fraction(p: ProtocolParams) -> float:
    """Multi-photon fraction among detected signals, untrusted-detector accounting."""
    mu = p.mu
    multi = -math.expm1(-mu) - mu * math.exp(-mu)
    return multi / -math.expm1(-mu * p.t * p.eta)


def three_state_wcp(p: ProtocolParams, q: float = 0.0, v: float = 1.0) -> WcpBound:
    """GLLP lower bound for weak coherent pulses.

    ``per_bit = (1 - D) S(Q1, V1) - h(Q)`` with ``S = r + h`` the privacy
    amplification term of the single-photon bound, ``D`` the tagged
    fraction and ``(Q1, V1)`` the parameters Eve leaves on untagged pulses.
    ``rate`` multiplies by the detected-bit rate.
    """
    _check_qv(q, v)
    delta = tagged_fraction(p)
    if delta >= 1:
        return WcpBound(0.0, 0.0, delta, math.nan, math.nan, True)
    q1 = q / (1 - delta)
    v1 = (v - delta) / (1 - delta)
    if v1 < 0 or q1 > 0.5:
        return WcpBound(0.0, 0.0, delta, q1, v1, True)
    s = three_state_single_photon(q1, v1).r + binary_entropy(q1)
    per_bit = (1 - delta) * s - binary_entropy(q)
    detected = (1 - p.f) * -math.expm1(-p.mu * p.t * p.tB * p.eta)
    return WcpBound(per_bit, max(0.0, per_bit) * detected, delta, q1, v1, False)


@dataclass(frozen=True)
class PnsResult:
    mu_opt: float
    rate: float


def pns_rate(p: ProtocolParams) -> float:
    """Zero-error PNS attack on the three-state protocol, ``mu << 1`` regime."""
    t = p.t
    return max(0.0, (1 - p.mu / (2 * t)) * p.mu * t * p.tB * p.eta * (1 - p.f))


def three_state_pns_zero_error(p: ProtocolParams) -> PnsResult:
    t = p.t
    return PnsResult(t, t * t / 2 * p.tB * p.eta * (1 - p.f))
