"""Expected detection rates at Bob's three detectors.

All rates are expressed per two-slot window. ``even`` refers to the monitor
slot that closes a window (interference of the two pulses of one window) and
``odd`` to the slot that opens the next one (interference across a bit
separation).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

import numpy as np

from .params import ForwardingModel, ProtocolParams
from .states import UsdKind, usd_conclusive_closed_form

RATE_NAMES = ("d_b_bit", "d_b_decoy", "d_m1_even", "d_m2_even", "d_m1_odd", "d_m2_odd")


class AttackKind(enum.Enum):
    USD3 = "USD3"
    USD4A = "USD4A"
    USD4B = "USD4B"


@dataclass(frozen=True)
class DetectionRates:
    d_b_bit: float
    d_b_decoy: float
    d_m1_even: float
    d_m2_even: float
    d_m1_odd: float
    d_m2_odd: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in RATE_NAMES])

    @classmethod
    def from_array(cls, values) -> "DetectionRates":
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def __add__(self, other: "DetectionRates") -> "DetectionRates":
        return DetectionRates.from_array(self.as_array() + other.as_array())

    def scaled(self, k: float) -> "DetectionRates":
        return DetectionRates.from_array(k * self.as_array())


def _full_boundary_prob(p: ProtocolParams) -> float:
    """Probability that a given slot adjacent to a bit separation is full."""
    return p.p_bit + p.f1


def _honest(p: ProtocolParams, t: float, click) -> DetectionRates:
    data = click(p.mu * t * p.tB * p.eta)
    d_rand = click(p.mu * t * (1 - p.tB) * p.eta / 4)
    d_int = click(p.mu * t * (1 - p.tB) * p.eta)
    pf = _full_boundary_prob(p)
    one_full = 2 * pf * (1 - pf)
    return DetectionRates(
        d_b_bit=(1 - p.f) * data,
        d_b_decoy=2 * p.f1 * data,
        d_m1_even=(1 - p.f) * d_rand + p.f1 * d_int,
        d_m2_even=(1 - p.f) * d_rand,
        d_m1_odd=one_full * d_rand + pf**2 * d_int,
        d_m2_odd=one_full * d_rand,
    )


def _exact_click(x: float) -> float:
    return -math.expm1(-x)


def honest_rates(p: ProtocolParams, t: float | None = None) -> DetectionRates:
    """Detection rates of the undisturbed channel with transmission ``t``.

    Without empty decoys this is the textbook six-rate vector; with them the
    full-decoy fraction ``f1`` replaces ``f`` where decoys interfere.
    """
    return _honest(p, p.t if t is None else t, _exact_click)


def honest_rates_linear(p: ProtocolParams, t: float | None = None) -> DetectionRates:
    """First-order expansion of :func:`honest_rates` in ``mu * eta``."""
    return _honest(p, p.t if t is None else t, lambda x: x)


def reconstruct_from_data_line(d_b_bit: float, d_b_decoy: float, tB: float):
    """Recover ``(f, x = exp(-mu t eta))`` and the linearised monitor rates.

    Works for the standard protocol: once ``tB`` is calibrated the data-line
    pair fixes everything else.
    """
    f = d_b_decoy / (2 * d_b_bit + d_b_decoy)
    mu_t_eta = d_b_bit / ((1 - f) * tB)
    x = math.exp(-mu_t_eta)
    d_rand = mu_t_eta * (1 - tB) / 4
    d_int = mu_t_eta * (1 - tB)
    monitors = (
        (1 - f) * d_rand + f * d_int,
        (1 - f) * d_rand,
        (1 - f * f) / 2 * d_rand + (1 + f) ** 2 / 4 * d_int,
        (1 - f * f) / 2 * d_rand,
    )
    return f, x, monitors


def usd_kind_for(kind: AttackKind | str, empty_decoy: bool) -> UsdKind:
    kind = AttackKind(kind)
    if not empty_decoy:
        return UsdKind(kind.value)
    return UsdKind.USD3_ED if kind is AttackKind.USD3 else UsdKind.USD4_ED


def target_prior(kind: AttackKind | str, p: ProtocolParams) -> float:
    """Probability that Alice emits the attack's target pattern."""
    kind = AttackKind(kind)
    # Windows whose edge slot next to the target is empty: bit of the right
    # value, or an empty decoy.
    flank = p.p_bit + p.f0
    if kind is AttackKind.USD3:
        return p.p_bit * flank
    if kind is AttackKind.USD4A:
        return p.p_bit**2
    return p.f1 * flank**2


def conclusive_prob_weighted(kind: AttackKind | str, p: ProtocolParams) -> float:
    """Probability per attacked group that Eve gets a conclusive result.

    Alice's prior over the target pattern times the state-level conclusive
    probability.
    """
    state = usd_conclusive_closed_form(usd_kind_for(kind, p.sends_empty_decoys), p.mu).conclusive_prob
    return target_prior(kind, p) * state


def attack_rates(kind: AttackKind | str, p: ProtocolParams, fw: ForwardingModel | str = ForwardingModel.SINGLE_PHOTON) -> DetectionRates:
    """Detection rates when Eve runs one USD attack on every group."""
    kind = AttackKind(kind)
    fw = ForwardingModel.parse(fw)
    pc = conclusive_prob_weighted(kind, p)
    pi = fw.detection_prob
    data = pi(p.tB * p.eta)
    quarter = pi((1 - p.tB) * p.eta / 4)
    half = pi((1 - p.tB) * p.eta / 2)
    if kind is AttackKind.USD3:
        w = 2.0 / 3.0 * pc
        return DetectionRates(w * data, 0.0, w * quarter, w * quarter, w * quarter, w * quarter)
    w = 0.5 * pc
    if kind is AttackKind.USD4A:
        return DetectionRates(w * data, 0.0, w * quarter, w * quarter, w * half, 0.0)
    return DetectionRates(0.0, w * data, w * half, 0.0, w * quarter, w * quarter)
