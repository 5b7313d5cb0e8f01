"""Attack mixtures that reproduce Bob's detection rates, and the resulting key rates.

Eve runs USD3 with probability ``q1``, USD4a with ``q2``, USD4b with ``q3``
and forwards losslessly with ``q0``. In the linearised single-photon regime
the mixture that reproduces all six rates has a closed form; the key-rate
upper bound follows from the bits she did not touch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detection import (
    AttackKind,
    DetectionRates,
    attack_rates,
    conclusive_prob_weighted,
    honest_rates,
    honest_rates_linear,
    usd_kind_for,
)
from .optimize import MU_BRACKET, first_root_above, maximize_log
from .params import ForwardingModel, InfeasibleRegimeError, ProtocolParams
from .states import usd_conclusive_closed_form

SQRT5_MINUS_2 = math.sqrt(5) - 2
LINEAR_REGIME_LIMIT = 0.1  # mu * eta below which the linearised solution is trusted


@dataclass(frozen=True)
class MixCoefficients:
    F1: float
    F2: float
    F3: float
    cal_f: float

    @property
    def F(self) -> float:
        return self.F1 + self.F2 + self.F3


@dataclass(frozen=True)
class AttackMix:
    """Probabilities of each branch of Eve's strategy.

    ``blocking`` is the extra fraction of blocks Eve discards outright; it is
    non-zero only when the plain solution would need ``q0 < 0``.
    """

    q0: float
    q1: float
    q2: float
    q3: float
    feasible: bool
    blocking: float = 0.0
    linear_regime: bool = True
    notes: tuple[str, ...] = ()

    def as_array(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3])

    def branch_probabilities(self) -> np.ndarray:
        """(pass-through, USD3, USD4a, USD4b, blocked), summing to one."""
        return np.array([self.q0, self.q1, self.q2, self.q3, self.blocking])

    def require_feasible(self) -> "AttackMix":
        if not self.feasible:
            raise InfeasibleRegimeError("attack mixture is not feasible: " + "; ".join(self.notes))
        return self


@dataclass(frozen=True)
class KeyRateResult:
    mu_opt: float
    r_opt: float
    mu_max: float | None
    i_ae: float
    feasible: bool = True
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)


def decoy_fraction_feasible(p: ProtocolParams) -> bool:
    """Whether the decoy fractions leave ``F1 >= 0`` (USD3 weight non-negative)."""
    if not p.empty_decoy:
        return p.f <= SQRT5_MINUS_2 + 1e-15
    f0, f1 = p.f0, p.f1
    return f1 <= min(0.25, -2 + f0 + math.sqrt(5 - 4 * f0)) + 1e-15


def _usd4b_per_decoy(p: ProtocolParams) -> float:
    """USD4b conclusive probability per full-decoy window (prior ``f1`` removed)."""
    kind = usd_kind_for(AttackKind.USD4B, p.sends_empty_decoys)
    return (p.p_bit + p.f0) ** 2 * usd_conclusive_closed_form(kind, p.mu).conclusive_prob


def mix_coefficients(p: ProtocolParams) -> MixCoefficients:
    f0, f1 = p.f0, p.f1
    p1 = conclusive_prob_weighted(AttackKind.USD3, p)
    p2 = conclusive_prob_weighted(AttackKind.USD4A, p)
    F1 = 3 * (1 - 4 * f1 - (f1 - f0) ** 2) / (4 * p1)
    F2 = (1 - f0 + f1) ** 2 / p2
    # 4 f1 / p3 with the prior f1 cancelled. Without full decoys the
    # decoy-rate condition is void and Eve sets q3 = 0.
    F3 = 4 / _usd4b_per_decoy(p) if f1 > 0 else 0.0
    if p.sends_empty_decoys:
        cal_f = (1 + f1 - f0) ** 2 / (1 - f1 - f0) ** 2 + 4 / (1 - f1 + f0) ** 2
    else:
        cal_f = 9 + 4 * p.f - p.f**2
    return MixCoefficients(F1, F2, F3, cal_f)


def mu_f(p: ProtocolParams) -> float:
    return p.mu * mix_coefficients(p).F


def solve_mix(p: ProtocolParams, strict: bool = False) -> tuple[AttackMix, MixCoefficients]:
    """Closed-form mixture reproducing all six linearised detection rates.

    When ``mu t F < 1`` the plain solution has ``q0 < 0``; Eve then drops the
    lossless branch and blocks the fraction ``1 - mu t F`` of blocks instead.
    With ``strict`` an infeasible decoy fraction raises
    :class:`InfeasibleRegimeError`.
    """
    coeffs = mix_coefficients(p)
    notes = []
    linear = p.mu * p.eta < LINEAR_REGIME_LIMIT
    if not linear:
        notes.append(f"mu*eta = {p.mu * p.eta:.3g} outside the linearised regime")
    if not decoy_fraction_feasible(p):
        msg = "decoy fraction too large for this attack (F1 < 0)"
        if strict:
            raise InfeasibleRegimeError(msg)
        nan = math.nan
        return AttackMix(nan, nan, nan, nan, False, nan, linear, tuple(notes + [msg])), coeffs
    t, F = p.t, coeffs.F
    muF = p.mu * F
    if muF <= 1:
        msg = f"mu F = {muF:.3g} <= 1"
        if strict:
            raise InfeasibleRegimeError(msg)
        nan = math.nan
        return AttackMix(nan, nan, nan, nan, False, nan, linear, tuple(notes + [msg])), coeffs
    if muF * t >= 1:
        q0 = (muF * t - 1) / (muF - 1)
        scale = p.mu * (1 - t) / (muF - 1)
        blocking = 0.0
    else:
        q0 = 0.0
        scale = p.mu * t
        blocking = 1 - muF * t
        notes.append("q0 would be negative; Eve blocks the remainder")
    mix = AttackMix(q0, scale * coeffs.F1, scale * coeffs.F2, scale * coeffs.F3, True, blocking, linear, tuple(notes))
    return mix, coeffs


def mixture_rates(mix: AttackMix, p: ProtocolParams, linear: bool = True) -> DetectionRates:
    """Rates Bob sees under ``mix`` (single-photon forwarding)."""
    base = (honest_rates_linear if linear else honest_rates)(p, 1.0)
    total = base.as_array() * mix.q0
    for q, kind in zip((mix.q1, mix.q2, mix.q3), AttackKind):
        total = total + q * attack_rates(kind, p).as_array()
    return DetectionRates.from_array(total)


def verify_mix_residuals(mix: AttackMix, p: ProtocolParams) -> np.ndarray:
    """Mixture rates minus the honest rates at ``t``, linearised, for all six rates."""
    return mixture_rates(mix, p).as_array() - honest_rates_linear(p).as_array()


def key_rate(p: ProtocolParams, mix: AttackMix) -> float:
    """Upper bound on the secret key rate: only untouched bits are secret."""
    if not mix.feasible or not mix.q0 > 0:
        return 0.0
    return mix.q0 * p.mu * p.tB * p.eta * (1 - p.f)


def _regime_flags(p: ProtocolParams, best, mu_max) -> list[str]:
    flags = []
    if best.at_upper_edge:
        flags.append("mu_opt at upper bracket edge")
    if best.at_lower_edge:
        flags.append("mu_opt at lower bracket edge")
    if best.x * p.eta >= LINEAR_REGIME_LIMIT:
        flags.append("outside linearised regime")
    if mu_max is None:
        flags.append("no mu_max in bracket")
    return flags


def optimize_mu(p: ProtocolParams, bracket=MU_BRACKET) -> KeyRateResult:
    """Maximise the key-rate upper bound over ``mu`` for the full-statistics mixture.

    ``p.mu`` is ignored. ``mu_max`` is the smallest ``mu`` above the optimum
    where ``q0`` vanishes.
    """
    if not decoy_fraction_feasible(p):
        return KeyRateResult(math.nan, math.nan, None, math.nan, False, ("decoy fraction infeasible",))

    def rate(mu):
        q = p.replace(mu=mu)
        return key_rate(q, solve_mix(q)[0])

    def margin(mu):
        return mu_f(p.replace(mu=mu)) * p.t - 1

    best = maximize_log(rate, bracket)
    mu_max = first_root_above(margin, best.x, bracket[1]) if margin(best.x) > 0 else None
    mix = solve_mix(p.replace(mu=best.x))[0]
    i_ae = 1 - mix.q0 / p.t if mix.feasible else math.nan
    return KeyRateResult(best.x, best.value, mu_max, i_ae, True, tuple(_regime_flags(p, best, mu_max)), {"mix": mix})


def mix_asymptotics(p: ProtocolParams) -> dict:
    """Small-``mu`` estimates of ``mu_opt``, ``R(mu_opt)`` and ``mu_max``."""
    t = p.t
    if p.sends_empty_decoys:
        cal_f = mix_coefficients(p).cal_f
        mu_opt = (cal_f * t) ** (1 / 3)
        return {
            "mu_opt": mu_opt,
            "r_opt": 0.75 * cal_f ** (1 / 3) * p.tB * p.eta * (1 - p.f) * t ** (4 / 3),
            "mu_max": 4 ** (1 / 3) * mu_opt,
        }
    mu_opt = 4 * math.sqrt(6) / (3 * (1 - p.f)) * math.sqrt(t)
    return {
        "mu_opt": mu_opt,
        "r_opt": 8 * math.sqrt(6) / 9 * p.tB * p.eta * t**1.5,
        "mu_max": math.sqrt(3) * mu_opt,
    }


def solve_mix_empty_decoy(p: ProtocolParams, strict: bool = False) -> tuple[AttackMix, MixCoefficients]:
    """Mixture for the protocol with empty decoys (``p.empty_decoy`` is forced on)."""
    if not p.empty_decoy:
        p = p.replace(empty_decoy=True)
    return solve_mix(p, strict=strict)


# --- attacks possible when only the average data-line rate is checked ------------


POOR_STATS_KINDS = {"USD3_ONLY": AttackKind.USD3, "USD4A_ONLY": AttackKind.USD4A}


def _poor_kind(kind) -> AttackKind:
    if isinstance(kind, AttackKind):
        if kind is AttackKind.USD4B:
            raise ValueError("USD4b never yields key bits")
        return kind
    key = str(kind).upper()
    if key in POOR_STATS_KINDS:
        return POOR_STATS_KINDS[key]
    return _poor_kind(AttackKind(key))


def poor_stats_fraction(kind, p: ProtocolParams, fw=ForwardingModel.SINGLE_PHOTON) -> tuple[float, float]:
    """Attack probability ``q1`` matching only the total data-line rate.

    Returns ``(q1, margin)`` where ``margin = D_B(t) - D_B(attack)``; a
    non-positive margin means Eve can attack everything and block the excess.
    """
    kind = _poor_kind(kind)
    d_t = honest_rates(p)
    d_1 = honest_rates(p, 1.0)
    d_a = attack_rates(kind, p, fw)
    tot_t = d_t.d_b_bit + d_t.d_b_decoy
    tot_1 = d_1.d_b_bit + d_1.d_b_decoy
    tot_a = d_a.d_b_bit + d_a.d_b_decoy
    margin = tot_t - tot_a
    if margin <= 0 or tot_1 <= tot_a:
        return 1.0, margin
    return (tot_1 - tot_t) / (tot_1 - tot_a), margin


def poor_stats_branches(kind, p: ProtocolParams, fw=ForwardingModel.SINGLE_PHOTON) -> tuple[float, float, float]:
    """``(pass-through, attack, blocked)`` probabilities of the single-strategy attack.

    When the attack alone already undershoots the honest rate, Eve attacks
    every block and blocks just enough of them to match it.
    """
    q1, margin = poor_stats_fraction(kind, p, fw)
    if margin > 0:
        return 1 - q1, q1, 0.0
    d_t = honest_rates(p)
    d_a = attack_rates(_poor_kind(kind), p, fw)
    keep = (d_t.d_b_bit + d_t.d_b_decoy) / (d_a.d_b_bit + d_a.d_b_decoy)
    return 0.0, keep, 1 - keep


def poor_stats_rate(kind, p: ProtocolParams, fw=ForwardingModel.SINGLE_PHOTON) -> float:
    q1, _ = poor_stats_fraction(kind, p, fw)
    return max(0.0, 1 - q1) * honest_rates(p, 1.0).d_b_bit


def poor_stats_constant(kind, p: ProtocolParams, fw=ForwardingModel.SINGLE_PHOTON) -> float:
    """Constant ``C`` of the small-``mu`` solution ``mu_max = C t``."""
    kind = _poor_kind(kind)
    k = 6 if kind is AttackKind.USD3 else 8
    pi = ForwardingModel.parse(fw).detection_prob(p.tB * p.eta)
    return k * (1 + p.f) * p.tB * p.eta / ((1 - p.f) ** 2 * pi)


def poor_stats_attack(kind, p: ProtocolParams, fw=ForwardingModel.SINGLE_PHOTON, bracket=None) -> KeyRateResult:
    """Optimised key rate against a single-strategy attack that only matches ``D_B``.

    The optimum sits near ``mu ~ t``, so the default bracket reaches down to
    ``t / 100`` at long distance.
    """
    fw = ForwardingModel.parse(fw)
    if bracket is None:
        bracket = (min(MU_BRACKET[0], 0.01 * p.t), MU_BRACKET[1])

    def rate(mu):
        return poor_stats_rate(kind, p.replace(mu=mu), fw)

    def margin(mu):
        return poor_stats_fraction(kind, p.replace(mu=mu), fw)[1]

    best = maximize_log(rate, bracket)
    mu_max = first_root_above(margin, best.x, bracket[1]) if margin(best.x) > 0 else None
    q1, _ = poor_stats_fraction(kind, p.replace(mu=best.x), fw)
    flags = _regime_flags(p, best, mu_max)
    return KeyRateResult(best.x, best.value, mu_max, q1, True, tuple(flags), {"q1": q1})
