"""Named key-rate curves and parameter scans over distance, ``mu`` or ``f``."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bounds import bs_attack, pns_rate, three_state_pns_zero_error, three_state_wcp
from .mix import key_rate, optimize_mu, poor_stats_attack, poor_stats_rate, solve_mix
from .optimize import MU_BRACKET, first_root_above, maximize_log
from .params import ForwardingModel, InvalidInputError, ProtocolParams

CURVES = ("MIX", "MIX_ED", "BS", "USD3_ONLY", "USD4A_ONLY", "PNS_3STATE", "THREE_STATE_SP")


class ScanVariable(enum.Enum):
    LENGTH_KM = "length_km"
    MU = "mu"
    F = "f"

    @classmethod
    def parse(cls, value) -> "ScanVariable":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise InvalidInputError(f"unknown scan variable {value!r}")


@dataclass(frozen=True)
class CurvePoint:
    curve: str
    mu_opt: float
    r: float
    mu_max: float | None
    feasible: bool
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "curve": self.curve,
            "mu_opt": self.mu_opt,
            "r": self.r,
            "mu_max": self.mu_max,
            "feasible": self.feasible,
            "flags": list(self.flags),
        }


def parse_curves(names) -> tuple[str, ...]:
    if isinstance(names, str):
        names = [n for n in names.replace(";", ",").split(",") if n.strip()]
    out = []
    for n in names:
        key = n.strip().upper().replace("-", "_")
        if key not in CURVES:
            raise InvalidInputError(f"unknown curve {n!r}; choose from {', '.join(CURVES)}")
        out.append(key)
    if not out:
        raise InvalidInputError("at least one curve is required")
    return tuple(out)


def standard_params(p: ProtocolParams) -> ProtocolParams:
    return p.replace(f0=0.0, empty_decoy=False)


def empty_decoy_params(p: ProtocolParams) -> ProtocolParams:
    """Empty-decoy variant; without an explicit ``f0`` the decoys split evenly."""
    if p.empty_decoy:
        return p
    return p.replace(empty_decoy=True, f0=p.f / 2)


def _bs_point(p: ProtocolParams) -> CurvePoint:
    best = maximize_log(lambda mu: bs_attack(p.replace(mu=mu)).rate, MU_BRACKET)
    flags = ("mu_opt at upper bracket edge",) if best.at_upper_edge else ()
    return CurvePoint("BS", best.x, best.value, None, True, flags)


def _three_state_point(p: ProtocolParams) -> CurvePoint:
    def per_bit(mu):
        return three_state_wcp(p.replace(mu=mu)).per_bit

    best = maximize_log(lambda mu: three_state_wcp(p.replace(mu=mu)).rate, MU_BRACKET)
    mu_max = first_root_above(per_bit, best.x, MU_BRACKET[1]) if per_bit(best.x) > 0 else None
    return CurvePoint("THREE_STATE_SP", best.x, best.value, mu_max, best.value > 0)


def evaluate_curve(name: str, p: ProtocolParams, fw=ForwardingModel.SINGLE_PHOTON) -> CurvePoint:
    """Optimal ``mu`` and rate of one named curve; ``p.mu`` is ignored."""
    (name,) = parse_curves([name])
    if name in ("MIX", "MIX_ED"):
        q = standard_params(p) if name == "MIX" else empty_decoy_params(p)
        res = optimize_mu(q)
        return CurvePoint(name, res.mu_opt, res.r_opt, res.mu_max, res.feasible, res.flags)
    if name == "BS":
        return _bs_point(standard_params(p))
    if name in ("USD3_ONLY", "USD4A_ONLY"):
        res = poor_stats_attack(name, standard_params(p), fw)
        return CurvePoint(name, res.mu_opt, res.r_opt, res.mu_max, True, res.flags)
    if name == "PNS_3STATE":
        res = three_state_pns_zero_error(p)
        return CurvePoint(name, res.mu_opt, res.rate, 2 * p.t, True)
    return _three_state_point(standard_params(p))


def rate_at_mu(name: str, p: ProtocolParams, fw=ForwardingModel.SINGLE_PHOTON) -> CurvePoint:
    """Rate of one named curve at the given ``p.mu`` (no optimisation)."""
    (name,) = parse_curves([name])
    nan = math.nan
    if name in ("MIX", "MIX_ED"):
        q = standard_params(p) if name == "MIX" else empty_decoy_params(p)
        mix = solve_mix(q)[0]
        return CurvePoint(name, nan, key_rate(q, mix), None, mix.feasible)
    if name == "BS":
        return CurvePoint(name, nan, bs_attack(standard_params(p)).rate, None, True)
    if name in ("USD3_ONLY", "USD4A_ONLY"):
        return CurvePoint(name, nan, poor_stats_rate(name, standard_params(p), fw), None, True)
    if name == "PNS_3STATE":
        return CurvePoint(name, nan, pns_rate(p), None, True)
    return CurvePoint(name, nan, three_state_wcp(standard_params(p)).rate, None, True)


def crossover_length(curve_a: str, curve_b: str, p: ProtocolParams, lo: float, hi: float,
                     fw=ForwardingModel.SINGLE_PHOTON) -> float:
    """Distance in ``[lo, hi]`` where the optimal rates of two curves cross."""

    def log_ratio(length):
        q = p.replace(length_km=length, transmission=None)
        ra = evaluate_curve(curve_a, q, fw).r
        rb = evaluate_curve(curve_b, q, fw).r
        return math.log(ra) - math.log(rb)

    return float(brentq(log_ratio, lo, hi, xtol=1e-3))


@dataclass(frozen=True)
class ScanSpec:
    variable: ScanVariable
    start: float
    stop: float
    steps: int
    fixed: ProtocolParams = field(default_factory=ProtocolParams)
    curves: tuple[str, ...] = ("MIX", "BS")
    fw: ForwardingModel = ForwardingModel.SINGLE_PHOTON

    def __post_init__(self):
        object.__setattr__(self, "variable", ScanVariable.parse(self.variable))
        object.__setattr__(self, "curves", parse_curves(self.curves))
        object.__setattr__(self, "fw", ForwardingModel.parse(self.fw))
        if int(self.steps) < 2:
            raise InvalidInputError(f"a scan needs at least 2 steps, got {self.steps}")
        if not self.start < self.stop:
            raise InvalidInputError(f"scan start must be below stop ({self.start} >= {self.stop})")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, int(self.steps))

    def columns(self) -> list[str]:
        cols = [self.variable.value, "t"]
        for c in self.curves:
            cols += [f"{c}_mu_opt", f"{c}_r", f"{c}_mu_max", f"{c}_feasible"]
        cols += [name for name, _ in self._envelopes()]
        return cols

    def _envelopes(self):
        env = []
        if "MIX" in self.curves and "BS" in self.curves:
            env.append(("MIN_MIX_BS_r", ("MIX", "BS")))
        if "MIX_ED" in self.curves and "BS" in self.curves:
            env.append(("MIN_MIX_ED_BS_r", ("MIX_ED", "BS")))
        return env


def _scan_row(args) -> dict:
    spec, x = args
    var = spec.variable
    p = spec.fixed.replace(**{var.value: float(x)})
    if var is ScanVariable.LENGTH_KM:
        p = p.replace(transmission=None)
    row = {var.value: float(x), "t": p.t}
    points = {}
    for c in spec.curves:
        pt = rate_at_mu(c, p, spec.fw) if var is ScanVariable.MU else evaluate_curve(c, p, spec.fw)
        points[c] = pt
        row[f"{c}_mu_opt"] = pt.mu_opt
        row[f"{c}_r"] = pt.r
        row[f"{c}_mu_max"] = math.nan if pt.mu_max is None else pt.mu_max
        row[f"{c}_feasible"] = pt.feasible
    for name, members in spec._envelopes():
        vals = [points[m].r for m in members if points[m].feasible and math.isfinite(points[m].r)]
        row[name] = min(vals) if vals else math.nan
    return row


def run_scan(spec: ScanSpec, workers: int = 1) -> list[dict]:
    """Evaluate every grid point; rows come back in grid order."""
    jobs = [(spec, x) for x in spec.grid()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_row, jobs))
    return [_scan_row(j) for j in jobs]
