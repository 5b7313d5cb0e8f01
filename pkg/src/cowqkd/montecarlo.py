"""Monte Carlo simulation of a COW link, optionally with Eve in the channel.

Alice's windows are drawn i.i.d., Eve acts block by block, and Bob's passive
optics are modelled with explicit transfer coefficients: a ``tB`` coupler,
then an unbalanced interferometer with one-slot delay whose outputs at slot
``j`` carry ``(b_j +/- b_{j-1}) / 2``. The factors 1/4 and 1/2 of the
analytic rates are therefore outputs of the simulation, not inputs.

Slot ``2w`` opens window ``w`` and slot ``2w + 1`` closes it. The monitor
slot ``2w + 1`` is the window's ``even`` slot, ``2w`` its ``odd`` one.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .detection import RATE_NAMES, AttackKind, DetectionRates, attack_rates, honest_rates, usd_kind_for
from .mix import AttackMix, poor_stats_branches, solve_mix
from .params import ForwardingModel, InfeasibleRegimeError, InvalidInputError, ProtocolParams
from .states import usd_conclusive_closed_form

BIT0, BIT1, DECOY, EMPTY_DECOY = 0, 1, 2, 3
DEFAULT_BLOCK = 1000
SHARD_WINDOWS = 1_000_000
BRIGHT_PHOTONS = 1e6  # mean photon number of a "bright" forwarded pulse


class Strategy(enum.Enum):
    HONEST = "honest"
    BS = "bs"
    USD3 = "usd3"
    USD4A = "usd4a"
    USD4B = "usd4b"
    MIX = "mix"
    USD3_ONLY = "usd3_only"
    USD4A_ONLY = "usd4a_only"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for member in cls:
            if key == member.value:
                return member
        raise InvalidInputError(f"unknown strategy {value!r}")


class Branch(enum.IntEnum):
    """What Eve does with one block."""

    PASS = 0  # lossless line
    USD3 = 1
    USD4A = 2
    USD4B = 3
    BLOCKED = 4
    CHANNEL = 5  # the ordinary lossy channel (honest or beam splitter)


_ATTACK_OF_BRANCH = {Branch.USD3: AttackKind.USD3, Branch.USD4A: AttackKind.USD4A, Branch.USD4B: AttackKind.USD4B}

# Group layout of each attack inside a block starting at slot 2s:
# (first slot offset, step, target pattern, forwarded mode weights on slots g+1, g+2).
_GROUPS = {
    Branch.USD3: (0, 3, (0, 1, 0), (1.0,)),
    Branch.USD4A: (0, 4, (0, 1, 1, 0), (math.sqrt(0.5), math.sqrt(0.5))),
    Branch.USD4B: (1, 4, (0, 1, 1, 0), (math.sqrt(0.5), math.sqrt(0.5))),
}


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo run.

    Attributes:
        params: Link parameters (``mu``, ``f``, ``f0``, ``tB``, ``eta``, ``t``).
        strategy: What occupies the channel.
        fw: How Eve forwards conclusive results.
        windows: Number of two-slot windows Alice sends.
        seed: Master seed; with the other fields it fixes every random draw.
        block_length: Windows per attack block. The first window and the
            tail of each block are discarded from statistics.
        mix: Mixture for ``Strategy.MIX``; solved from ``params`` if omitted.
        workers: Worker processes; results do not depend on this.
        shard_windows: Approximate windows per independent RNG stream.
    """

    params: ProtocolParams
    strategy: Strategy = Strategy.HONEST
    fw: ForwardingModel = ForwardingModel.SINGLE_PHOTON
    windows: int = 100_000
    seed: int = 0
    block_length: int = DEFAULT_BLOCK
    mix: AttackMix | None = None
    workers: int = 1
    shard_windows: int = SHARD_WINDOWS

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        object.__setattr__(self, "fw", ForwardingModel.parse(self.fw))
        if int(self.windows) < 1:
            raise InvalidInputError(f"windows must be >= 1, got {self.windows}")
        if self.block_length < 10:
            raise InvalidInputError(f"block_length must be >= 10, got {self.block_length}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        if self.workers < 1 or self.shard_windows < 1:
            raise InvalidInputError("workers and shard_windows must be positive")


def branch_probabilities(cfg: SimConfig) -> np.ndarray:
    """Probabilities of each :class:`Branch` per block."""
    probs = np.zeros(len(Branch))
    s = cfg.strategy
    if s in (Strategy.HONEST, Strategy.BS):
        probs[Branch.CHANNEL] = 1
    elif s in (Strategy.USD3, Strategy.USD4A, Strategy.USD4B):
        probs[Branch[s.name]] = 1
    elif s is Strategy.MIX:
        mix = cfg.mix if cfg.mix is not None else solve_mix(cfg.params)[0]
        if not mix.feasible:
            raise InfeasibleRegimeError("attack mixture is infeasible: " + "; ".join(mix.notes))
        probs[: Branch.BLOCKED + 1] = np.clip(mix.branch_probabilities(), 0, None)
    else:
        kind = AttackKind.USD3 if s is Strategy.USD3_ONLY else AttackKind.USD4A
        pas, att, blk = poor_stats_branches(kind, cfg.params, cfg.fw)
        probs[Branch.PASS], probs[Branch[kind.name]], probs[Branch.BLOCKED] = pas, att, blk
    return probs / probs.sum()


# --- simulation pieces ---------------------------------------------------------


def generate_train(p: ProtocolParams, n_windows: int, rng: np.random.Generator):
    """Window labels and the full/empty pattern of each slot."""
    probs = [p.p_bit, p.p_bit, p.f1, p.f0]
    labels = rng.choice(4, size=n_windows, p=probs).astype(np.int8)
    full = np.empty(2 * n_windows, dtype=bool)
    full[0::2] = (labels == BIT0) | (labels == DECOY)
    full[1::2] = (labels == BIT1) | (labels == DECOY)
    return labels, full


def monitor_intensities(amp: np.ndarray, tB: float):
    """Intensities at M1 and M2 per slot for real co-phased amplitudes."""
    b = amp * math.sqrt(1 - tB)
    prev = np.concatenate(([0.0], b[:-1]))
    return (b + prev) ** 2 / 4, (b - prev) ** 2 / 4


def coherent_clicks(amp: np.ndarray, p: ProtocolParams, rng: np.random.Generator):
    """Independent click draws of the three detectors for a coherent train."""
    i_data = p.tB * amp**2
    i_m1, i_m2 = monitor_intensities(amp, p.tB)
    clicks = []
    for intensity in (i_data, i_m1, i_m2):
        prob = -np.expm1(-p.eta * intensity)
        clicks.append(rng.random(amp.size) < prob)
    return clicks


def photon_outcomes(weights, tB: float):
    """Outcome table for one photon in a mode spread over consecutive slots.

    ``weights`` are the mode amplitudes on slots ``1 .. L`` relative to a
    reference slot. Returns ``(detector, slot, probability)`` arrays with
    detector 0 = data line, 1 = M1, 2 = M2; probabilities sum to one.
    """
    m = np.concatenate(([0.0], np.asarray(weights, float), [0.0]))
    det, slot, prob = [], [], []
    for j in range(1, len(weights) + 1):
        det.append(0), slot.append(j), prob.append(tB * m[j] ** 2)
    for j in range(1, len(weights) + 2):
        for d, sign in ((1, 1), (2, -1)):
            det.append(d), slot.append(j), prob.append((1 - tB) * (m[j] + sign * m[j - 1]) ** 2 / 4)
    return np.array(det), np.array(slot), np.array(prob)


def _block_layout(first_window: int, n_windows: int, block_length: int):
    """Block start windows and lengths for the windows ``[first, first + n)``."""
    starts = np.arange(0, n_windows, block_length)
    lengths = np.minimum(block_length, n_windows - starts)
    return starts, lengths


def kept_windows(n_windows: int, block_length: int) -> np.ndarray:
    """Windows that enter the statistics.

    In each block the first window and a tail are dropped so that counted
    windows never see light from a neighbouring block and span a whole
    number of attack periods (six windows).
    """
    starts, lengths = _block_layout(0, n_windows, block_length)
    keep = np.zeros(n_windows, dtype=bool)
    for s, n in zip(starts, lengths):
        m = 6 * ((n - 4) // 6) if n >= 10 else 0
        keep[s + 1 : s + 1 + m] = True
    return keep


@dataclass
class SimCounts:
    """Integer tallies of one or more shards; merged by addition."""

    windows: int = 0
    counted_windows: int = 0
    d_b_bit: int = 0
    d_b_decoy: int = 0
    d_m1_even: int = 0
    d_m2_even: int = 0
    d_m1_odd: int = 0
    d_m2_odd: int = 0
    decoy_m1: int = 0
    decoy_m2: int = 0
    ten_m1: int = 0
    ten_m2: int = 0
    bit_clicks: int = 0
    bit_errors: int = 0
    decoys_detected: int = 0
    decoys_flanked_empty: int = 0
    eve_known_bit_clicks: int = 0
    counted_blocks: int = 0
    block_n_sq: int = 0  # sum over blocks of (counted windows)^2
    rate_block_sq: list = field(default_factory=lambda: [0] * len(RATE_NAMES))
    rate_block_xn: list = field(default_factory=lambda: [0] * len(RATE_NAMES))
    blocks: list = field(default_factory=lambda: [0] * len(Branch))
    groups_on_target: list = field(default_factory=lambda: [0, 0, 0])
    groups_conclusive: list = field(default_factory=lambda: [0, 0, 0])

    def __add__(self, other: "SimCounts") -> "SimCounts":
        out = SimCounts()
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            setattr(out, f.name, [x + y for x, y in zip(a, b)] if isinstance(a, list) else a + b)
        return out


def _place_attack(branch, block_starts, block_lengths, full, p, fw, rng, counts, amp):
    """Run one USD attack on the given blocks; returns forwarded single photons."""
    off, step, pattern, weights = _GROUPS[branch]
    kind = _ATTACK_OF_BRANCH[branch]
    size = len(pattern)
    starts = []
    for s, n in zip(block_starts, block_lengths):
        first = 2 * s + off
        k = (2 * n - off) // step
        starts.append(first + step * np.arange(k))
    g = np.concatenate(starts) if starts else np.zeros(0, dtype=np.int64)
    u = rng.random(g.size)
    if g.size == 0:
        return g, weights
    on_target = np.ones(g.size, dtype=bool)
    for i, want in enumerate(pattern):
        on_target &= full[g + i] == bool(want)
    pc = usd_conclusive_closed_form(usd_kind_for(kind, p.sends_empty_decoys), p.mu).conclusive_prob
    hit = g[on_target & (u < pc)]
    idx = list(_ATTACK_OF_BRANCH).index(branch)
    counts.groups_on_target[idx] += int(on_target.sum())
    counts.groups_conclusive[idx] += int(hit.size)
    if fw is ForwardingModel.BRIGHT_PULSE:
        for j, w in enumerate(weights, start=1):
            amp[hit + j] = math.sqrt(BRIGHT_PHOTONS) * w
        return np.zeros(0, dtype=np.int64), weights
    return hit, weights


def _photon_clicks(refs, weights, p, rng, clicks):
    det, slot, prob = photon_outcomes(weights, p.tB)
    cum = np.cumsum(prob) * p.eta
    choice = np.searchsorted(cum, rng.random(refs.size), side="right")
    ok = choice < len(prob)
    for d in range(3):
        sel = ok & (det[np.minimum(choice, len(prob) - 1)] == d)
        target = refs[sel] + slot[choice[sel]]
        target = target[target < clicks[d].size]
        clicks[d][target] = True


def simulate_shard(cfg: SimConfig, shard: int, n_windows: int) -> SimCounts:
    """Simulate ``n_windows`` windows on the RNG stream ``(seed, shard)``."""
    p = cfg.params
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(cfg.seed), shard])))
    labels, full = generate_train(p, n_windows, rng)
    block_starts, block_lengths = _block_layout(0, n_windows, cfg.block_length)
    probs = branch_probabilities(cfg)
    branches = rng.choice(len(Branch), size=block_starts.size, p=probs)

    counts = SimCounts(windows=n_windows)
    for b in branches:
        counts.blocks[b] += 1
    win_branch = np.repeat(branches, block_lengths)
    slot_branch = np.repeat(win_branch, 2)

    amp = np.zeros(2 * n_windows)
    amp[full & (slot_branch == Branch.CHANNEL)] = math.sqrt(p.mu * p.t)
    amp[full & (slot_branch == Branch.PASS)] = math.sqrt(p.mu)
    photons = []
    for br in (Branch.USD3, Branch.USD4A, Branch.USD4B):
        sel = branches == br
        refs, weights = _place_attack(br, block_starts[sel], block_lengths[sel], full, p, cfg.fw, rng, counts, amp)
        photons.append((refs, weights))

    clicks = coherent_clicks(amp, p, rng)
    for refs, weights in photons:
        if refs.size:
            _photon_clicks(refs, weights, p, rng, clicks)

    _accumulate(counts, labels, clicks, win_branch, cfg.block_length)
    return counts


def _accumulate(counts: SimCounts, labels, clicks, win_branch, block_length):
    data, m1, m2 = clicks
    n = labels.size
    keep = kept_windows(n, block_length)
    counts.counted_windows += int(keep.sum())
    d_first, d_second = data[0::2], data[1::2]
    d_win = d_first.astype(np.int64) + d_second
    is_bit = (labels == BIT0) | (labels == BIT1)
    is_decoy = labels == DECOY
    per_window = (
        d_win * is_bit,
        d_win * is_decoy,
        m1[1::2],
        m2[1::2],
        m1[0::2],
        m2[0::2],
    )
    block = np.arange(n) // block_length
    n_blocks = int(block[-1]) + 1
    kept_per_block = np.bincount(block[keep], minlength=n_blocks)
    counted = kept_per_block > 0
    counts.counted_blocks += int(counted.sum())
    counts.block_n_sq += int((kept_per_block**2).sum())
    for i, (name, x) in enumerate(zip(RATE_NAMES, per_window)):
        xb = np.bincount(block[keep], weights=x[keep], minlength=n_blocks).astype(np.int64)
        setattr(counts, name, getattr(counts, name) + int(xb.sum()))
        counts.rate_block_sq[i] += int((xb**2).sum())
        counts.rate_block_xn[i] += int((xb * kept_per_block).sum())

    counts.decoy_m1 += int(m1[1::2][keep & is_decoy].sum())
    counts.decoy_m2 += int(m2[1::2][keep & is_decoy].sum())
    prev = np.concatenate(([-1], labels[:-1]))
    nxt = np.concatenate((labels[1:], [-1]))
    ten = keep & (prev == BIT1) & (labels == BIT0)
    counts.ten_m1 += int(m1[0::2][ten].sum())
    counts.ten_m2 += int(m2[0::2][ten].sum())

    wrong = np.where(labels == BIT0, d_second, d_first)
    counts.bit_clicks += int(d_win[keep & is_bit].sum())
    counts.bit_errors += int(wrong[keep & is_bit].sum())

    detected_decoy = keep & is_decoy & (d_win > 0)
    # Slots adjacent to the decoy are empty when the previous window closes
    # empty and the next one opens empty.
    flanked = np.isin(prev, (BIT0, EMPTY_DECOY)) & np.isin(nxt, (BIT1, EMPTY_DECOY))
    counts.decoys_detected += int(detected_decoy.sum())
    counts.decoys_flanked_empty += int((detected_decoy & flanked).sum())

    attacked = np.isin(win_branch, (Branch.USD3, Branch.USD4A, Branch.USD4B))
    counts.eve_known_bit_clicks += int(d_win[keep & is_bit & attacked].sum())


# --- statistics -----------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    count: int

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "count": self.count}


def _fraction(k: int, n: int) -> Estimate | None:
    if n == 0:
        return None
    v = k / n
    return Estimate(v, math.sqrt(v * (1 - v) / n), k)


def _batch_stderr(k: int, n: int, sq: int, xn: int, c: "SimCounts") -> float:
    """Standard error of a ratio estimate from per-block totals (batch means).

    Blocks are independent, so this captures both counting noise and the
    extra spread from Eve choosing a strategy per block.
    """
    m = c.counted_blocks
    if m < 2:
        return math.sqrt(max(k / n * (1 - k / n), 0.0) / n)
    r = k / n
    ss = sq - 2 * r * xn + r * r * c.block_n_sq
    return math.sqrt(max(ss, 0.0) * m / (m - 1)) / n


def _visibility(n1: int, n2: int) -> Estimate | None:
    n = n1 + n2
    if n == 0:
        return None
    q = n1 / n
    return Estimate(2 * q - 1, 2 * math.sqrt(q * (1 - q) / n), n)


@dataclass(frozen=True)
class SimStats:
    config: SimConfig
    counts: SimCounts
    rates: dict
    visibility_decoy: Estimate | None
    visibility_10: Estimate | None
    qber: Estimate | None
    decoy_neighbor_bias: Estimate | None

    @classmethod
    def from_counts(cls, cfg: SimConfig, c: SimCounts) -> "SimStats":
        n = c.counted_windows
        rates = {}
        for i, name in enumerate(RATE_NAMES):
            k = getattr(c, name)
            if not n:
                rates[name] = Estimate(math.nan, math.nan, k)
                continue
            rates[name] = Estimate(k / n, _batch_stderr(k, n, c.rate_block_sq[i], c.rate_block_xn[i], c), k)
        return cls(
            cfg,
            c,
            rates,
            _visibility(c.decoy_m1, c.decoy_m2),
            _visibility(c.ten_m1, c.ten_m2),
            _fraction(c.bit_errors, c.bit_clicks),
            _fraction(c.decoys_flanked_empty, c.decoys_detected),
        )

    def rate_vector(self) -> DetectionRates:
        return DetectionRates(*(self.rates[n].value for n in RATE_NAMES))

    def to_dict(self) -> dict:
        cfg, c = self.config, self.counts
        opt = lambda e: None if e is None else e.to_dict()  # noqa: E731
        out = {name: self.rates[name].to_dict() for name in RATE_NAMES}
        out.update(
            visibility_decoy=opt(self.visibility_decoy),
            visibility_10=opt(self.visibility_10),
            qber=opt(self.qber),
            decoy_neighbor_bias=opt(self.decoy_neighbor_bias),
            seed=int(cfg.seed),
            windows=int(cfg.windows),
            counted_windows=c.counted_windows,
            strategy=cfg.strategy.value,
            forwarding=cfg.fw.value,
            block_length=cfg.block_length,
            block_structure={b.name.lower(): c.blocks[b] for b in Branch},
            eve={
                "groups_on_target": dict(zip(("usd3", "usd4a", "usd4b"), c.groups_on_target)),
                "groups_conclusive": dict(zip(("usd3", "usd4a", "usd4b"), c.groups_conclusive)),
                "known_bit_clicks": c.eve_known_bit_clicks,
                "split_fraction": 1 - cfg.params.t if cfg.strategy is Strategy.BS else 0.0,
            },
            provenance={"params": cfg.params.to_dict(), "version": __version__},
        )
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _shard_sizes(cfg: SimConfig) -> list[int]:
    per = max(1, cfg.shard_windows // cfg.block_length) * cfg.block_length
    n = int(cfg.windows)
    return [min(per, n - s) for s in range(0, n, per)]


def _run_shard(args):
    cfg, shard, n = args
    return simulate_shard(cfg, shard, n)


def simulate(cfg: SimConfig) -> SimStats:
    """Run all shards (possibly in parallel) and merge their tallies."""
    branch_probabilities(cfg)  # rejects an infeasible mixture before any work
    jobs = [(cfg, i, n) for i, n in enumerate(_shard_sizes(cfg))]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_shard, jobs))
    else:
        parts = [_run_shard(j) for j in jobs]
    total = SimCounts()
    for part in parts:
        total = total + part
    return SimStats.from_counts(cfg, total)


# --- analytic references -----------------------------------------------------------


def expected_rates(cfg: SimConfig) -> DetectionRates:
    """Rates the simulation should reproduce on average for its own branch mix."""
    p = cfg.params
    probs = branch_probabilities(cfg)
    total = np.zeros(len(RATE_NAMES))
    total += probs[Branch.CHANNEL] * honest_rates(p).as_array()
    total += probs[Branch.PASS] * honest_rates(p, 1.0).as_array()
    for br, kind in _ATTACK_OF_BRANCH.items():
        if probs[br] > 0:
            total += probs[br] * attack_rates(kind, p, cfg.fw).as_array()
    return DetectionRates.from_array(total)


def reference_rates(cfg: SimConfig) -> DetectionRates:
    """Rates a run is compared against.

    The full mixture is meant to look like the honest lossy line, so it is
    compared with the honest rates; every other strategy with its own
    expectation.
    """
    if cfg.strategy is Strategy.MIX:
        return honest_rates(cfg.params)
    return expected_rates(cfg)


def honest_neighbor_fraction(p: ProtocolParams) -> float:
    """Share of decoys flanked by empty slots when nobody interferes."""
    return (p.p_bit + p.f0) ** 2


def z_score(empirical: float, analytic: float, n: int, stderr: float = 0.0) -> float:
    """z-score against the analytic value.

    The scale is the larger of the binomial error implied by ``analytic``
    and the measured ``stderr``. Exact zeros on both sides give 0; a
    violation of a zero expectation gives ``inf``.
    """
    var = max(analytic * (1 - analytic) / n if n else 0.0, stderr**2)
    if var <= 0:
        return 0.0 if empirical == analytic else math.inf
    return (empirical - analytic) / math.sqrt(var)


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    value: float
    analytic: float
    z: float


def compare(stats: SimStats, reference: DetectionRates | None = None) -> list[ComparisonRow]:
    """Per-rate comparison table, plus the decoy-neighbour diagnostic."""
    ref = reference if reference is not None else reference_rates(stats.config)
    n = stats.counts.counted_windows
    rows = []
    for name in RATE_NAMES:
        v, a = stats.rates[name].value, getattr(ref, name)
        rows.append(ComparisonRow(name, v, a, z_score(v, a, n, stats.rates[name].stderr)))
    bias = stats.decoy_neighbor_bias
    honest = honest_neighbor_fraction(stats.config.params)
    if bias is not None:
        rows.append(ComparisonRow("decoy_neighbor_bias", bias.value, honest, z_score(bias.value, honest, bias.count)))
    else:
        rows.append(ComparisonRow("decoy_neighbor_bias", math.nan, honest, math.nan))
    return rows
