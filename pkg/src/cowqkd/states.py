"""Overlap algebra of multi-pulse product coherent states.

A pulse train is a product of single-slot coherent states, each either the
vacuum or ``|alpha>`` with a common phase. Two trains then overlap by
``chi**d`` where ``chi = exp(-mu/2)`` and ``d`` is their Hamming distance, so
every unambiguous-discrimination question reduces to Gram-matrix algebra.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .params import InvalidInputError

EMPTY, FULL = False, True

# Two-slot windows Alice can send, in time order.
STANDARD_WINDOWS = ((FULL, EMPTY), (EMPTY, FULL), (FULL, FULL))
EMPTY_DECOY_WINDOWS = STANDARD_WINDOWS + ((EMPTY, EMPTY),)

GRAM_EIGEN_FLOOR = 1e-12


class LinearDependenceError(ValueError):
    """The target state lies in the span of the alternatives; USD is impossible."""


class UsdKind(enum.Enum):
    USD3 = "USD3"
    USD4A = "USD4A"
    USD4B = "USD4B"
    USD3_ED = "USD3_ED"
    USD4_ED = "USD4_ED"


class UsdMethod(enum.Enum):
    CLOSED_FORM = "closed_form"
    GRAM_ORACLE = "gram_oracle"


@dataclass(frozen=True)
class PulseSequence:
    """A finite train of empty/full pulses.

    ``offset`` fixes where bit windows sit: slot ``i`` opens a window iff
    ``(i - offset) % 2 == 0``.
    """

    symbols: tuple[bool, ...]
    offset: int = 0

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise InvalidInputError("a pulse sequence needs at least one slot")
        if self.offset not in (0, 1):
            raise InvalidInputError(f"offset must be 0 or 1, got {self.offset}")
        object.__setattr__(self, "symbols", tuple(bool(s) for s in self.symbols))

    @classmethod
    def parse(cls, text: str, offset: int | None = None) -> "PulseSequence":
        """Build from a string such as ``"0a:a0"``.

        ``0`` is an empty slot, ``a`` (or ``α``) a full one and ``:`` a bit
        separation. Without any separator the offset defaults to 0.
        """
        symbols = []
        first_sep = None
        for ch in text.replace(" ", ""):
            if ch == ":":
                if first_sep is None:
                    first_sep = len(symbols)
                continue
            if ch == "0":
                symbols.append(EMPTY)
            elif ch in "aAα":
                symbols.append(FULL)
            else:
                raise InvalidInputError(f"unexpected symbol {ch!r} in {text!r}")
        if offset is None:
            offset = first_sep % 2 if first_sep is not None else 0
        return cls(tuple(symbols), offset)

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        out = []
        for i, s in enumerate(self.symbols):
            if i > 0 and (i - self.offset) % 2 == 0:
                out.append(":")
            out.append("a" if s else "0")
        return "".join(out)


@dataclass(frozen=True)
class StateSet:
    """A target sequence and the alternatives it must be told apart from."""

    target: PulseSequence
    alternatives: tuple[PulseSequence, ...]

    def __post_init__(self):
        alts = tuple(self.alternatives)
        object.__setattr__(self, "alternatives", alts)
        n = len(self.target)
        if any(len(a) != n for a in alts):
            raise InvalidInputError("all sequences in a state set must have the same length")
        keys = [a.symbols for a in alts]
        if self.target.symbols in keys:
            raise InvalidInputError("target must not appear among the alternatives")
        if len(set(keys)) != len(keys):
            raise InvalidInputError("alternatives must be distinct")

    @property
    def members(self) -> tuple[PulseSequence, ...]:
        return (self.target,) + self.alternatives


@dataclass(frozen=True)
class UsdResult:
    conclusive_prob: float
    method: UsdMethod


def _chi(mu: float) -> float:
    if not mu > 0:
        raise InvalidInputError(f"mu must be positive, got {mu}")
    return math.exp(-mu / 2.0)


def overlap(a: PulseSequence, b: PulseSequence, mu: float) -> float:
    """Inner product of two pulse trains with mean photon number ``mu`` per full slot."""
    if len(a) != len(b):
        raise InvalidInputError(f"length mismatch: {len(a)} vs {len(b)}")
    d = sum(x != y for x, y in zip(a.symbols, b.symbols))
    return _chi(mu) ** d


def gram_matrix(states: StateSet, mu: float) -> np.ndarray:
    members = np.array([m.symbols for m in states.members], dtype=bool)
    # Pairwise Hamming distances.
    d = (members[:, None, :] != members[None, :, :]).sum(axis=2)
    return _chi(mu) ** d


def usd_conclusive_oracle(states: StateSet, mu: float, floor: float = GRAM_EIGEN_FLOOR) -> UsdResult:
    """Optimal two-outcome USD of the target via Gram-matrix inversion.

    For normalised states the probability of identifying the target is
    ``1 / (G^-1)[t, t]``.
    """
    g = gram_matrix(states, mu)
    eig_min = np.linalg.eigvalsh(g)[0]
    if eig_min <= floor:
        raise LinearDependenceError(
            f"Gram matrix is singular (smallest eigenvalue {eig_min:.3e}); "
            "the target cannot be discriminated unambiguously"
        )
    e0 = np.zeros(len(g))
    e0[0] = 1.0
    # Cholesky keeps the solve symmetric and stable for these well-posed Gram matrices.
    c = np.linalg.cholesky(g)
    y = np.linalg.solve(c, e0)
    inv_tt = float(y @ y)
    return UsdResult(min(1.0, 1.0 / inv_tt), UsdMethod.GRAM_ORACLE)


def usd_conclusive_closed_form(kind: UsdKind | str, mu: float) -> UsdResult:
    kind = UsdKind(kind)
    c2 = _chi(mu) ** 2
    if kind in (UsdKind.USD3, UsdKind.USD4A):
        p = (1 - c2) ** 2
    elif kind is UsdKind.USD4B:
        p = (1 - c2) ** 3 / (1 + c2)
    elif kind is UsdKind.USD3_ED:
        p = (1 - c2) ** 3
    else:
        p = (1 - c2) ** 4
    return UsdResult(p, UsdMethod.CLOSED_FORM)


def possible_sequences(length: int, offset: int, windows=STANDARD_WINDOWS) -> list[tuple[bool, ...]]:
    """All slot patterns of the given length that Alice can emit.

    Partial windows at either edge take whatever halves the allowed windows
    provide.
    """
    # Window index of each slot; slot 0 sits in window -1 when offset == 1.
    win_of = [(i - offset) // 2 for i in range(length)]
    first, last = win_of[0], win_of[-1]
    seen = []
    for combo in itertools.product(windows, repeat=last - first + 1):
        seq = tuple(combo[win_of[i] - first][(i - offset) % 2] for i in range(length))
        if seq not in seen:
            seen.append(seq)
    return seen


_TARGETS = {
    UsdKind.USD3: ("0a0", STANDARD_WINDOWS),
    UsdKind.USD4A: ("0a:a0", STANDARD_WINDOWS),
    UsdKind.USD4B: ("0:aa:0", STANDARD_WINDOWS),
    UsdKind.USD3_ED: ("0a0", EMPTY_DECOY_WINDOWS),
    UsdKind.USD4_ED: ("0:aa:0", EMPTY_DECOY_WINDOWS),
}


def build_state_set(kind: UsdKind | str, offset: int | None = None) -> StateSet:
    """Target and alternatives for one of the standard USD attacks.

    ``offset`` only matters for the three-pulse attacks, where Eve knows on
    which side of the central full pulse the bit separation lies; both
    choices give the same conclusive probability.
    """
    kind = UsdKind(kind)
    text, windows = _TARGETS[kind]
    target = PulseSequence.parse(text)
    if offset is not None:
        if kind not in (UsdKind.USD3, UsdKind.USD3_ED):
            raise InvalidInputError(f"{kind.value} has a fixed bit alignment")
        target = PulseSequence(target.symbols, offset)
    elif kind in (UsdKind.USD3, UsdKind.USD3_ED):
        target = PulseSequence(target.symbols, 1)
    alts = [
        PulseSequence(seq, target.offset)
        for seq in possible_sequences(len(target), target.offset, windows)
        if seq != target.symbols
    ]
    return StateSet(target, tuple(alts))
