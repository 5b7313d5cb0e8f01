"""Protocol parameters and Eve's forwarding model."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass


class InvalidInputError(ValueError):
    """Raised when parameters or inputs fall outside their valid domain."""


class InfeasibleRegimeError(ValueError):
    """Raised when an attack or bound cannot be realised for the given parameters."""


class ForwardingModel(enum.Enum):
    """What Eve resends after a conclusive USD outcome."""

    SINGLE_PHOTON = "photon"
    BRIGHT_PULSE = "bright"

    def detection_prob(self, p):
        """Detection probability of Eve's forwarded state for single-photon efficiency ``p``.

        A single photon is detected with probability ``p``; a bright pulse
        fires any detector that receives a non-zero share of the light.
        """
        if self is ForwardingModel.SINGLE_PHOTON:
            return p
        return 1.0 if p > 0 else 0.0

    @classmethod
    def parse(cls, value: str | "ForwardingModel") -> "ForwardingModel":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise InvalidInputError(f"unknown forwarding model {value!r}")


@dataclass(frozen=True)
class ProtocolParams:
    """Physical and protocol constants of a COW link.

    Attributes:
        mu: Mean photon number of a non-empty pulse.
        f: Total decoy fraction. In empty-decoy mode this is ``f0 + f1``.
        tB: Fraction of Bob's light sent to the data line.
        eta: Detector efficiency (trusted, never attributed to Eve).
        alpha_att: Fibre attenuation in dB/km.
        length_km: Alice-Bob distance.
        f0: Fraction of empty decoy sequences ``|00>``; only allowed when
            ``empty_decoy`` is set.
        empty_decoy: Whether Alice's protocol includes empty decoys, which
            enlarges the set of states Eve has to discriminate against.
        transmission: Optional explicit channel transmission overriding
            ``alpha_att`` and ``length_km``.
    """

    mu: float = 0.1
    f: float = 0.1
    tB: float = 0.99
    eta: float = 0.1
    alpha_att: float = 0.25
    length_km: float = 0.0
    f0: float = 0.0
    empty_decoy: bool = False
    transmission: float | None = None

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidInputError(f"mu must be positive, got {self.mu}")
        if not 0.0 <= self.f <= 1.0:
            raise InvalidInputError(f"f must lie in [0, 1], got {self.f}")
        if not 0.0 < self.tB <= 1.0:
            raise InvalidInputError(f"tB must lie in (0, 1], got {self.tB}")
        if not 0.0 < self.eta <= 1.0:
            raise InvalidInputError(f"eta must lie in (0, 1], got {self.eta}")
        if self.alpha_att < 0 or self.length_km < 0:
            raise InvalidInputError("attenuation and length must be non-negative")
        if self.f0 < 0 or self.f0 > self.f:
            raise InvalidInputError(f"f0 must lie in [0, f], got f0={self.f0}, f={self.f}")
        if self.f0 > 0 and not self.empty_decoy:
            raise InvalidInputError("f0 > 0 requires empty_decoy=True")
        if self.transmission is not None and not 0.0 < self.transmission <= 1.0:
            raise InvalidInputError(f"transmission must lie in (0, 1], got {self.transmission}")

    @property
    def t(self) -> float:
        """Channel transmission."""
        if self.transmission is not None:
            return self.transmission
        return 10.0 ** (-self.alpha_att * self.length_km / 10.0)

    @property
    def f1(self) -> float:
        """Fraction of full decoy sequences ``|aa>``."""
        return self.f - self.f0

    @property
    def p_bit(self) -> float:
        """Prior of each logical bit value."""
        return (1.0 - self.f) / 2.0

    @property
    def sends_empty_decoys(self) -> bool:
        """Whether ``|00>`` windows actually occur, enlarging Eve's state sets."""
        return self.empty_decoy and self.f0 > 0

    def replace(self, **changes) -> "ProtocolParams":
        return dataclasses.replace(self, **changes)

    def with_transmission(self, t: float) -> "ProtocolParams":
        return dataclasses.replace(self, transmission=t)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["t"] = self.t
        return d


def transmission_from_length(length_km: float, alpha_att: float = 0.25) -> float:
    return 10.0 ** (-alpha_att * length_km / 10.0)


def length_from_transmission(t: float, alpha_att: float = 0.25) -> float:
    return -10.0 * math.log10(t) / alpha_att
