"""Security analysis toolkit for the coherent one-way (COW) QKD protocol.

Submodules:
    states: overlap algebra of pulse trains and unambiguous discrimination.
    detection: honest and attacked detection rates.
    mix: the attack mixture reproducing all rates and the resulting key rates.
    bounds: beam-splitting and three-state reference bounds.
    montecarlo: first-principles simulation of Alice, Eve and Bob.
    curves: named key-rate curves and parameter scans.
    cli: command-line front end.
"""

__version__ = "0.1.0"

from .params import (  # noqa: E402
    ForwardingModel,
    InfeasibleRegimeError,
    InvalidInputError,
    ProtocolParams,
    length_from_transmission,
    transmission_from_length,
)

__all__ = [
    "ForwardingModel",
    "InfeasibleRegimeError",
    "InvalidInputError",
    "ProtocolParams",
    "length_from_transmission",
    "transmission_from_length",
    "__version__",
]
