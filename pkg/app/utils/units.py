"""Unit-string parsing for run configuration.

Internal units: time ns, energies and angular frequencies rad/ns, rates 1/ns,
magnetic field T, electric field V/m, phase rad, wavenumber cm^-1.
"""
import math
import re
from typing import Dict, Tuple

import scipy.constants as sc

# hbar = 1: an energy E corresponds to the angular frequency E / hbar.
EV_TO_RAD_PER_NS = sc.electron_volt / sc.hbar * 1e-9
CM_TO_RAD_PER_NS = 2 * math.pi * sc.c * 100 * 1e-9
SPEED_OF_LIGHT_CM_PER_NS = sc.c * 100 * 1e-9
BOHR_MAGNETON_RAD_PER_NS_PER_T = sc.physical_constants["Bohr magneton"][0] / sc.hbar * 1e-9

# unit -> (dimension, factor to internal unit)
UNITS: Dict[str, Tuple[str, float]] = {
    "T": ("magnetic_field", 1.0),
    "mT": ("magnetic_field", 1e-3),
    "G": ("magnetic_field", 1e-4),
    "V/m": ("electric_field", 1.0),
    "kV/cm": ("electric_field", 1e5),
    "rad": ("phase", 1.0),
    "eV": ("energy", EV_TO_RAD_PER_NS),
    "meV": ("energy", 1e-3 * EV_TO_RAD_PER_NS),
    "rad/ns": ("energy", 1.0),
    "rad/us": ("energy", 1e-3),
    "rad/s": ("energy", 1e-9),
    "MHz": ("energy", 2 * math.pi * 1e-3),
    "GHz": ("energy", 2 * math.pi),
    "cm^-1": ("wavenumber", 1.0),
    "ns": ("time", 1.0),
    "us": ("time", 1e3),
    "ms": ("time", 1e6),
    "s": ("time", 1e9),
    "1/ns": ("rate", 1.0),
    "1/us": ("rate", 1e-3),
    "1/s": ("rate", 1e-9),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


def parse_quantity(text: str, dimension: str) -> float:
    """
    Convert a string like ``"7e-3 T"`` to a float in internal units.

    Args:
        text: Number followed by a unit symbol from ``UNITS``
        dimension: Expected dimension, e.g. ``"time"``

    Returns:
        The value in internal units

    Raises:
        ValueError: Malformed string, unknown unit or wrong dimension
    """
    if not isinstance(text, str):
        raise ValueError(f"expected a '<number> <unit>' string, got {text!r}")
    match = _QUANTITY.match(text)
    if not match:
        raise ValueError(f"malformed quantity {text!r}, expected '<number> <unit>'")
    value, unit = float(match.group(1)), match.group(2)
    if unit not in UNITS:
        raise ValueError(f"unknown unit {unit!r} in {text!r}")
    found, factor = UNITS[unit]
    if found != dimension:
        raise ValueError(f"unit {unit!r} is a {found}, expected a {dimension}")
    return value * factor


def wavenumber_to_rad_per_ns(wavenumber_cm: float) -> float:
    return wavenumber_cm * CM_TO_RAD_PER_NS
