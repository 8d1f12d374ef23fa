"""Physical constants and unit helpers.

All frequencies in this package are angular (rad/s).  Electric fields are
taken in V/cm and magnetic fields in gauss at the user-facing layer; both
are converted to SI internally.
"""

import math

import scipy.constants as _sc

HBAR = _sc.hbar
E_CHARGE = _sc.e
EPS0 = _sc.epsilon_0
M_E = _sc.m_e
C_LIGHT = _sc.c
A_BOHR = _sc.physical_constants["Bohr radius"][0]
RYDBERG_J = _sc.physical_constants["Rydberg constant times hc in J"][0]
RYDBERG_W = RYDBERG_J / HBAR  # rad/s
MU_B = _sc.physical_constants["Bohr magneton"][0]
AMU = _sc.physical_constants["atomic mass constant"][0]
EULER_GAMMA = 0.5772156649015329

VCM_TO_VM = 100.0
GAUSS_TO_T = 1e-4

TWO_PI = 2.0 * math.pi


def angular(frequency_hz: float) -> float:
    """Cyclic frequency in Hz -> angular frequency in rad/s."""
    return TWO_PI * frequency_hz


def cyclic(omega: float) -> float:
    """Angular frequency in rad/s -> cyclic frequency in Hz."""
    return omega / TWO_PI
