"""Unit conventions.

Frequencies are stored as linear frequencies in MHz (a value of 40 means
2*pi x 40 MHz) and converted to angular frequency in rad/ns when operators are
assembled.  Decay rates (kappa) are plain rates in 1/us and are *not*
multiplied by 2*pi.  Times are in ns.
"""
import math

TWO_PI = 2 * math.pi
NS_PER_US = 1e3


def angular(f_mhz):
    """Linear frequency in MHz -> angular frequency in rad/ns."""
    return TWO_PI * f_mhz / NS_PER_US


def rate_per_ns(rate_per_us):
    return rate_per_us / NS_PER_US


def duration_ns(phase, f_mhz):
    """Time (ns) to accumulate ``phase`` radians at linear frequency ``|f_mhz|``."""
    return phase / abs(angular(f_mhz))
