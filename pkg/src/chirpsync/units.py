"""Conversions between SI units and the display units used on the command line.

The library works in s, Hz and Hz/s throughout. Chirp rates are quoted in
kHz/us for display, and 1 kHz/us = 1e9 Hz/s.
"""

KHZ_PER_US = 1e9
KHZ = 1e3
US = 1e-6


def rate_from_khz_per_us(value: float) -> float:
    return value * KHZ_PER_US


def rate_to_khz_per_us(value: float) -> float:
    return value / KHZ_PER_US


def hz_from_khz(value: float) -> float:
    return value * KHZ


def hz_to_khz(value: float) -> float:
    return value / KHZ


def s_from_us(value: float) -> float:
    return value * US


def s_to_us(value: float) -> float:
    return value / US
