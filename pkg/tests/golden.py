"""Reference witness rows: (label, p1, p2+, sigma(p2+), sigma(p1), delta_w)."""
from __future__ import annotations

ROWS = [
    ("above-band 1.54 ns", 2.446e-3, 6.92e-8, 4.89e-8, 6e-6, -1.21),
    ("above-band 2.05 ns", 2.859e-3, 38.46e-8, 11.59e-8, 7e-6, -3.18),
    ("above-band 2.56 ns", 3.114e-3, 80.55e-8, 16.78e-8, 7e-6, -4.67),
    ("above-band 3.07 ns", 3.339e-3, 119.20e-8, 20.40e-8, 7e-6, -5.70),
    ("above-band 3.84 ns", 3.678e-3, 231.40e-8, 28.50e-8, 8e-6, -8.00),
    ("resonant 10.00 ns", 3.061e-3, 0.52e-8, 0.52e-8, 3e-6, +2.63),
    ("resonant 10.24 ns", 3.062e-3, 1.05e-8, 0.74e-8, 3e-6, +1.16),
    ("resonant 10.75 ns", 3.064e-3, 2.10e-8, 1.05e-8, 3e-6, -0.17),
    ("resonant 11.24 ns", 3.067e-3, 2.62e-8, 1.17e-8, 3e-6, -0.60),
    ("down-conversion 1", 131.4e-3, 3477e-8, 941e-8, 3e-4, +146.0),
    ("down-conversion 2", 49.81e-3, 725.4e-8, 123e-8, 7e-5, +56.7),
    ("down-conversion 3", 19.18e-3, 100.7e-8, 35.6e-8, 3e-5, +10.1),
    ("down-conversion 4", 5.45e-3, 19.20e-8, 8.59e-8, 1e-5, -0.98),
    ("down-conversion 5", 2.723e-3, 3.11e-8, 2.20e-8, 5e-6, -0.80),
]


def within_tolerance(computed: float, reference: float) -> bool:
    """Sign must match; 0.15 sigma absolute up to |dW| = 3, else 10 % relative."""
    if (computed > 0) != (reference > 0):
        return False
    if abs(reference) <= 3:
        return abs(computed - reference) <= 0.15
    return abs(computed - reference) <= 0.10 * abs(reference)
