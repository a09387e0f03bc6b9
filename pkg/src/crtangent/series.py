"""Truncated complex power series, radial flat profiles, and the flatness probe.

A truncated series holds coefficients of z, z**2, ..., z**N with no constant
term, so every series vanishes at the origin.  Flat profiles model radial
functions r -> value(r) that vanish faster than any power of r at 0; the
probe checks that behavior on a finite set of radii and can only ever report
*consistency* with flatness, never a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class DomainError(ValueError):
    """Evaluation requested outside the configured radius."""


class ProbeError(RuntimeError):
    """A probe point could not be evaluated; carries the offending z."""

    def __init__(self, z: complex, cause: Exception):
        super().__init__(f"probe evaluation failed at z={z!r}: {cause}")
        self.z = z
        self.cause = cause


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients of z**1 .. z**N; the constant term is structurally absent."""

    coeffs: tuple[complex, ...]
    eval_radius: float = 1.0

    def __init__(self, coeffs: Sequence[complex], eval_radius: float = 1.0):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in coeffs))
        object.__setattr__(self, "eval_radius", float(eval_radius))
        if not self.coeffs:
            raise ValueError("series needs at least one coefficient")
        if self.eval_radius <= 0:
            raise ValueError("eval_radius must be positive")

    @property
    def truncation_order(self) -> int:
        return len(self.coeffs)

    def __call__(self, z: complex) -> complex:
        return eval_series(self, z)

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        summed = list(a)
        for i, c in enumerate(b):
            summed[i] += c
        return TruncatedSeries(summed, min(self.eval_radius, other.eval_radius))

    def scaled(self, factor: complex) -> "TruncatedSeries":
        return TruncatedSeries([factor * c for c in self.coeffs], self.eval_radius)


def eval_series(s: TruncatedSeries, z: complex) -> complex:
    """Evaluate sum a_n z**n by Horner; exact 0 at z = 0."""
    z = complex(z)
    if abs(z) > s.eval_radius:
        raise DomainError(f"|z|={abs(z):.6g} exceeds evaluation radius {s.eval_radius:.6g}")
    if z == 0:
        return 0j
    acc = 0j
    for c in reversed(s.coeffs):
        acc = acc * z + c
    return acc * z


def transform_coeffs(s: TruncatedSeries, mode: str) -> TruncatedSeries:
    """Divide coefficient n by n ("div_n") or by i*n ("div_in").

    Division by i*n is done as an exact quarter-turn (multiply by -i swaps
    real and imaginary parts) followed by one real division per component.
    """
    if mode == "div_n":
        coeffs = [c / (n + 1) for n, c in enumerate(s.coeffs)]
    elif mode == "div_in":
        coeffs = [complex(c.imag, -c.real) / (n + 1) for n, c in enumerate(s.coeffs)]
    else:
        raise ValueError(f"unknown transform mode {mode!r}")
    return TruncatedSeries(coeffs, s.eval_radius)


# ---------------------------------------------------------------------------
# Flat profiles
# ---------------------------------------------------------------------------


def _exp_inverse_power(r: float, s: float) -> float:
    # exp(-r**(-s)) without overflowing the intermediate power for tiny r
    if r <= 0.0:
        return 0.0
    lx = -s * math.log(r)
    if lx > 700.0:
        return 0.0
    return math.exp(-math.exp(lx))


@dataclass(frozen=True)
class FlatProfile:
    """Radial profile r -> value(r), flat at 0 unless the zero profile.

    kind "exp_inverse_power": value(r) = exp(-r**(-s)), the standard flat
    bump; "zero": identically 0; "custom": caller-supplied value/derivative
    closures.
    """

    kind: str
    s: float = 2.0
    description: str = ""
    custom_value: Callable[[float], float] | None = field(default=None, compare=False)
    custom_derivative: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("exp_inverse_power", "zero", "custom"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "exp_inverse_power" and self.s <= 0:
            raise ValueError("exponent s must be positive")
        if self.kind == "custom" and self.custom_value is None:
            raise ValueError("custom profile needs a value closure")

    def value(self, r: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "custom":
            return self.custom_value(r)
        return _exp_inverse_power(r, self.s)

    def derivative(self, r: float) -> float:
        """d/dr of the profile; 0 at r = 0 for the flat kinds."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "custom":
            if self.custom_derivative is None:
                h = 1e-7 * max(r, 1e-3)
                return (self.custom_value(r + h) - self.custom_value(r - h)) / (2 * h)
            return self.custom_derivative(r)
        if r <= 0.0:
            return 0.0
        # d/dr exp(-r**(-s)) = s * r**(-s-1) * exp(-r**(-s))
        v = _exp_inverse_power(r, self.s)
        if v == 0.0:
            return 0.0
        return self.s * r ** (-self.s - 1.0) * v


def zero_profile() -> FlatProfile:
    return FlatProfile("zero", description="identically zero")


def exp_inverse_power(s: float = 2.0) -> FlatProfile:
    return FlatProfile("exp_inverse_power", s=s, description=f"exp(-r**(-{s:g}))")


# ---------------------------------------------------------------------------
# Flatness probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatnessReport:
    order_tested: int
    radii: tuple[float, ...]
    ratios: tuple[float, ...]
    max_ratio: float
    verdict: str              # "consistent_with_flat" or "violates_at"
    violation_radius: float | None = None

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent_with_flat"


def flatness_probe(
    f: Callable[[complex], float],
    n: int,
    radii: Sequence[float],
    bound: float = 1.0,
    n_angles: int = 64,
    slack: float = 0.1,
) -> FlatnessReport:
    """Probe |f(z)| <= C |z|**n on circles of strictly decreasing radii.

    The flatness bound is asymptotic (it only needs to hold from some radius
    inward), so the verdict is decided at the smallest probed radius: the
    report is consistent_with_flat iff the ratio there is within the bound.
    Larger radii contribute the ratio trend; a ratio sequence that decays
    toward small radii (non-increasing within `slack`) is recorded as the
    qualifying suffix.  violates_at(r) always means the ratio at r exceeds
    the bound.
    """
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("need at least one probe radius")
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")

    angles = np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False)
    ratios = []
    for r in radii:
        worst = 0.0
        for th in angles:
            z = complex(r * math.cos(th), r * math.sin(th))
            try:
                val = abs(f(z))
            except Exception as exc:  # propagate with location per contract
                raise ProbeError(z, exc) from exc
            ratio = val / r**n
            if ratio > worst:
                worst = ratio
        ratios.append(worst)

    max_ratio = max(ratios)
    if ratios[-1] > bound:
        return FlatnessReport(n, tuple(radii), tuple(ratios), max_ratio,
                              "violates_at", radii[-1])
    # Ratios that grow toward small radii signal a violation in the making;
    # flag the smallest radius where the growth has already crossed the bound.
    for i in range(len(ratios) - 1):
        if ratios[i + 1] > ratios[i] * (1.0 + slack) and ratios[i + 1] > bound:
            return FlatnessReport(n, tuple(radii), tuple(ratios), max_ratio,
                                  "violates_at", radii[i + 1])
    return FlatnessReport(n, tuple(radii), tuple(ratios), max_ratio,
                          "consistent_with_flat", None)


def log_spaced_radii(r_min: float, r_max: float, count: int) -> list[float]:
    """Strictly decreasing, logarithmically spaced probe radii."""
    if not (0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    return list(np.geomspace(r_max, r_min, count))
