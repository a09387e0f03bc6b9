"""Holomorphic vector fields, the tangency residual, and construction identities.

A field H = h1 d/dz1 + h2 d/dz2 vanishing at the origin is tangent to a
hypersurface {rho = 0} exactly when Re[rho_z1 h1 + rho_z2 h2] vanishes on
the surface; that real number is the tangency residual.  The module carries
the exact fields (the family's tangent field and the rotation i beta z2),
truncated polynomial fields in the coefficient space a_jk, b_jk, and the
five closed-form identities that make the family field tangent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hypersurface import HypersurfaceModel, SurfacePoint
from .series import TruncatedSeries


class FieldKindError(ValueError):
    """Operation requires a specific field kind or model provenance."""


def expm1_ratio(alpha: float, z1) -> complex | np.ndarray:
    """(exp(alpha*z1) - 1)/alpha, continued as z1 at alpha = 0.

    Below |alpha*z1| = 1e-8 the three-term series z1*(1 + a*z1/2 + (a*z1)^2/6)
    replaces the quotient, which would otherwise lose digits to cancellation.
    """
    z1 = np.asarray(z1, dtype=complex)
    if alpha == 0.0:
        out = z1
    else:
        w = alpha * z1
        small = np.abs(w) < 1e-8
        with np.errstate(invalid="ignore"):
            direct = np.expm1(w) / alpha
        series = z1 * (1.0 + w / 2.0 + w * w / 6.0)
        out = np.where(small, series, direct)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AnalyticVectorField:
    """Exact field given by closures h1(z1, z2), h2(z1, z2); h(0,0) = 0."""

    h1: callable
    h2: callable
    kind: str = "custom"
    series: TruncatedSeries | None = None
    alpha: float = 0.0
    beta: float = 0.0

    def __call__(self, z1, z2):
        return self.h1(z1, z2), self.h2(z1, z2)


def family_tangent_field(a: TruncatedSeries, alpha: float) -> AnalyticVectorField:
    """The field expm1_ratio(alpha, z1)*a(z2) d/dz1 + i z2 d/dz2."""
    coeffs = np.asarray(a.coeffs, dtype=complex)

    def h1(z1, z2):
        z2 = np.asarray(z2, dtype=complex)
        acc = np.zeros_like(z2)
        for c in coeffs[::-1]:
            acc = acc * z2 + c
        return expm1_ratio(alpha, z1) * (acc * z2)

    def h2(z1, z2):
        return 1j * np.asarray(z2, dtype=complex)

    return AnalyticVectorField(h1, h2, kind="family_tangent", series=a, alpha=float(alpha))


def rotation_field(beta: float = 1.0) -> AnalyticVectorField:
    """i*beta*z2 d/dz2, tangent to every radially symmetric model."""

    def h1(z1, z2):
        return np.zeros_like(np.asarray(z2, dtype=complex))

    def h2(z1, z2):
        return 1j * beta * np.asarray(z2, dtype=complex)

    return AnalyticVectorField(h1, h2, kind="rotation", beta=float(beta))


def combine_fields(c1: float, f1: AnalyticVectorField, c2: float, f2: AnalyticVectorField) -> AnalyticVectorField:
    """Real-linear combination c1*f1 + c2*f2."""

    def h1(z1, z2):
        return c1 * f1.h1(z1, z2) + c2 * f2.h1(z1, z2)

    def h2(z1, z2):
        return c1 * f1.h2(z1, z2) + c2 * f2.h2(z1, z2)

    return AnalyticVectorField(h1, h2, kind="custom")


@dataclass(frozen=True)
class PolyVectorField:
    """Truncated Taylor field: h1 = sum a_jk z1^j z2^k, h2 likewise with b_jk.

    Stored as dense (degree+1) x (degree+1) complex matrices with the (0,0)
    entries structurally zero.
    """

    a_coeffs: np.ndarray
    b_coeffs: np.ndarray
    degree: int

    def __post_init__(self):
        a = np.asarray(self.a_coeffs, dtype=complex)
        b = np.asarray(self.b_coeffs, dtype=complex)
        if a.shape != (self.degree + 1, self.degree + 1) or b.shape != a.shape:
            raise ValueError("coefficient matrices must be (degree+1) square")
        if a[0, 0] != 0 or b[0, 0] != 0:
            raise ValueError("constant terms a00, b00 are structurally absent")
        object.__setattr__(self, "a_coeffs", a)
        object.__setattr__(self, "b_coeffs", b)

    def h1(self, z1, z2):
        return _eval_bivariate(self.a_coeffs, z1, z2)

    def h2(self, z1, z2):
        return _eval_bivariate(self.b_coeffs, z1, z2)

    def __call__(self, z1, z2):
        return self.h1(z1, z2), self.h2(z1, z2)


def _eval_bivariate(C: np.ndarray, z1, z2):
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    out = np.zeros(np.broadcast(z1, z2).shape, dtype=complex)
    for j in range(C.shape[0] - 1, -1, -1):
        inner = np.zeros_like(out)
        for k in range(C.shape[1] - 1, -1, -1):
            inner = inner * z2 + C[j, k]
        out = out * z1 + inner
    return out


def taylor_of_field(H: AnalyticVectorField, degree: int) -> PolyVectorField:
    """Bivariate Taylor coefficients of H about (0,0), each index up to degree.

    For the family field: a_jk = alpha**(j-1)/j! * a_k for j >= 1 (only j = 1
    survives at alpha = 0) and b_01 = i.  For the rotation: b_01 = i*beta.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    a = np.zeros((degree + 1, degree + 1), dtype=complex)
    b = np.zeros((degree + 1, degree + 1), dtype=complex)
    if H.kind == "family_tangent":
        coeffs = H.series.coeffs
        for j in range(1, degree + 1):
            if H.alpha == 0.0 and j > 1:
                break
            lead = H.alpha ** (j - 1) / math.factorial(j)
            for k in range(1, min(degree, len(coeffs)) + 1):
                a[j, k] = lead * coeffs[k - 1]
        b[0, 1] = 1j
    elif H.kind == "rotation":
        b[0, 1] = 1j * H.beta
    else:
        raise FieldKindError("taylor_of_field supports family_tangent and rotation kinds")
    return PolyVectorField(a, b, degree)


# ---------------------------------------------------------------------------
# Tangency residual
# ---------------------------------------------------------------------------


def tangency_residual(model: HypersurfaceModel, H, pt: SurfacePoint) -> float:
    """Re[rho_z1(pt) h1(pt) + rho_z2(pt) h2(pt)]; zero iff H is tangent at pt."""
    g1, g2 = model.rho_gradient(pt.z1, pt.z2)
    h1, h2 = H(pt.z1, pt.z2)
    return float(np.real(g1 * complex(h1) + g2 * complex(h2)))


def tangency_residuals(model: HypersurfaceModel, H, z1, z2) -> np.ndarray:
    """Vectorized residuals over arrays of on-surface points."""
    g1, g2 = model.rho_gradient(z1, z2)
    h1, h2 = H(z1, z2)
    return np.real(g1 * h1 + g2 * h2)


# ---------------------------------------------------------------------------
# Construction identities
# ---------------------------------------------------------------------------


def identity_residuals(model: HypersurfaceModel, z2, t) -> np.ndarray:
    """Absolute residuals of the five closed-form identities behind tangency.

    Works on scalars or broadcastable arrays of (z2, t); returns shape
    (..., 5).  The twist-specific identities (iii) and (iv) are reported as
    exact zeros when alpha = 0 so the report shape stays uniform.

    (i)   Re[i z2 Q0' + (1 + Q0^2) i a / 2] = 0
    (ii)  Re[i z2 P1' - (1/2 + Q0/2i) a P1] = 0
    (iii) Re[i z2 P'  + (exp(-alpha P) - 1)/alpha (1/2 + Q0/2i) a] = 0
    (iv)  (i + f_t) exp(alpha (i t - f)) = i + Q0
    (v)   Re[2 i alpha z2 f' + (f_t - Q0) i a] = 0
    """
    if model.provenance != "family":
        raise FieldKindError("identity residuals are defined for family models")
    itn = model.internals
    alpha = itn["params"].alpha
    z2 = np.asarray(z2, dtype=complex)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast(z2, t).shape

    a_val = z2 * itn["a_over_z"](z2)
    Q0 = itn["Q0"](z2)
    R_z = itn["R_z"](z2)
    Q0_z = (1.0 + Q0**2) * R_z
    P1 = itn["P1"](z2)
    P1_z = itn["P1_z"](z2)
    P_z = itn["P_z"](z2)
    P = model._P(z2)
    f_t = itn["f_t"](z2, t)
    f_z = itn["f_z"](z2, t)
    f_val = model._f(z2, t)

    half_bar = 0.5 + Q0 / 2j
    res = np.zeros(shape + (5,), dtype=float)
    res[..., 0] = np.abs(np.real(1j * z2 * Q0_z + 0.5 * (1.0 + Q0**2) * 1j * a_val))
    res[..., 1] = np.abs(np.real(1j * z2 * P1_z - half_bar * a_val * P1))
    if alpha != 0:
        lam = np.expm1(-alpha * P) / alpha
        res[..., 2] = np.abs(np.real(1j * z2 * P_z + lam * half_bar * a_val))
        res[..., 3] = np.abs((1j + f_t) * np.exp(alpha * (1j * t - f_val)) - (1j + Q0))
    res[..., 4] = np.abs(np.real(2j * alpha * z2 * f_z + (f_t - Q0) * 1j * a_val))
    return res


# ---------------------------------------------------------------------------
# Field files
# ---------------------------------------------------------------------------


def field_to_dict(H: AnalyticVectorField) -> dict:
    if H.kind == "family_tangent":
        return {
            "kind": H.kind,
            "series": [[c.real, c.imag] for c in H.series.coeffs],
            "alpha": H.alpha,
        }
    if H.kind == "rotation":
        return {"kind": H.kind, "beta": H.beta}
    raise FieldKindError("only family_tangent and rotation fields serialize")


def field_from_dict(d: dict) -> AnalyticVectorField:
    kind = d["kind"]
    if kind == "family_tangent":
        series = TruncatedSeries([complex(re, im) for re, im in d["series"]])
        return family_tangent_field(series, float(d.get("alpha", 0.0)))
    if kind == "rotation":
        return rotation_field(float(d.get("beta", 1.0)))
    raise FieldKindError(f"unsupported field kind {kind!r}")


def save_field(H: AnalyticVectorField, path) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_dict(H), fh, indent=2, sort_keys=True)


def load_field(path) -> AnalyticVectorField:
    with open(path) as fh:
        return field_from_dict(json.load(fh))
