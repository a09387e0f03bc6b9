"""Hypersurface models Re z1 + P(z2) + (Im z1) Q(z2, Im z1) = 0 near the origin.

Three provenances are supported:

* family(params) -- the explicit construction from a truncated series a(z),
  a twist alpha and flat radial profiles p, q.  All the building blocks
  (the phase R, the positive factor P1, the height P, the shear f) and their
  Wirtinger derivatives are attached as closed forms.
* radial_symmetric -- P = profile(|z2|) with an optional radial Q(|z2|, t);
  the rotation direction i z2 d/dz2 is then tangent by symmetry.
* custom -- arbitrary (P, Q) callables, differentiated by central finite
  differences only.

Derivative conventions: for a real-valued F, F_z = (F_x - i F_y)/2.  For a
radial factor, d|z|/dz = conj(z)/(2|z|).  All derivative closures return 0
at z2 = 0 where flatness forces the limit; the lone exception is the phase
derivative R_z2 whose limit -a1/2 is finite and kept.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .series import DomainError, FlatProfile, TruncatedSeries, exp_inverse_power, zero_profile


class ConstructionError(ValueError):
    """Model construction failed; carries the offending z2 when located."""

    def __init__(self, message: str, z2: complex | None = None):
        super().__init__(message)
        self.z2 = z2


@dataclass(frozen=True)
class FamilyParams:
    """Parameters of one family member: series a, twist alpha, profiles p, q."""

    a: TruncatedSeries
    alpha: float
    p: FlatProfile
    q: FlatProfile
    eps0: float = 0.6
    delta0: float | None = None

    def __post_init__(self):
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")
        if all(c == 0 for c in self.a.coeffs):
            raise ValueError("series a must be nonzero")
        delta0 = self.delta0
        if delta0 is None:
            delta0 = 1.0 / (2.0 * abs(self.alpha)) if self.alpha != 0 else 1.0
            object.__setattr__(self, "delta0", min(1.0, delta0))
        else:
            if delta0 <= 0:
                raise ValueError("delta0 must be positive")
            if self.alpha != 0 and delta0 > 1.0 / (2.0 * abs(self.alpha)) + 1e-12:
                raise ValueError("delta0 must not exceed 1/(2|alpha|)")


@dataclass(frozen=True)
class SurfacePoint:
    """On-surface point (z1, z2) with t = Im z1, built by back-substitution."""

    z1: complex
    z2: complex
    t: float


@dataclass(frozen=True)
class AnnulusGrid:
    r_min: float
    r_max: float
    n_radii: int
    n_angles: int

    def __post_init__(self):
        if not (0 <= self.r_min < self.r_max):
            raise ValueError("need 0 <= r_min < r_max")
        if self.n_radii < 1 or self.n_angles < 1:
            raise ValueError("grid counts must be positive")

    def radii(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.n_radii)

    def angles(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * math.pi, self.n_angles, endpoint=False)


def _horner_tail(coeffs: np.ndarray, z):
    """Evaluate a(z)/z = c0 + c1 z + ... + c_{N-1} z**(N-1); finite at z=0."""
    acc = np.zeros_like(np.asarray(z, dtype=complex))
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc


def _profile_vals(profile: FlatProfile, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if profile.kind == "zero":
        return np.zeros_like(r)
    if profile.kind == "exp_inverse_power":
        with np.errstate(divide="ignore", over="ignore"):
            x = np.where(r > 0, r, 1.0) ** (-profile.s)
        return np.exp(-np.where(r > 0, x, np.inf))
    return np.vectorize(profile.value, otypes=[float])(r)


def _profile_derivs(profile: FlatProfile, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if profile.kind == "zero":
        return np.zeros_like(r)
    if profile.kind == "exp_inverse_power":
        s = profile.s
        v = _profile_vals(profile, r)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            d = s * np.where(r > 0, r, 1.0) ** (-s - 1.0) * v
        return np.where(v > 0, d, 0.0)
    return np.vectorize(profile.derivative, otypes=[float])(r)


class HypersurfaceModel:
    """Defining function, closed-form gradients and exact point sampling.

    Not constructed directly; use build_family, build_radial or build_custom.
    """

    def __init__(self, provenance, eps0, delta0, P, f, grad, internals=None):
        self.provenance = provenance
        self.eps0 = float(eps0)
        self.delta0 = float(delta0)
        self._P = P           # vectorized z2 -> real
        self._f = f           # vectorized (z2, t) -> real
        self._grad = grad     # vectorized (z2, t) -> (rho_z1, rho_z2)
        self.internals = internals or {}

    # -- defining function ---------------------------------------------------

    def _check_domain(self, z2, t):
        if np.any(np.abs(z2) > self.eps0 * (1 + 1e-12)):
            raise DomainError(f"|z2| exceeds the model disc radius {self.eps0:g}")
        if np.any(np.abs(t) > self.delta0 * (1 + 1e-12)):
            raise DomainError(f"|Im z1| exceeds the model range {self.delta0:g}")

    def P(self, z2) -> float | np.ndarray:
        z2 = np.asarray(z2, dtype=complex)
        self._check_domain(z2, 0.0)
        out = self._P(z2)
        return float(out) if out.ndim == 0 else out

    def f(self, z2, t) -> float | np.ndarray:
        z2 = np.asarray(z2, dtype=complex)
        t = np.asarray(t, dtype=float)
        self._check_domain(z2, t)
        out = self._f(z2, t)
        return float(out) if np.ndim(out) == 0 else out

    def rho(self, z1, z2) -> float | np.ndarray:
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        t = np.imag(z1)
        self._check_domain(z2, t)
        out = np.real(z1) + self._P(z2) + self._f(z2, t)
        return float(out) if np.ndim(out) == 0 else out

    def rho_gradient(self, z1, z2):
        """Wirtinger pair (rho_z1, rho_z2) at (z1, z2)."""
        z2 = np.asarray(z2, dtype=complex)
        t = np.imag(np.asarray(z1, dtype=complex))
        self._check_domain(z2, t)
        g1, g2 = self._grad(z2, t)
        if np.ndim(g1) == 0:
            return complex(g1), complex(g2)
        return g1, g2

    # -- sampling ------------------------------------------------------------

    def sample_arrays(self, grid: AnnulusGrid, t_values: Sequence[float]):
        """Flat arrays (z1, z2, t, radius_index) of exact on-surface points."""
        t_values = np.asarray(list(t_values), dtype=float)
        if np.any(np.abs(t_values) > self.delta0):
            raise DomainError("t_values must lie inside (-delta0, delta0)")
        if grid.r_max > self.eps0 * (1 + 1e-12):
            raise DomainError("grid exceeds the model disc radius")
        radii = grid.radii()
        angles = grid.angles()
        z2_c = radii[:, None] * np.exp(1j * angles)[None, :]
        z2 = np.repeat(z2_c.reshape(-1), len(t_values))
        ridx = np.repeat(np.arange(grid.n_radii), grid.n_angles * len(t_values))
        tt = np.tile(t_values, grid.n_radii * grid.n_angles)
        z1 = 1j * tt - self._P(z2) - self._f(z2, tt)
        return z1, z2, tt, ridx

    def sample_points(self, grid: AnnulusGrid, t_values: Sequence[float]) -> list[SurfacePoint]:
        z1, z2, tt, _ = self.sample_arrays(grid, t_values)
        return [SurfacePoint(complex(a), complex(b), float(c)) for a, b, c in zip(z1, z2, tt)]

    def surface_point(self, z2: complex, t: float) -> SurfacePoint:
        z2 = complex(z2)
        t = float(t)
        self._check_domain(np.asarray(z2), t)
        z1 = 1j * t - float(self._P(np.asarray(z2))) - float(self._f(np.asarray(z2), np.asarray(t)))
        return SurfacePoint(z1, z2, t)


# ---------------------------------------------------------------------------
# Family construction
# ---------------------------------------------------------------------------


def _p_exponent_terms(profile: FlatProfile, r: np.ndarray):
    """log g and (log g)' for the profile g = exp(p): the exponent p and p'.

    For exp_inverse_power these are -r**(-s) and s*r**(-s-1) analytically;
    for other kinds they fall back to log of the value (with g = 0 mapped to
    -inf, which collapses P1 to 0 downstream).
    """
    if profile.kind == "exp_inverse_power":
        s = profile.s
        with np.errstate(divide="ignore", over="ignore"):
            x = np.where(r > 0, r, 1.0) ** (-s)
            p_val = np.where(r > 0, -x, -np.inf)
            p_der = np.where(r > 0, s * np.where(r > 0, r, 1.0) ** (-s - 1.0), 0.0)
        return p_val, p_der
    if profile.kind == "zero":
        # g identically 0 would kill P1; treat as exponent -inf everywhere.
        return np.full_like(r, -np.inf), np.zeros_like(r)
    vals = _profile_vals(profile, r)
    ders = _profile_derivs(profile, r)
    with np.errstate(divide="ignore"):
        p_val = np.where(vals > 0, np.log(np.where(vals > 0, vals, 1.0)), -np.inf)
        p_der = np.where(vals > 0, ders / np.where(vals > 0, vals, 1.0), 0.0)
    return p_val, p_der


def build_family(params: FamilyParams, check_grid: tuple[int, int] = (16, 64)) -> HypersurfaceModel:
    """Build one family member with closed-form derivative closures.

    Raises ConstructionError when the sampled phase R leaves [-1, 1] (the
    normalization that keeps cos(R + alpha t) away from 0 on the whole
    (z2, t) box) or when 1 + alpha*P1 is not positive.
    """
    alpha = float(params.alpha)
    coeffs = np.asarray(params.a.coeffs, dtype=complex)
    n = np.arange(1, len(coeffs) + 1)
    c_div_n = coeffs / n
    c_div_in = coeffs / (1j * n)
    p_prof, q_prof = params.p, params.q

    def a_over_z(z):
        return _horner_tail(coeffs, z)

    def R(z):
        r = np.abs(z)
        return _profile_vals(q_prof, r) - np.real(z * _horner_tail(c_div_n, z))

    def R_z(z):
        r = np.abs(z)
        qd = _profile_derivs(q_prof, r)
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(r > 0, qd * np.conj(z) / (2.0 * np.where(r > 0, r, 1.0)), 0.0)
        return radial - 0.5 * a_over_z(z)

    def Q0(z):
        return np.tan(R(z))

    def P1(z):
        r = np.abs(z)
        p_val, _ = _p_exponent_terms(p_prof, r)
        expo = p_val + np.real(z * _horner_tail(c_div_in, z)) - np.log(np.abs(np.cos(R(z))))
        with np.errstate(over="ignore"):
            return np.where(r > 0, np.exp(expo), 0.0)

    def P1_z(z):
        r = np.abs(z)
        p_val, p_der = _p_exponent_terms(p_prof, r)
        with np.errstate(invalid="ignore", divide="ignore"):
            rad = np.where(r > 0, p_der * np.conj(z) / (2.0 * np.where(r > 0, r, 1.0)), 0.0)
        e_z = rad + a_over_z(z) / 2j + Q0(z) * R_z(z)
        return P1(z) * e_z

    if alpha != 0:
        def P(z):
            return np.log1p(alpha * P1(z)) / alpha

        def P_z(z):
            return P1_z(z) / (1.0 + alpha * P1(z))

        def f(z, t):
            Rv = R(z)
            return -np.log(np.abs(np.cos(Rv + alpha * t) / np.cos(Rv))) / alpha

        def f_t(z, t):
            return np.tan(R(z) + alpha * t)

        def f_z(z, t):
            Rv = R(z)
            return R_z(z) * (np.tan(Rv + alpha * t) - np.tan(Rv)) / alpha
    else:
        P = P1
        P_z = P1_z

        def f(z, t):
            return np.tan(R(z)) * t

        def f_t(z, t):
            return np.tan(R(z)) * np.ones_like(np.asarray(t, dtype=float))

        def f_z(z, t):
            Rv = R(z)
            return t * (1.0 + np.tan(Rv) ** 2) * R_z(z)

    def grad(z2, t):
        g1 = 0.5 + f_t(z2, t) / 2j
        g2 = P_z(z2) + f_z(z2, t)
        return g1, g2

    # Construction checks on a sample grid: |R| <= 1 and 1 + alpha*P1 > 0.
    radii = np.linspace(params.eps0 / check_grid[0], params.eps0, check_grid[0])
    angles = np.linspace(0, 2 * math.pi, check_grid[1], endpoint=False)
    zg = (radii[:, None] * np.exp(1j * angles)[None, :]).reshape(-1)
    Rg = R(zg)
    worst = int(np.argmax(np.abs(Rg)))
    if abs(Rg[worst]) > 1.0 + 1e-9:
        z_bad = complex(zg[worst])
        hit_pole = abs(Rg[worst]) >= math.pi / 2
        raise ConstructionError(
            f"|R(z2)| = {abs(Rg[worst]):.6g} exceeds 1 at z2 = {z_bad:.6g}"
            + (" (cos R vanishes there)" if hit_pole else ""),
            z2=z_bad,
        )
    if alpha != 0:
        P1g = P1(zg)
        bad = 1.0 + alpha * P1g <= 0
        if np.any(bad):
            z_bad = complex(zg[np.argmax(bad)])
            raise ConstructionError(
                f"1 + alpha*P1 is not positive at z2 = {z_bad:.6g}; shrink eps0",
                z2=z_bad,
            )

    internals = {
        "params": params, "R": R, "R_z": R_z, "Q0": Q0, "P1": P1, "P1_z": P1_z,
        "P_z": P_z, "f_t": f_t, "f_z": f_z, "a_over_z": a_over_z,
    }
    return HypersurfaceModel(
        provenance="family", eps0=params.eps0, delta0=params.delta0,
        P=P, f=f, grad=grad, internals=internals,
    )


# ---------------------------------------------------------------------------
# Radially symmetric models
# ---------------------------------------------------------------------------


def build_radial(
    p: FlatProfile,
    eps0: float = 1.0,
    delta0: float = 1.0,
    q_radial: Callable[[float, float], float] | None = None,
    q_radial_dr: Callable[[float, float], float] | None = None,
    q_radial_dt: Callable[[float, float], float] | None = None,
) -> HypersurfaceModel:
    """P = p(|z2|) plus an optional radial Q(|z2|, t); rotation-invariant.

    When q_radial is given, its r- and t-derivatives may be supplied as
    closures; missing ones fall back to central differences.
    """

    def P(z):
        return _profile_vals(p, np.abs(z))

    def P_z(z):
        r = np.abs(z)
        d = _profile_derivs(p, r)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(r > 0, d * np.conj(z) / (2.0 * np.where(r > 0, r, 1.0)), 0.0)

    if q_radial is None:
        def f(z, t):
            return np.zeros(np.broadcast(z, t).shape)

        def grad(z2, t):
            shape = np.broadcast(z2, t).shape
            return np.full(shape, 0.5, dtype=complex), P_z(z2) * np.ones(shape)
    else:
        qv = np.vectorize(q_radial, otypes=[float])
        if q_radial_dr is None:
            def q_radial_dr(r, t):  # noqa: E731 - simple fallback closure
                h = 1e-6
                return (q_radial(r + h, t) - q_radial(max(r - h, 0.0), t)) / (h + min(h, r))
        if q_radial_dt is None:
            def q_radial_dt(r, t):
                h = 1e-6
                return (q_radial(r, t + h) - q_radial(r, t - h)) / (2 * h)
        qr = np.vectorize(q_radial_dr, otypes=[float])
        qt = np.vectorize(q_radial_dt, otypes=[float])

        def f(z, t):
            return t * qv(np.abs(z), t)

        def grad(z2, t):
            r = np.abs(z2)
            g1 = 0.5 + (qv(r, t) + t * qt(r, t)) / 2j
            with np.errstate(invalid="ignore", divide="ignore"):
                qder = np.where(r > 0, qr(r, t) * np.conj(z2) / (2.0 * np.where(r > 0, r, 1.0)), 0.0)
            g2 = P_z(z2) + t * qder
            return g1 * np.ones_like(z2), g2

    internals = {"profile": p, "P_z": P_z}
    return HypersurfaceModel(
        provenance="radial_symmetric", eps0=eps0, delta0=delta0,
        P=P, f=f, grad=grad, internals=internals,
    )


# ---------------------------------------------------------------------------
# Custom models: finite differences everywhere
# ---------------------------------------------------------------------------


def build_custom(
    P: Callable[[complex], float],
    Q: Callable[[complex, float], float],
    eps0: float = 1.0,
    delta0: float = 1.0,
    fd_step: float = 1e-6,
) -> HypersurfaceModel:
    """Arbitrary C^1 pair (P, Q); gradients by central differences."""
    Pv = np.vectorize(P, otypes=[float])
    Qv = np.vectorize(Q, otypes=[float])

    def f(z, t):
        return t * Qv(z, t)

    def grad(z2, t):
        h = fd_step
        # rho_z1: Re z1 enters linearly, the t-dependence sits in f(z2, t).
        ft = (f(z2, t + h) - f(z2, t - h)) / (2 * h)
        g1 = 0.5 + ft / 2j
        px = (Pv(z2 + h) - Pv(z2 - h)) / (2 * h)
        py = (Pv(z2 + 1j * h) - Pv(z2 - 1j * h)) / (2 * h)
        fx = (f(z2 + h, t) - f(z2 - h, t)) / (2 * h)
        fy = (f(z2 + 1j * h, t) - f(z2 - 1j * h, t)) / (2 * h)
        g2 = 0.5 * (px + fx) - 0.5j * (py + fy)
        return g1 * np.ones(np.broadcast(z2, t).shape), g2

    def Pfun(z):
        return Pv(z)

    return HypersurfaceModel(
        provenance="custom", eps0=eps0, delta0=delta0,
        P=Pfun, f=f, grad=grad, internals={},
    )


# ---------------------------------------------------------------------------
# Parameter file round trip
# ---------------------------------------------------------------------------


def _profile_to_dict(p: FlatProfile) -> dict:
    if p.kind == "exp_inverse_power":
        return {"kind": p.kind, "s": p.s}
    return {"kind": p.kind}


def _profile_from_dict(d: dict) -> FlatProfile:
    kind = d.get("kind", "zero")
    if kind == "exp_inverse_power":
        return exp_inverse_power(float(d.get("s", 2.0)))
    if kind == "zero":
        return zero_profile()
    raise ValueError(f"unsupported profile kind {kind!r} in parameter file")


def family_params_to_dict(params: FamilyParams) -> dict:
    return {
        "series": [[c.real, c.imag] for c in params.a.coeffs],
        "alpha": params.alpha,
        "p": _profile_to_dict(params.p),
        "q": _profile_to_dict(params.q),
        "eps0": params.eps0,
        "delta0": params.delta0,
    }


def family_params_from_dict(d: dict) -> FamilyParams:
    series = TruncatedSeries([complex(re, im) for re, im in d["series"]],
                             eval_radius=float(d.get("eps0", 0.6)))
    return FamilyParams(
        a=series,
        alpha=float(d["alpha"]),
        p=_profile_from_dict(d["p"]),
        q=_profile_from_dict(d["q"]),
        eps0=float(d.get("eps0", 0.6)),
        delta0=float(d["delta0"]) if d.get("delta0") is not None else None,
    )


def save_family_params(params: FamilyParams, path) -> None:
    with open(path, "w") as fh:
        json.dump(family_params_to_dict(params), fh, indent=2, sort_keys=True)


def load_family_params(path) -> FamilyParams:
    with open(path) as fh:
        return family_params_from_dict(json.load(fh))


def random_family_params(
    rng: np.random.Generator,
    max_order: int = 8,
    alpha_range: tuple[float, float] = (-2.0, 2.0),
    eps0: float = 0.6,
) -> FamilyParams:
    """Draw random family parameters with |a_n| <= 1 and a bounded phase.

    With eps0 <= 0.6 the phase bound |R| <= -log(1 - eps0) < 1 holds for
    every draw with coefficients in the unit disc, so construction never
    rejects.
    """
    n_coeff = int(rng.integers(1, max_order + 1))
    mags = rng.uniform(0.1, 1.0, n_coeff)
    args = rng.uniform(0.0, 2.0 * math.pi, n_coeff)
    coeffs = mags * np.exp(1j * args)
    alpha = float(rng.uniform(*alpha_range))
    return FamilyParams(
        a=TruncatedSeries(coeffs, eval_radius=eps0),
        alpha=alpha,
        p=exp_inverse_power(2.0),
        q=zero_profile(),
        eps0=eps0,
    )


def dump_samples_csv(points: Sequence[SurfacePoint], path) -> None:
    with open(path, "w") as fh:
        fh.write("z1_re,z1_im,z2_re,z2_im,t\n")
        for pt in points:
            fh.write(
                f"{pt.z1.real:.17g},{pt.z1.imag:.17g},"
                f"{pt.z2.real:.17g},{pt.z2.imag:.17g},{pt.t:.17g}\n"
            )
