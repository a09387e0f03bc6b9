"""Complex scalar flows dz/dt = b z^ell (1 + g0(z)) and their growth signatures.

The machinery here reproduces, numerically, the trajectory asymptotics that
rule out nontrivial tangent fields: trajectories of power-law flows decay
like t**(-1/k) along k root branches, and the hypothesized log-height u(t)
obtained by integrating du/dt = -P(z)^n (Re[a z^m] - g2) - g1 along a
trajectory grows in one of four ways (bounded, logarithmic, linear, power).
Each growth class is incompatible with u being the log of a flat function
evaluated along a trajectory that falls into the origin; the scenario
runner measures the class and checks it against the predicted one.

Case labels name the drive structure rather than any external numbering:

============================ ======================== ===================
label                        pattern                  predicted growth
============================ ======================== ===================
origin_departure             ell = 0                  bounded
exponential_spiral           ell = 1, Re b != 0       linear
flat_weighted                ell >= 2, n >= 1         bounded
supercritical_decay          n = 0, m > k             bounded
critical_decay               n = 0, m = k             logarithmic
constant_drive               n = 0, m = 0             linear
subcritical_decay            n = 0, 0 < m < k         power(1 - m/k)
============================ ======================== ===================
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .series import FlatProfile, exp_inverse_power

WINDOW_FULL_TURN = "arg_in_0_2pi"
WINDOW_HALF_SHIFT = "arg_in_minus_half_pi_3half_pi"

GROWTH_BOUNDED = "bounded"
GROWTH_LOGARITHMIC = "logarithmic"
GROWTH_LINEAR = "linear"
GROWTH_POWER = "power"

CASE_PATTERNS = {
    "origin_departure": dict(ell=(0, 0)),
    "exponential_spiral": dict(ell=(1, 1)),
    "flat_weighted": dict(ell=(2, None), n=(1, None)),
    "supercritical_decay": dict(ell=(2, None), n=(0, 0)),
    "critical_decay": dict(ell=(2, None), n=(0, 0)),
    "constant_drive": dict(ell=(2, None), n=(0, 0), m=(0, 0)),
    "subcritical_decay": dict(ell=(2, None), n=(0, 0)),
}

PREDICTED_CLASS = {
    "origin_departure": GROWTH_BOUNDED,
    "exponential_spiral": GROWTH_LINEAR,
    "flat_weighted": GROWTH_BOUNDED,
    "supercritical_decay": GROWTH_BOUNDED,
    "critical_decay": GROWTH_LOGARITHMIC,
    "constant_drive": GROWTH_LINEAR,
    "subcritical_decay": GROWTH_POWER,
}


class ScenarioError(ValueError):
    """Flow specification inconsistent with the requested scenario."""


class BranchCutError(ValueError):
    """The argument of c - k*b*t landed on the branch cut."""

    def __init__(self, t: float):
        super().__init__(f"c - k*b*t lies on the branch cut at t = {t!r}")
        self.t = t


@dataclass(frozen=True)
class Perturbation:
    """Parametric perturbation scale * z**exponent (or identically zero)."""

    kind: str = "zero"  # "zero" | "linear" | "power"
    scale: complex = 0j
    exponent: int = 1

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "power"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "linear":
            object.__setattr__(self, "exponent", 1)

    def kernel_args(self) -> tuple[int, complex, int]:
        if self.kind == "zero" or self.scale == 0:
            return kernels.PERT_ZERO, 0j, 1
        return kernels.PERT_POWER, complex(self.scale), int(self.exponent)

    def __call__(self, z: complex) -> complex:
        kind, scale, expo = self.kernel_args()
        if kind == kernels.PERT_ZERO:
            return 0j
        return scale * z**expo


def zero_perturbation() -> Perturbation:
    return Perturbation("zero")


def linear_perturbation(scale: complex) -> Perturbation:
    return Perturbation("linear", complex(scale), 1)


def power_perturbation(scale: complex, exponent: int) -> Perturbation:
    return Perturbation("power", complex(scale), int(exponent))


@dataclass(frozen=True)
class FlowSpec:
    """Flow dz/dt = b z^ell (1 + g0(z)) plus the log-height drive data.

    The drive exponents (a, m, n) feed du/dt; g1 and g2 are the admissible
    perturbations of the drive identity.  Two parameter degeneracies are
    rejected outright: ell = 1 with Re b = 0 (pure rotation, no decay) and
    m = 0 with Re a = 0 (no real drive to integrate).
    """

    b: complex
    ell: int
    g0: Perturbation = field(default_factory=zero_perturbation)
    z0: complex = 0.5 + 0j
    t_span: tuple[float, float] = (1.0, 1.0e4)
    a: complex = 1.0 + 0j
    m: int = 0
    n: int = 0
    profile: FlatProfile | None = None
    g1: Perturbation = field(default_factory=zero_perturbation)
    g2: Perturbation = field(default_factory=zero_perturbation)

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError("ell must be a nonnegative integer")
        if self.m < 0 or self.n < 0:
            raise ValueError("m and n must be nonnegative integers")
        if self.ell == 1 and complex(self.b).real == 0:
            raise ScenarioError("excluded: ell = 1 with Re b = 0")
        if self.m == 0 and complex(self.a).real == 0:
            raise ScenarioError("excluded: m = 0 with Re a = 0")
        if self.n > 0 and self.profile is None:
            raise ValueError("n >= 1 needs a flat profile for the weight P**n")

    @property
    def k(self) -> int | None:
        return self.ell - 1 if self.ell >= 2 else None

    def drive_value(self, z: complex) -> float:
        """du/dt at state z: -P(z)^n (Re[a z^m] - g2(z)) - Re g1(z)."""
        drive = (self.a * z**self.m).real
        if self.g2.kind != "zero":
            drive -= self.g2(z).real
        weight = 1.0
        if self.n > 0:
            pv = self.profile.value(abs(z))
            weight = pv**self.n
        val = -weight * drive
        if self.g1.kind != "zero":
            val -= self.g1(z).real
        return val


@dataclass(frozen=True)
class Trajectory:
    """Accepted integration samples of one flow, with integrator metadata."""

    times: np.ndarray
    points: np.ndarray
    u: np.ndarray | None
    step_stats: dict
    terminated: str  # "reached_t_end" | "exited_annulus" | "step_underflow"

    def __len__(self) -> int:
        return len(self.times)

    def window_mask(self, t_lo: float, t_hi: float) -> np.ndarray:
        return (self.times >= t_lo) & (self.times <= t_hi)


_STATUS_NAMES = {
    kernels.STATUS_REACHED_END: "reached_t_end",
    kernels.STATUS_EXITED_ANNULUS: "exited_annulus",
    kernels.STATUS_STEP_UNDERFLOW: "step_underflow",
}


def integrate_flow(
    spec: FlowSpec,
    annulus: tuple[float, float] = (0.0, 2.0),
    tol: float = 1e-11,
    with_u: bool = False,
    u0: float = 0.0,
    h_frac: float = 1.0 / 64.0,
    h_abs_max: float | None = None,
    max_steps: int = 400_000,
) -> Trajectory:
    """Integrate the flow until t_end, annulus exit or step underflow.

    tol is the local-error-per-unit-step bound of the embedded 5(4) pair and
    must lie in [1e-12, 1e-6].  Steps are additionally capped at h_frac * t
    (for t0 > 0) so log-spaced fit windows stay well sampled.
    """
    if not (1e-12 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    r_min, r_max = annulus
    if not (0 <= r_min < r_max):
        raise ValueError("annulus needs 0 <= r_min < r_max")
    az0 = abs(spec.z0)
    if az0 < r_min or az0 > r_max:
        raise ValueError("z0 must start inside the annulus")
    t0, t_end = spec.t_span
    if h_abs_max is None:
        h_abs_max = (t_end - t0) / 64.0 if t_end > t0 else 1.0

    g0k, g0s, g0e = spec.g0.kernel_args()
    g1k, g1s, g1e = spec.g1.kernel_args()
    g2k, g2s, g2e = spec.g2.kernel_args()
    p_s = float(spec.profile.s) if (spec.profile is not None and spec.n > 0) else 1.0

    ts, zs, us, status, n_reject, n_rhs = kernels.rk45_flow(
        complex(spec.z0), float(t0), float(t_end),
        complex(spec.b), int(spec.ell), g0k, g0s, g0e,
        complex(spec.a), int(spec.m), int(spec.n), p_s,
        g1k, g1s, g1e, g2k, g2s, g2e,
        bool(with_u), float(u0), float(tol),
        float(r_min), float(r_max), float(h_frac), float(h_abs_max),
        int(max_steps),
    )
    if status == kernels.STATUS_MAX_STEPS:
        raise RuntimeError(f"integration exceeded {max_steps} accepted steps")
    stats = {"n_accepted": len(ts) - 1, "n_rejected": int(n_reject), "n_rhs": int(n_rhs)}
    return Trajectory(
        times=np.array(ts), points=np.array(zs),
        u=np.array(us) if with_u else None,
        step_stats=stats, terminated=_STATUS_NAMES[status],
    )


# ---------------------------------------------------------------------------
# Closed-form branch solutions of dz/dt = b z^(k+1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchReference:
    """omega_j(t) = tau^(-j) * (c - k b t)^(-1/k) on a fixed branch window."""

    c: complex
    b: complex
    k: int
    j: int = 0
    branch_window: str = WINDOW_HALF_SHIFT

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 <= self.j < self.k:
            raise ValueError("branch index j must lie in 0..k-1")
        if self.branch_window not in (WINDOW_FULL_TURN, WINDOW_HALF_SHIFT):
            raise ValueError(f"unknown branch window {self.branch_window!r}")

    def value(self, t):
        return reference_omega(self, t)


def window_for(b: complex) -> str:
    """Branch window per the sign of Im b: full turn unless b is real."""
    return WINDOW_FULL_TURN if complex(b).imag != 0 else WINDOW_HALF_SHIFT


def _windowed_arg(w: complex, window: str, t: float) -> float:
    a = cmath.phase(w)  # in (-pi, pi]
    if window == WINDOW_FULL_TURN:
        if a == 0.0:
            raise BranchCutError(t)
        if a < 0.0:
            a += 2.0 * math.pi
    else:
        if a == -math.pi / 2.0:
            raise BranchCutError(t)
        if a < -math.pi / 2.0:
            a += 2.0 * math.pi
    return a


def reference_omega(ref: BranchReference, t):
    """The j-th branch value tau^(-j) |w|^(-1/k) exp(-i arg(w)/k), w = c - k b t."""
    tau_mj = cmath.exp(-2j * math.pi * ref.j / ref.k)
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape, dtype=complex)
    for i, ti in enumerate(t_arr):
        w = ref.c - ref.k * ref.b * ti
        a = _windowed_arg(w, ref.branch_window, float(ti))
        out[i] = tau_mj * abs(w) ** (-1.0 / ref.k) * cmath.exp(-1j * a / ref.k)
    return complex(out[0]) if scalar else out


def branch_from_start(b: complex, k: int, z0: complex, t0: float,
                      window: str | None = None) -> BranchReference:
    """Branch reference matching gamma(t0) = z0 (c = z0^(-k) + k b t0)."""
    if window is None:
        window = window_for(b)
    c = z0 ** (-k) + k * b * t0
    best_j, best_d = 0, math.inf
    for j in range(k):
        ref = BranchReference(c=c, b=b, k=k, j=j, branch_window=window)
        d = abs(ref.value(t0) - z0)
        if d < best_d:
            best_j, best_d = j, d
    return BranchReference(c=c, b=b, k=k, j=best_j, branch_window=window)


def measured_epsilon(traj: Trajectory, ref: BranchReference) -> np.ndarray:
    """The averaged perturbation in 1/gamma^k = c - k b t (1 + eps(t))."""
    t = traj.times
    gk = traj.points**ref.k
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = (ref.c - 1.0 / gk) / (ref.k * ref.b * t) - 1.0
    return eps


# ---------------------------------------------------------------------------
# Fits and probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    stderr: float
    n_samples: int

    @property
    def power_law(self) -> bool:
        """Heuristic: a clean power law fits with small slope uncertainty."""
        return self.stderr <= 0.05


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope, its standard error, and R^2 of y against x."""
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        return 0.0, math.inf, 0.0
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    icept = ym - slope * xm
    resid = y - (slope * x + icept)
    ssr = float(np.sum(resid**2))
    sst = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    stderr = math.sqrt(ssr / ((n - 2) * sxx)) if n > 2 else math.inf
    return slope, stderr, r2


def fit_power_law(traj: Trajectory, window: tuple[float, float]) -> PowerLawFit:
    """Slope of log|gamma| against log t on the window; expects >= 50 samples."""
    mask = traj.window_mask(*window)
    t = traj.times[mask]
    g = np.abs(traj.points[mask])
    if len(t) < 50:
        raise ValueError(f"need >= 50 samples in window, got {len(t)}")
    if np.any(g <= 0):
        raise ValueError("all |gamma| must be positive in the fit window")
    slope, stderr, _ = _ols(np.log(t), np.log(g))
    return PowerLawFit(slope=slope, stderr=stderr, n_samples=len(t))


@dataclass(frozen=True)
class LogTrace:
    """Sampled u(t) = log(P(gamma(t)))/2 with finite-difference u'."""

    times: np.ndarray
    u: np.ndarray
    du: np.ndarray
    truncated: bool
    truncated_at: float | None


def flat_log_trace(profile: FlatProfile, traj: Trajectory) -> LogTrace:
    """Trace u = log(P)/2 along the trajectory; truncate where P underflows."""
    vals = np.array([profile.value(abs(z)) for z in traj.points])
    good = vals > 0.0
    if not np.all(good):
        cut = int(np.argmin(good))  # first False
        if cut == 0:
            raise ValueError("profile underflows already at the start point")
        times = traj.times[:cut]
        u = 0.5 * np.log(vals[:cut])
        return LogTrace(times, u, _nonuniform_fd(times, u), True, float(traj.times[cut]))
    u = 0.5 * np.log(vals)
    return LogTrace(traj.times.copy(), u, _nonuniform_fd(traj.times, u), False, None)


def _nonuniform_fd(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Three-point derivative on a nonuniform grid (one-sided at the ends)."""
    n = len(t)
    d = np.empty(n)
    if n < 2:
        d.fill(0.0)
        return d
    d[0] = (y[1] - y[0]) / (t[1] - t[0])
    d[-1] = (y[-1] - y[-2]) / (t[-1] - t[-2])
    if n > 2:
        h1 = t[1:-1] - t[:-2]
        h2 = t[2:] - t[1:-1]
        d[1:-1] = (
            -h2 / (h1 * (h1 + h2)) * y[:-2]
            + (h2 - h1) / (h1 * h2) * y[1:-1]
            + h1 / (h2 * (h1 + h2)) * y[2:]
        )
    return d


# ---------------------------------------------------------------------------
# Growth classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    case_label: str
    growth_class: str
    fitted_exponent: float | None
    predicted_class: str
    predicted_exponent: float | None
    agreement: bool
    status: str  # "ok" | "inconclusive"
    crosscheck_rel_err: float | None
    details: dict

    def to_dict(self) -> dict:
        return {
            "case": self.case_label,
            "growth_class": self.growth_class,
            "fitted_exponent": self.fitted_exponent,
            "predicted_class": self.predicted_class,
            "predicted_exponent": self.predicted_exponent,
            "agreement": self.agreement,
            "status": self.status,
            "crosscheck_rel_err": self.crosscheck_rel_err,
            "details": self.details,
        }


def classify_growth(times: np.ndarray, u: np.ndarray, du: np.ndarray,
                    window: tuple[float, float]) -> tuple[str, float | None, dict]:
    """Deterministic growth label for the sampled u(t).

    Thresholds: bounded when the total variation of u over the whole sample
    is below 1; logarithmic when u regresses on log t with R^2 > 0.99 and
    the power exponent (1 + slope of log|u'| vs log t) is below 0.05; linear
    when u regresses on t with R^2 > 0.99 and the power exponent is within
    0.05 of 1; otherwise power(exponent).
    """
    tv = float(np.sum(np.abs(np.diff(u))))
    details: dict = {"total_variation": tv}
    if tv < 1.0:
        return GROWTH_BOUNDED, None, details

    mask = (times >= window[0]) & (times <= window[1])
    t_w = times[mask]
    u_w = u[mask]
    du_w = du[mask]
    if len(t_w) < 50:
        details["window_samples"] = int(len(t_w))
        return "inconclusive", None, details

    _, _, r2_log = _ols(np.log(t_w), u_w)
    _, _, r2_lin = _ols(t_w, u_w)
    good = np.abs(du_w) > 1e-300
    if np.sum(good) >= 10:
        du_slope, _, _ = _ols(np.log(t_w[good]), np.log(np.abs(du_w[good])))
        p_exp = 1.0 + du_slope
    else:
        p_exp = math.nan
    details.update(r2_log=r2_log, r2_lin=r2_lin, power_exponent=p_exp)

    if r2_log > 0.99 and abs(p_exp) < 0.05:
        return GROWTH_LOGARITHMIC, None, details
    if r2_lin > 0.99 and abs(p_exp - 1.0) <= 0.05:
        return GROWTH_LINEAR, 1.0, details
    return GROWTH_POWER, p_exp, details


def _validate_case(spec: FlowSpec, case_label: str) -> None:
    if case_label not in CASE_PATTERNS:
        raise ScenarioError(f"unknown case label {case_label!r}")
    pat = CASE_PATTERNS[case_label]
    lo, hi = pat.get("ell", (0, None))
    if spec.ell < lo or (hi is not None and spec.ell > hi):
        raise ScenarioError(f"{case_label} expects ell in [{lo}, {hi}], got {spec.ell}")
    if "n" in pat:
        lo, hi = pat["n"]
        if spec.n < lo or (hi is not None and spec.n > hi):
            raise ScenarioError(f"{case_label} expects n in [{lo}, {hi}], got {spec.n}")
    if "m" in pat:
        lo, hi = pat["m"]
        if spec.m < lo or (hi is not None and spec.m > hi):
            raise ScenarioError(f"{case_label} expects m in [{lo}, {hi}], got {spec.m}")
    k = spec.k
    if case_label == "supercritical_decay" and not (k and spec.m > k):
        raise ScenarioError("supercritical_decay expects m/k > 1")
    if case_label == "critical_decay" and not (k and spec.m == k):
        raise ScenarioError("critical_decay expects m = k")
    if case_label == "subcritical_decay" and not (k and 0 < spec.m < k):
        raise ScenarioError("subcritical_decay expects 0 < m < k")


def select_branch_index(a: complex, b: complex, m: int, k: int) -> tuple[int, float]:
    """Index j maximizing cos(arg(a/b) + (k-m)/k arg(-b) - 2 pi m j / k).

    For gcd(m, k) = 1 the k angles are equidistributed, so the maximum is at
    least cos(pi/k) > 0.
    """
    base = cmath.phase(a / b) + (k - m) / k * cmath.phase(-b)
    best_j, best_c = 0, -2.0
    for j in range(k):
        c = math.cos(base - 2.0 * math.pi * m * j / k)
        if c > best_c:
            best_j, best_c = j, c
    return best_j, best_c


def run_growth_scenario(
    spec: FlowSpec,
    case_label: str,
    annulus: tuple[float, float] = (1e-12, 2.0),
    tol: float = 1e-11,
    crosscheck_tol: float = 1e-4,
) -> GrowthReport:
    """Integrate the scenario flow, classify u(t), and check the prediction.

    The log-height u is obtained by co-integrating the hypothesized du/dt
    along the trajectory; the sampled u is then cross-checked by comparing
    its finite differences against the drive evaluated directly on the
    trajectory.  An early-terminating trajectory that leaves too few window
    samples yields status "inconclusive" and never a spurious agreement.
    """
    _validate_case(spec, case_label)
    details: dict = {}

    if case_label == "exponential_spiral" and complex(spec.b).real > 0:
        # Decay happens for t -> -infinity; mirror time (b, a) -> (-b, -a).
        spec = FlowSpec(b=-spec.b, ell=spec.ell, g0=spec.g0, z0=spec.z0,
                        t_span=spec.t_span, a=-spec.a, m=spec.m, n=spec.n,
                        profile=spec.profile, g1=spec.g1, g2=spec.g2)
        details["time_mirrored"] = True

    t0, t_end = spec.t_span
    span = t_end - t0
    long_run = t0 > 0 and t_end >= 100 * t0

    if case_label == "subcritical_decay":
        k = spec.k
        j_star, cosine = select_branch_index(spec.a, spec.b, spec.m, k)
        c = spec.z0 ** (-k) + k * spec.b * t0
        window = window_for(spec.b)
        ref0 = BranchReference(c=c, b=spec.b, k=k, j=0, branch_window=window)
        w0 = ref0.value(t0)
        tau = cmath.exp(2j * math.pi / k)
        z0 = tau ** (-j_star) * w0
        spec = FlowSpec(b=spec.b, ell=spec.ell, g0=spec.g0, z0=z0,
                        t_span=spec.t_span, a=spec.a, m=spec.m, n=spec.n,
                        profile=spec.profile, g1=spec.g1, g2=spec.g2)
        details.update(j_selected=j_star, j_cosine=cosine)
        if cosine <= 0:
            raise ScenarioError("no branch with positive drive cosine; "
                                "check gcd(m, k) = 1")

    # Step caps keep the three-point u' cross-check below 1e-4: its relative
    # truncation error for a power-law drive t**(-q) is q(q+1)/(6 h_frac^-2).
    h_frac = 1.0 / 512.0 if case_label == "flat_weighted" else 1.0 / 256.0
    h_abs_max = span / 512.0 if not long_run else span / 256.0
    if abs(spec.z0) < annulus[0]:
        annulus = (0.0, annulus[1])  # departs from the origin itself

    u0 = 0.0
    if spec.profile is not None:
        pv = spec.profile.value(abs(spec.z0))
        if pv > 0:
            u0 = 0.5 * math.log(pv)

    traj = integrate_flow(spec, annulus=annulus, tol=tol, with_u=True, u0=u0,
                          h_frac=h_frac, h_abs_max=h_abs_max)
    details["terminated"] = traj.terminated
    details["n_samples"] = len(traj)

    if case_label == "subcritical_decay":
        ref = branch_from_start(spec.b, spec.k, spec.z0, t0)
        eps = measured_epsilon(traj, ref)
        details["eps_max"] = float(np.max(np.abs(eps[1:]))) if len(eps) > 1 else 0.0

    # Two-way u' check: finite differences of the integrated u against the
    # drive formula evaluated at the sampled trajectory states.
    t_hi = traj.times[-1]
    cc_lo = t0 + 0.3 * (t_hi - t0) if not long_run else min(50.0 * t0, t0 + 0.5 * (t_hi - t0))
    cc_mask = traj.window_mask(cc_lo, t_hi)
    cc_mask[0] = cc_mask[-1] = False  # one-sided differences are first order
    cc_err = None
    if np.sum(cc_mask) >= 5:
        fd = _nonuniform_fd(traj.times, traj.u)[cc_mask]
        direct = np.array([spec.drive_value(z) for z in traj.points[cc_mask]])
        scale = np.maximum(np.abs(direct), 1e-3 * np.max(np.abs(direct)))
        with np.errstate(invalid="ignore", divide="ignore"):
            cc_err = float(np.max(np.abs(fd - direct) / scale)) if np.max(np.abs(direct)) > 0 else 0.0
        details["crosscheck_window"] = (float(cc_lo), float(t_hi))

    if long_run:
        window = (t_hi / 100.0, t_hi)
    else:
        window = (t0 + 0.02 * (t_hi - t0), t_hi)

    du = _nonuniform_fd(traj.times, traj.u)
    label, exponent, cls_details = classify_growth(traj.times, traj.u, du, window)
    details.update(cls_details)

    predicted = PREDICTED_CLASS[case_label]
    predicted_exponent = None
    if case_label == "subcritical_decay":
        predicted_exponent = 1.0 - spec.m / spec.k

    status = "ok"
    agreement = label == predicted
    # For the decay flows (ell >= 2) the trajectory stays inside any sane
    # annulus until t_end; leaving it early means the run was clipped and
    # cannot support a growth verdict.
    early_exit = spec.ell >= 2 and traj.terminated != "reached_t_end"
    if label == "inconclusive" or early_exit or (
        cc_err is not None and not math.isfinite(cc_err)
    ):
        status = "inconclusive"
        agreement = False
    if agreement and predicted == GROWTH_POWER:
        agreement = exponent is not None and abs(exponent - predicted_exponent) <= 0.05
    if agreement and cc_err is not None and cc_err > crosscheck_tol:
        agreement = False
        details["crosscheck_failed"] = True

    return GrowthReport(
        case_label=case_label, growth_class=label, fitted_exponent=exponent,
        predicted_class=predicted, predicted_exponent=predicted_exponent,
        agreement=agreement, status=status, crosscheck_rel_err=cc_err,
        details=details,
    )


def standard_scenarios() -> list[tuple[str, FlowSpec]]:
    """One concrete, validated parameter set per growth case."""
    s1 = exp_inverse_power(1.0)
    return [
        ("origin_departure", FlowSpec(
            b=1.0, ell=0, g0=linear_perturbation(0.5), z0=0.0,
            t_span=(0.0, 0.8), a=1.0, m=1, n=0, profile=s1)),
        ("exponential_spiral", FlowSpec(
            b=-1.0 + 0.3j, ell=1, g0=linear_perturbation(0.2), z0=0.5,
            t_span=(1.0, 200.0), a=1.0, m=0, n=0, profile=s1)),
        ("flat_weighted", FlowSpec(
            b=-1.0, ell=3, g0=zero_perturbation(), z0=0.9,
            t_span=(1.0, 1.0e4), a=1.0, m=0, n=1, profile=s1)),
        ("supercritical_decay", FlowSpec(
            b=-1.0, ell=3, g0=zero_perturbation(), z0=0.8,
            t_span=(1.0, 1.0e4), a=1.0, m=4, n=0, profile=s1)),
        ("critical_decay", FlowSpec(
            b=-1.0, ell=3, g0=zero_perturbation(), z0=0.5,
            t_span=(1.0, 1.0e4), a=1.0, m=2, n=0, profile=s1)),
        ("constant_drive", FlowSpec(
            b=-1.0, ell=3, g0=zero_perturbation(), z0=0.8,
            t_span=(1.0, 1.0e4), a=-1.0, m=0, n=0, profile=s1,
            g1=power_perturbation(0.1, 3))),
        ("subcritical_decay", FlowSpec(
            b=-1.0, ell=4, g0=zero_perturbation(), z0=0.8,
            t_span=(1.0, 1.0e4), a=1.0, m=1, n=0, profile=s1)),
    ]


# ---------------------------------------------------------------------------
# Circle certificate (the b = 0 rigidity probe)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleCertificate:
    """Outcome of probing Re[(b z^k + g(z)) P'(z)] on circles.

    certified means some probed point has |residual| above the floor
    floor_factor * max|b z^k P'| on its circle, witnessing that the residual
    is not identically zero; inconclusive means P' underflowed everywhere.
    """

    certified: bool
    inconclusive: bool
    witness_radius: float | None
    witness_angle: float | None
    max_residual: float
    floor: float


def circle_certificate(
    b: complex,
    k: int,
    g: Callable[[complex], complex] | None,
    profile: FlatProfile,
    radii: Sequence[float],
    n_angles: int = 256,
    floor_factor: float = 1e-3,
) -> CircleCertificate:
    """Probe the tangency-type residual of h = b z^k + g on circles.

    Excluded input: k = 1 with Re b = 0 (that direction really is tangent
    to every radially symmetric surface, so nothing can be certified).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 1 and complex(b).real == 0 and b != 0:
        raise ScenarioError("excluded: k = 1 with Re b = 0")
    angles = np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False)
    best = CircleCertificate(False, True, None, None, 0.0, 0.0)
    max_res_seen = 0.0
    any_scale = False
    for r in radii:
        dp = profile.derivative(r)
        if dp == 0.0:
            continue
        any_scale = True
        z = r * np.exp(1j * angles)
        p_z = dp * np.conj(z) / (2.0 * r)
        h = b * z**k
        if g is not None:
            h = h + np.array([g(complex(zz)) for zz in z])
        res = np.real(h * p_z)
        scale = float(np.max(np.abs(b) * r**k * np.abs(p_z)))
        floor = floor_factor * scale
        i = int(np.argmax(np.abs(res)))
        max_res_seen = max(max_res_seen, float(np.abs(res[i])))
        if scale > 0 and abs(res[i]) > floor:
            return CircleCertificate(True, False, float(r), float(angles[i]),
                                     float(abs(res[i])), floor)
        best = CircleCertificate(False, False, float(r), None,
                                 float(abs(res[i])), floor)
    if not any_scale:
        return CircleCertificate(False, True, None, None, 0.0, 0.0)
    return CircleCertificate(best.certified, False, best.witness_radius, None,
                             max_res_seen, best.floor)


# ---------------------------------------------------------------------------
# Trajectory CSV and scenario config parsing
# ---------------------------------------------------------------------------


def dump_trajectory_csv(traj: Trajectory, path, profile: FlatProfile | None = None) -> None:
    """Columns t, z_re, z_im, abs_z, u; u falls back to log(P)/2 when absent."""
    u = traj.u
    if u is None and profile is not None:
        vals = np.array([profile.value(abs(z)) for z in traj.points])
        with np.errstate(divide="ignore"):
            u = np.where(vals > 0, 0.5 * np.log(np.where(vals > 0, vals, 1.0)), -np.inf)
    with open(path, "w") as fh:
        fh.write("t,z_re,z_im,abs_z,u\n")
        for i, t in enumerate(traj.times):
            uv = u[i] if u is not None else math.nan
            z = traj.points[i]
            fh.write(f"{t:.17g},{z.real:.17g},{z.imag:.17g},{abs(z):.17g},{uv:.17g}\n")


def _perturbation_from_dict(d: dict | None) -> Perturbation:
    if not d:
        return zero_perturbation()
    kind = d.get("kind", "zero")
    scale = d.get("scale", 0.0)
    if isinstance(scale, (list, tuple)):
        scale = complex(scale[0], scale[1])
    return Perturbation(kind, complex(scale), int(d.get("exponent", 1)))


def flow_spec_from_dict(d: dict) -> FlowSpec:
    """Scenario wire format: {case?, b, a, ell, m, n, k, g0, g1, g2, P, z0, t0, t_end}."""
    def _c(v):
        return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)

    ell = d.get("ell")
    if ell is None and "k" in d:
        ell = int(d["k"]) + 1
    if ell is None:
        raise ValueError("flow spec needs ell (or k)")
    if "k" in d and d.get("ell") is not None and int(d["k"]) + 1 != int(d["ell"]):
        raise ValueError("inconsistent ell and k (need ell = k + 1)")
    profile = None
    if "P" in d and d["P"] is not None:
        p = d["P"]
        profile = exp_inverse_power(float(p.get("s", 1.0))) if p.get("kind") != "zero" else None
    return FlowSpec(
        b=_c(d["b"]), ell=int(ell),
        g0=_perturbation_from_dict(d.get("g0")),
        z0=_c(d.get("z0", 0.5)),
        t_span=(float(d.get("t0", 1.0)), float(d.get("t_end", 1.0e4))),
        a=_c(d.get("a", 1.0)), m=int(d.get("m", 0)), n=int(d.get("n", 0)),
        profile=profile,
        g1=_perturbation_from_dict(d.get("g1")),
        g2=_perturbation_from_dict(d.get("g2")),
    )
