"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Two inner loops dominate runtime: the adaptive Runge-Kutta stepper for
complex scalar flows (sequential, cannot vectorize over time) and the
entry fill of the collocation matrix (rows x monomial columns).  Both are
compiled with ``@njit`` when numba is importable; setting the environment
variable ``CRTANGENT_NO_NUMBA=1`` forces the numpy/Python fallback, which
implements the identical arithmetic.  ``benchmarks/benchmark_kernels.py``
times the two paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_DISABLED = os.environ.get("CRTANGENT_NO_NUMBA", "").lower() in ("1", "true", "yes")

try:
    if _ENV_DISABLED:
        raise ImportError("numba disabled via CRTANGENT_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return decorator


# Flow termination status codes shared by both paths.
STATUS_REACHED_END = 0
STATUS_EXITED_ANNULUS = 1
STATUS_STEP_UNDERFLOW = 2
STATUS_MAX_STEPS = 3

# Perturbation kinds for the parametric right-hand sides.
PERT_ZERO = 0
PERT_POWER = 1  # scale * z**exponent


def _rk45_flow_py(
    z0,
    t0,
    t_end,
    b,
    ell,
    g0_kind,
    g0_scale,
    g0_exp,
    a,
    m,
    n_pow,
    p_s,
    g1_kind,
    g1_scale,
    g1_exp,
    g2_kind,
    g2_scale,
    g2_exp,
    with_u,
    u0,
    tol,
    r_min,
    r_max,
    h_frac,
    h_abs_max,
    max_steps,
):
    """Dormand-Prince 5(4) stepper for dz/dt = b * z**ell * (1 + g0(z)).

    Optionally co-integrates the hypothesized log-height
    du/dt = -P(z)**n_pow * (Re[a z**m] - g2(z)) - g1(z) with the flat weight
    P(z) = exp(-|z|**(-p_s)).  A step h is accepted when the embedded error
    estimate satisfies err <= tol * h in the blended relative scale of the
    state (local error per unit step).  When t0 > 0, steps are also capped at
    h_frac * t so that log-spaced fit windows keep enough samples.
    """
    ts = np.empty(max_steps + 1, dtype=np.float64)
    zs = np.empty(max_steps + 1, dtype=np.complex128)
    us = np.empty(max_steps + 1, dtype=np.float64)

    def g0val(z):
        if g0_kind == PERT_ZERO:
            return 0.0 + 0.0j
        return g0_scale * z**g0_exp

    def fz(z):
        return b * z**ell * (1.0 + g0val(z))

    def fu(z):
        if not with_u:
            return 0.0
        drive = (a * z**m).real
        if g2_kind != PERT_ZERO:
            drive -= (g2_scale * z**g2_exp).real
        if n_pow > 0:
            az = abs(z)
            if az <= 0.0:
                weight = 0.0
            else:
                lx = -p_s * math.log(az)  # log of |z|**(-p_s)
                if lx > 700.0:
                    weight = 0.0
                else:
                    weight = math.exp(-n_pow * math.exp(lx))
        else:
            weight = 1.0
        val = -weight * drive
        if g1_kind != PERT_ZERO:
            val -= (g1_scale * z**g1_exp).real
        return val

    t = t0
    z = z0
    u = u0
    ts[0] = t
    zs[0] = z
    us[0] = u
    count = 1
    n_reject = 0
    n_rhs = 0

    span = t_end - t0
    if span <= 0.0:
        return ts[:1], zs[:1], us[:1], STATUS_REACHED_END, 0, 0

    h = span * 1e-6
    if h > h_abs_max:
        h = h_abs_max

    status = STATUS_REACHED_END
    while t < t_end:
        if t0 > 0.0:
            cap = h_frac * (t if t > t0 else t0)
            if h > cap:
                h = cap
        if h > h_abs_max:
            h = h_abs_max
        if h > t_end - t:
            h = t_end - t
        if h < 1e-14:
            status = STATUS_STEP_UNDERFLOW
            break

        k1z = fz(z)
        k1u = fu(z)
        y = z + h * 0.2 * k1z
        k2z = fz(y)
        k2u = fu(y)
        y = z + h * (3.0 / 40.0 * k1z + 9.0 / 40.0 * k2z)
        k3z = fz(y)
        k3u = fu(y)
        y = z + h * (44.0 / 45.0 * k1z - 56.0 / 15.0 * k2z + 32.0 / 9.0 * k3z)
        k4z = fz(y)
        k4u = fu(y)
        y = z + h * (
            19372.0 / 6561.0 * k1z
            - 25360.0 / 2187.0 * k2z
            + 64448.0 / 6561.0 * k3z
            - 212.0 / 729.0 * k4z
        )
        k5z = fz(y)
        k5u = fu(y)
        y = z + h * (
            9017.0 / 3168.0 * k1z
            - 355.0 / 33.0 * k2z
            + 46732.0 / 5247.0 * k3z
            + 49.0 / 176.0 * k4z
            - 5103.0 / 18656.0 * k5z
        )
        k6z = fz(y)
        k6u = fu(y)
        z_new = z + h * (
            35.0 / 384.0 * k1z
            + 500.0 / 1113.0 * k3z
            + 125.0 / 192.0 * k4z
            - 2187.0 / 6784.0 * k5z
            + 11.0 / 84.0 * k6z
        )
        u_new = u + h * (
            35.0 / 384.0 * k1u
            + 500.0 / 1113.0 * k3u
            + 125.0 / 192.0 * k4u
            - 2187.0 / 6784.0 * k5u
            + 11.0 / 84.0 * k6u
        )
        k7z = fz(z_new)
        k7u = fu(z_new)
        n_rhs += 7

        err_z = h * abs(
            71.0 / 57600.0 * k1z
            - 71.0 / 16695.0 * k3z
            + 71.0 / 1920.0 * k4z
            - 17253.0 / 339200.0 * k5z
            + 22.0 / 525.0 * k6z
            - 1.0 / 40.0 * k7z
        )
        sc = abs(z)
        if abs(z_new) > sc:
            sc = abs(z_new)
        if sc < 1e-30:
            sc = 1e-30
        err = err_z / sc
        if with_u:
            err_u = h * abs(
                71.0 / 57600.0 * k1u
                - 71.0 / 16695.0 * k3u
                + 71.0 / 1920.0 * k4u
                - 17253.0 / 339200.0 * k5u
                + 22.0 / 525.0 * k6u
                - 1.0 / 40.0 * k7u
            )
            sc_u = 1.0
            if abs(u) > sc_u:
                sc_u = abs(u)
            if abs(u_new) > sc_u:
                sc_u = abs(u_new)
            if err_u / sc_u > err:
                err = err_u / sc_u

        target = tol * h
        if err <= target:
            t = t + h
            z = z_new
            u = u_new
            ts[count] = t
            zs[count] = z
            us[count] = u
            count += 1
            az = abs(z)
            if az < r_min or az > r_max:
                status = STATUS_EXITED_ANNULUS
                break
            if count > max_steps:
                status = STATUS_MAX_STEPS
                break
        else:
            n_reject += 1

        if err > 0.0:
            fac = 0.9 * (target / err) ** 0.2
            if fac < 0.2:
                fac = 0.2
            elif fac > 5.0:
                fac = 5.0
            h = h * fac
        else:
            h = h * 5.0

    return ts[:count], zs[:count], us[:count], status, n_reject, n_rhs


def _assemble_entries_py(z1, z2, g1, g2, jk):
    """Fill collocation entries and their modulus bounds, row by row.

    Column layout per monomial pair (j,k): [Re a, Im a, Re b, Im b] where the
    a-columns pair with g1 = rho_z1 and the b-columns with g2 = rho_z2; the
    Im column carries Re[i * g * w] = -Im[g * w].  The modulus matrix M holds
    |g * w| per entry, the cancellation-free scale of each contribution.
    """
    nrows = z1.shape[0]
    npairs = jk.shape[0]
    A = np.empty((nrows, 4 * npairs), dtype=np.float64)
    M = np.empty((nrows, 4 * npairs), dtype=np.float64)
    for i in range(nrows):
        for c in range(npairs):
            w = z1[i] ** jk[c, 0] * z2[i] ** jk[c, 1]
            w1 = g1[i] * w
            w2 = g2[i] * w
            A[i, 4 * c] = w1.real
            A[i, 4 * c + 1] = -w1.imag
            A[i, 4 * c + 2] = w2.real
            A[i, 4 * c + 3] = -w2.imag
            aw1 = abs(w1)
            aw2 = abs(w2)
            M[i, 4 * c] = aw1
            M[i, 4 * c + 1] = aw1
            M[i, 4 * c + 2] = aw2
            M[i, 4 * c + 3] = aw2
    return A, M


def _assemble_entries_np(z1, z2, g1, g2, jk):
    """Vectorized fallback: outer powers then interleaved column blocks."""
    W = z1[:, None] ** jk[None, :, 0] * z2[:, None] ** jk[None, :, 1]
    W1 = g1[:, None] * W
    W2 = g2[:, None] * W
    nrows, npairs = W.shape
    A = np.empty((nrows, 4 * npairs), dtype=np.float64)
    M = np.empty((nrows, 4 * npairs), dtype=np.float64)
    A[:, 0::4] = W1.real
    A[:, 1::4] = -W1.imag
    A[:, 2::4] = W2.real
    A[:, 3::4] = -W2.imag
    aw1 = np.abs(W1)
    aw2 = np.abs(W2)
    M[:, 0::4] = aw1
    M[:, 1::4] = aw1
    M[:, 2::4] = aw2
    M[:, 3::4] = aw2
    return A, M


if NUMBA_ENABLED:
    rk45_flow = njit(cache=True)(_rk45_flow_py)
    assemble_entries = njit(cache=True)(_assemble_entries_py)
else:
    rk45_flow = _rk45_flow_py
    assemble_entries = _assemble_entries_np
