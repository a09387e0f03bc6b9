import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crtangent.series import (
    DomainError,
    ProbeError,
    TruncatedSeries,
    eval_series,
    exp_inverse_power,
    flatness_probe,
    log_spaced_radii,
    transform_coeffs,
    zero_profile,
)


def test_eval_at_zero_is_structurally_zero():
    s = TruncatedSeries([1.0])
    assert eval_series(s, 0) == 0


def test_eval_identity_series():
    s = TruncatedSeries([1.0])
    assert eval_series(s, 0.5) == 0.5


def test_eval_square_series():
    # a(z) = z^2 at z = 0.5+0.5i; oracle: direct complex multiplication
    z = 0.5 + 0.5j
    expected = z * z
    assert expected == 0.5j
    s = TruncatedSeries([0.0, 1.0])
    assert eval_series(s, z) == pytest.approx(expected, abs=1e-16)


def test_eval_outside_radius_raises():
    s = TruncatedSeries([1.0], eval_radius=0.5)
    with pytest.raises(DomainError):
        eval_series(s, 0.9)


def test_transform_div_n_first_coefficient_unchanged():
    s = TruncatedSeries([1.0])
    assert transform_coeffs(s, "div_n").coeffs == (1.0 + 0j,)


def test_transform_div_n_halves_second():
    s = TruncatedSeries([0.0, 2.0])
    assert transform_coeffs(s, "div_n").coeffs == (0j, 1.0 + 0j)


def test_transform_div_in_rotates():
    # 1/(i*1) = -i by complex division
    assert 1.0 / 1j == -1j
    s = TruncatedSeries([1.0])
    assert transform_coeffs(s, "div_in").coeffs == (-1j,)


def test_transform_unknown_mode():
    with pytest.raises(ValueError):
        transform_coeffs(TruncatedSeries([1.0]), "div_nn")


complex_coeffs = st.lists(
    st.tuples(st.floats(-1, 1, allow_subnormal=False), st.floats(-1, 1, allow_subnormal=False)).map(lambda t: complex(*t)),
    min_size=1, max_size=6,
)


@given(st.lists(st.tuples(st.floats(-1, 1, allow_subnormal=False), st.floats(-1, 1, allow_subnormal=False)).map(lambda t: complex(*t)),
                min_size=1, max_size=16))
def test_div_in_roundtrip(coeffs):
    # Multiplying coefficient n of the transformed series by i*n recovers the
    # input: bit-for-bit when n is a power of two (both the quarter turn and
    # the division are then exact), within 2 ulps otherwise, which is the
    # best IEEE division can promise ((x/n)*n != x already for n = 3 at
    # x = 1 - 2^-53).
    s = TruncatedSeries(coeffs)
    t = transform_coeffs(s, "div_in")
    for n, (orig, tc) in enumerate(zip(s.coeffs, t.coeffs), start=1):
        back = tc * (1j * n)
        if n & (n - 1) == 0:
            assert back == orig
        else:
            assert abs(back - orig) <= 2 * np.finfo(float).eps * max(abs(orig), 1e-300)


@settings(max_examples=200)
@given(
    st.lists(st.tuples(st.floats(-1, 1, allow_subnormal=False), st.floats(-1, 1, allow_subnormal=False)).map(lambda t: complex(*t)),
             min_size=1, max_size=16),
    st.lists(st.tuples(st.floats(-1, 1, allow_subnormal=False), st.floats(-1, 1, allow_subnormal=False)).map(lambda t: complex(*t)),
             min_size=1, max_size=16),
    st.floats(0, 0.9), st.floats(0, 2 * math.pi),
)
def test_eval_linearity(c1, c2, r, th):
    s1, s2 = TruncatedSeries(c1), TruncatedSeries(c2)
    z = r * complex(math.cos(th), math.sin(th))
    lhs = eval_series(s1 + s2, z)
    rhs = eval_series(s1, z) + eval_series(s2, z)
    # 4 ulps in the natural condition scale of the two evaluations
    scale = sum(abs(c) * abs(z) ** (n + 1) for n, c in enumerate(s1.coeffs)) \
        + sum(abs(c) * abs(z) ** (n + 1) for n, c in enumerate(s2.coeffs))
    assert abs(lhs - rhs) <= 4 * np.finfo(float).eps * max(scale, 1e-300)


# ---------------------------------------------------------------------------
# Flat profiles
# ---------------------------------------------------------------------------


def test_profile_value_oracle():
    p = exp_inverse_power(2.0)
    assert p.value(0.1) == pytest.approx(math.exp(-100.0), rel=1e-15)
    assert p.value(0.0) == 0.0
    assert zero_profile().value(0.3) == 0.0


def test_profile_derivative_matches_finite_difference():
    p = exp_inverse_power(2.0)
    for r in (0.2, 0.4, 0.7):
        h = 1e-7
        fd = (p.value(r + h) - p.value(r - h)) / (2 * h)
        assert p.derivative(r) == pytest.approx(fd, rel=1e-6)


def test_profile_tiny_radius_underflows_to_zero():
    p = exp_inverse_power(2.0)
    assert p.value(1e-200) == 0.0
    assert p.derivative(1e-200) == 0.0


# ---------------------------------------------------------------------------
# Flatness probe
# ---------------------------------------------------------------------------


def test_probe_flat_bump_consistent():
    # oracle at the deciding radius: exp(-1/0.01)/0.1^10 ~ 3.7e-34
    assert math.exp(-100.0) / 0.1**10 == pytest.approx(3.72e-34, rel=0.01)
    rep = flatness_probe(lambda z: math.exp(-1.0 / abs(z) ** 2) if z != 0 else 0.0,
                         10, [0.3, 0.2, 0.1], bound=1.0)
    assert rep.consistent
    assert rep.verdict == "consistent_with_flat"


def test_probe_cube_order_two_consistent():
    rep = flatness_probe(lambda z: abs(z) ** 3, 2, [0.3, 0.2, 0.1], bound=1.0)
    assert rep.consistent
    assert rep.ratios == pytest.approx((0.3, 0.2, 0.1), rel=1e-12)


def test_probe_cube_order_five_violates_at_smallest():
    rep = flatness_probe(lambda z: abs(z) ** 3, 5, [0.3, 0.2, 0.1], bound=1.0)
    assert rep.verdict == "violates_at"
    assert rep.violation_radius == pytest.approx(0.1)
    # the invariant: the ratio at the flagged radius exceeds the bound
    assert rep.ratios[-1] > 1.0


@pytest.mark.parametrize("n", range(1, 21))
def test_probe_flat_profile_all_orders(n):
    p = exp_inverse_power(2.0)
    radii = log_spaced_radii(1e-2, 0.3, 8)
    rep = flatness_probe(lambda z: p.value(abs(z)), n, radii, bound=1.0)
    assert rep.consistent


@pytest.mark.parametrize("k,n", [(1, 2), (2, 3), (2, 5), (3, 4)])
def test_probe_power_violates_above_its_order(k, n):
    radii = log_spaced_radii(1e-2, 0.3, 6)
    rep = flatness_probe(lambda z: abs(z) ** k, n, radii, bound=1.0)
    assert rep.verdict == "violates_at"


def test_probe_failure_carries_location():
    def bad(z):
        raise ZeroDivisionError("boom")

    with pytest.raises(ProbeError) as exc:
        flatness_probe(bad, 2, [0.1], bound=1.0)
    assert abs(exc.value.z) == pytest.approx(0.1)


def test_probe_rejects_nondecreasing_radii():
    with pytest.raises(ValueError):
        flatness_probe(lambda z: abs(z), 1, [0.1, 0.2], bound=1.0)
