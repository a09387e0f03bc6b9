import json
import math

import numpy as np
import pytest

from crtangent.hypersurface import (
    AnnulusGrid,
    ConstructionError,
    FamilyParams,
    build_custom,
    build_family,
    build_radial,
    dump_samples_csv,
    family_params_from_dict,
    family_params_to_dict,
    random_family_params,
)
from crtangent.series import (
    DomainError,
    TruncatedSeries,
    exp_inverse_power,
    flatness_probe,
    log_spaced_radii,
    zero_profile,
)


@pytest.fixture(scope="module")
def simple_family():
    params = FamilyParams(a=TruncatedSeries([1.0]), alpha=0.0,
                          p=exp_inverse_power(2.0), q=zero_profile())
    return build_family(params)


@pytest.fixture(scope="module")
def twisted_family():
    params = FamilyParams(a=TruncatedSeries([1.0]), alpha=1.0,
                          p=exp_inverse_power(2.0), q=zero_profile())
    return build_family(params)


@pytest.fixture(scope="module")
def radial():
    return build_radial(exp_inverse_power(2.0))


def test_phase_value(simple_family):
    # With a = [1] and q = 0 the phase is -Re(z2); at z2 = 0.3 that is -0.3.
    R = simple_family.internals["R"]
    assert float(R(np.asarray(0.3 + 0j))) == pytest.approx(-0.3, abs=1e-15)


def test_tan_phase_value(simple_family):
    Q0 = simple_family.internals["Q0"]
    assert float(Q0(np.asarray(0.3 + 0j))) == pytest.approx(math.tan(-0.3), abs=1e-12)
    assert math.tan(-0.3) == pytest.approx(-0.309336, abs=1e-6)


def test_positive_factor_closed_form(simple_family):
    # P1(0.3) = exp(-1/0.09 + Re(0.3/i) - log|cos(-0.3)|); the middle term
    # vanishes for real z2 with a = [1].
    assert (0.3 / 1j).real == 0.0
    expected = math.exp(-1.0 / 0.09 - math.log(abs(math.cos(-0.3))))
    P1 = simple_family.internals["P1"]
    assert float(P1(np.asarray(0.3 + 0j))) == pytest.approx(expected, rel=1e-13)


def test_height_vanishes_at_origin(simple_family, twisted_family):
    for m in (simple_family, twisted_family):
        assert m.P(0) == 0.0
        for z2 in (0.1, 0.3j, 0.2 - 0.1j):
            assert m.f(z2, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_height_positive_off_origin(twisted_family):
    for r in np.linspace(0.05, 0.55, 8):
        for th in np.linspace(0, 2 * math.pi, 16, endpoint=False):
            assert twisted_family.P(r * np.exp(1j * th)) > 0


def test_rho_by_back_substitution(twisted_family):
    m = twisted_family
    for z2 in (0.1, 0.2 + 0.1j, 0.3j):
        for t in (0.0, 0.1, -0.2):
            z1 = 1j * t - m.P(z2) - m.f(z2, t)
            assert abs(m.rho(z1, z2)) < 1e-12


def test_rho_at_unit_real_point(twisted_family):
    assert twisted_family.rho(1.0, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_rho_radial_oracle(radial):
    # rho(0.1i, 0.5) = Re(0.1i) + exp(-1/0.25) = exp(-4)
    assert radial.rho(0.1j, 0.5) == pytest.approx(math.exp(-4.0), rel=1e-14)


def test_rho_domain_error(radial):
    with pytest.raises(DomainError):
        radial.rho(0.0, 1.5)


def test_gradient_z1_alpha_zero_slice(simple_family):
    # At t = 0 the z1-gradient is 1/2 + Q0/(2i) for the untwisted family.
    m = simple_family
    for z2 in (0.2, 0.3 + 0.1j):
        pt_z1 = -m.P(z2) - m.f(z2, 0.0)
        g1, _ = m.rho_gradient(pt_z1, z2)
        Q0 = float(m.internals["Q0"](np.asarray(complex(z2))))
        assert g1 == pytest.approx(0.5 + Q0 / 2j, abs=1e-14)


def test_gradient_radial_matches_central_difference(radial):
    z2 = 0.5 + 0j
    h = 1e-6
    fd = ((radial.rho(0.0, z2 + h) - radial.rho(0.0, z2 - h)) / (2 * h)
          - 1j * (radial.rho(0.0, z2 + 1j * h) - radial.rho(0.0, z2 - 1j * h)) / (2 * h)) / 2
    _, g2 = radial.rho_gradient(0.0, z2)
    assert abs(g2 - fd) / abs(fd) < 1e-6


def test_gradient_flat_decay_toward_origin(twisted_family):
    # |rho_z2| at t = 0 decays faster than any power: check three radii by
    # the finite-difference oracle.
    m = twisted_family
    vals = []
    for r in (0.2, 0.1, 0.05):
        _, g2 = m.rho_gradient(-m.P(r), r + 0j)
        vals.append(abs(g2) / r**6)
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences_random(seed):
    rng = np.random.default_rng(seed)
    params = random_family_params(rng)
    m = build_family(params)
    r = rng.uniform(0.1 * m.eps0, 0.6 * m.eps0, 40)
    th = rng.uniform(0, 2 * math.pi, 40)
    z2 = r * np.exp(1j * th)
    t = rng.uniform(m.delta0 / 8, m.delta0 / 2, 40) * rng.choice([-1, 1], 40)
    z1 = 1j * t - m._P(z2) - m._f(z2, t)
    g1, g2 = m.rho_gradient(z1, z2)
    h = 1e-6
    for i in range(40):
        zz1, zz2 = complex(z1[i]), complex(z2[i])
        fd1 = ((m.rho(zz1 + h, zz2) - m.rho(zz1 - h, zz2))
               - 1j * (m.rho(zz1 + 1j * h, zz2) - m.rho(zz1 - 1j * h, zz2))) / (4 * h)
        fd2 = ((m.rho(zz1, zz2 + h) - m.rho(zz1, zz2 - h))
               - 1j * (m.rho(zz1, zz2 + 1j * h) - m.rho(zz1, zz2 - 1j * h))) / (4 * h)
        assert abs(g1[i] - fd1) <= 1e-6 * max(abs(g1[i]), abs(fd1), 1e-4)
        assert abs(g2[i] - fd2) <= 1e-6 * max(abs(g2[i]), abs(fd2), 1e-4)


def test_shear_time_derivative_matches_fd(twisted_family):
    m = twisted_family
    f_t = m.internals["f_t"]
    h = 1e-6
    for z2 in (0.2, 0.3 + 0.2j):
        for t in (0.0, 0.15, -0.1):
            fd = (m.f(z2, t + h) - m.f(z2, t - h)) / (2 * h)
            assert float(f_t(np.asarray(complex(z2)), np.asarray(t))) == pytest.approx(fd, abs=1e-8)


def test_family_height_is_flat(twisted_family):
    m = twisted_family
    radii = log_spaced_radii(0.05 * m.eps0, 0.5 * m.eps0, 8)
    P_z = m.internals["P_z"]
    for n in (4, 8, 12):
        rep = flatness_probe(lambda z: float(m._P(np.asarray(z))), n, radii)
        assert rep.consistent
        rep = flatness_probe(lambda z: abs(complex(P_z(np.asarray(z)))), n, radii)
        assert rep.consistent


def test_construction_rejects_large_phase():
    # a = [3] pushes |R| to 1.8 > 1 on the boundary of the 0.6-disc.
    params = FamilyParams(a=TruncatedSeries([3.0]), alpha=0.0,
                          p=exp_inverse_power(2.0), q=zero_profile())
    with pytest.raises(ConstructionError) as exc:
        build_family(params)
    assert exc.value.z2 is not None


def test_delta0_cap_enforced():
    with pytest.raises(ValueError):
        FamilyParams(a=TruncatedSeries([1.0]), alpha=2.0,
                     p=exp_inverse_power(2.0), q=zero_profile(), delta0=0.3)


def test_sample_points_on_surface(twisted_family):
    grid = AnnulusGrid(0.06, 0.36, 5, 12)
    pts = twisted_family.sample_points(grid, [0.0, 0.1, -0.1])
    assert len(pts) == 5 * 12 * 3
    for pt in pts:
        assert abs(twisted_family.rho(pt.z1, pt.z2)) < 1e-12


def test_sample_radial_base_values(radial):
    pt = radial.surface_point(0.3, 0.0)
    assert pt.z1 == pytest.approx(-math.exp(-1.0 / 0.09), rel=1e-14)
    base = radial.surface_point(0.0, 0.0)
    assert base.z1 == 0.0


def test_custom_model_gradients_match_radial():
    # A custom model wrapping the same radial data must agree through its
    # finite-difference gradients.
    exact = build_radial(exp_inverse_power(2.0))
    custom = build_custom(P=lambda z: math.exp(-1.0 / abs(z) ** 2) if z != 0 else 0.0,
                          Q=lambda z, t: 0.0)
    for z2 in (0.4, 0.3 + 0.2j):
        g1e, g2e = exact.rho_gradient(0.05j, z2)
        g1c, g2c = custom.rho_gradient(0.05j, z2)
        assert g1c == pytest.approx(g1e, abs=1e-9)
        assert abs(g2c - g2e) <= 1e-6 * abs(g2e)


def test_params_json_roundtrip(tmp_path):
    params = FamilyParams(a=TruncatedSeries([1.0, 0.5j]), alpha=1.5,
                          p=exp_inverse_power(2.0), q=zero_profile())
    d = family_params_to_dict(params)
    back = family_params_from_dict(json.loads(json.dumps(d)))
    assert back.a.coeffs == params.a.coeffs
    assert back.alpha == params.alpha
    assert back.eps0 == params.eps0


def test_samples_csv_format(tmp_path, radial):
    pts = radial.sample_points(AnnulusGrid(0.2, 0.5, 2, 4), [0.0])
    path = tmp_path / "samples.csv"
    dump_samples_csv(pts, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "z1_re,z1_im,z2_re,z2_im,t"
    assert len(lines) == 1 + len(pts)


@pytest.mark.parametrize("seed", range(8))
def test_random_family_always_constructible(seed):
    rng = np.random.default_rng(seed)
    params = random_family_params(rng)
    m = build_family(params)
    zg = 0.99 * params.eps0 * np.exp(1j * np.linspace(0, 2 * math.pi, 64))
    assert np.max(np.abs(m.internals["R"](zg))) <= 1.0
