import cmath
import math

import numpy as np
import pytest

from crtangent.flows import (
    BranchCutError,
    BranchReference,
    FlowSpec,
    ScenarioError,
    Trajectory,
    branch_from_start,
    circle_certificate,
    dump_trajectory_csv,
    fit_power_law,
    flat_log_trace,
    flow_spec_from_dict,
    integrate_flow,
    linear_perturbation,
    measured_epsilon,
    power_perturbation,
    reference_omega,
    run_growth_scenario,
    select_branch_index,
    standard_scenarios,
    window_for,
    zero_perturbation,
    WINDOW_FULL_TURN,
    WINDOW_HALF_SHIFT,
)
from crtangent.series import exp_inverse_power


def _exact_traj(times, points):
    return Trajectory(times=np.asarray(times, float), points=np.asarray(points, complex),
                      u=None, step_stats={}, terminated="reached_t_end")


# ---------------------------------------------------------------------------
# Integrator against closed forms
# ---------------------------------------------------------------------------


def test_linear_flow_matches_exponential():
    spec = FlowSpec(b=-1.0, ell=1, z0=1.0, t_span=(0.0, 10.0), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-11)
    assert traj.terminated == "reached_t_end"
    assert np.max(np.abs(traj.points - np.exp(-traj.times))) < 1e-8


def test_separable_flow_matches_reciprocal():
    # dz/dt = -z^2 from 1: gamma = 1/(1+t), i.e. 1/gamma^1 = c - k b t with
    # c = 1, k = 1, b = -1
    spec = FlowSpec(b=-1.0, ell=2, z0=1.0, t_span=(0.0, 100.0), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-11)
    assert np.max(np.abs(traj.points - 1.0 / (1.0 + traj.times))) < 1e-8


def test_origin_departure_small_time_series():
    # dz/dt = 1 + z/2 from 0: gamma = t + t^2/4 + t^3/24 + O(t^4)
    spec = FlowSpec(b=1.0, ell=0, g0=linear_perturbation(0.5), z0=0.0,
                    t_span=(0.0, 0.01), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-12)
    t = traj.times[-1]
    series = t + t**2 / 4 + t**3 / 24
    assert abs(traj.points[-1] - series) < 1e-9
    assert abs(traj.points[-1]) == pytest.approx(t, rel=3e-3)


def test_times_strictly_increasing_and_annulus_respected():
    spec = FlowSpec(b=-1.0, ell=1, z0=1.0, t_span=(0.0, 50.0), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(1e-6, 2.0), tol=1e-10)
    assert traj.terminated == "exited_annulus"
    assert np.all(np.diff(traj.times) > 0)
    inside = np.abs(traj.points[:-1])
    assert np.all((inside >= 1e-6) & (inside <= 2.0))


def test_step_underflow_detected():
    spec = FlowSpec(b=-1.0, ell=1, z0=1.0, t_span=(0.0, 1.0), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-10, h_abs_max=5e-15)
    assert traj.terminated == "step_underflow"


def test_tol_range_enforced():
    spec = FlowSpec(b=-1.0, ell=1, z0=1.0, t_span=(0.0, 1.0), a=1.0, m=1)
    with pytest.raises(ValueError):
        integrate_flow(spec, tol=1e-5)


@pytest.mark.parametrize("b", [-1.0, -1.0 + 1.0j, 1.0j - 0.3])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_integrator_matches_branch_solution(b, k):
    ref = BranchReference(c=1.0, b=b, k=k, j=0, branch_window=window_for(b))
    z0 = ref.value(1.0)
    spec = FlowSpec(b=b, ell=k + 1, z0=z0, t_span=(1.0, 100.0), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-11)
    om = ref.value(traj.times)
    assert np.max(np.abs(traj.points - om) / np.abs(om)) < 1e-6


# ---------------------------------------------------------------------------
# Branch references
# ---------------------------------------------------------------------------


def test_omega_simple_pole():
    ref = BranchReference(c=1.0, b=-1.0, k=1, j=0, branch_window=WINDOW_HALF_SHIFT)
    assert reference_omega(ref, 3.0) == pytest.approx(0.25, abs=1e-15)


def test_omega_second_branch():
    # k=2, j=1, c=1, b=-1, t=3: tau = e^{i pi}, omega_1 = -7^{-1/2}
    ref = BranchReference(c=1.0, b=-1.0, k=2, j=1, branch_window=WINDOW_HALF_SHIFT)
    assert reference_omega(ref, 3.0) == pytest.approx(-1.0 / math.sqrt(7.0), abs=1e-14)


def test_omega_on_declared_sheet():
    # c=0, b=i, t=1: w = -2i has arg 3pi/2 in the full-turn window
    ref = BranchReference(c=0.0, b=1.0j, k=2, j=0, branch_window=WINDOW_FULL_TURN)
    expected = 2.0 ** (-0.5) * cmath.exp(-1j * (3 * math.pi / 2) / 2)
    assert reference_omega(ref, 1.0) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(2 ** (-0.5) * cmath.exp(-3j * math.pi / 4), abs=1e-15)


def test_omega_branch_cut_error():
    # b real negative, c real: w = 1 + kt crosses nothing; force the cut by
    # choosing the full-turn window where the cut lies on [0, inf)
    ref = BranchReference(c=1.0, b=-1.0, k=1, j=0, branch_window=WINDOW_FULL_TURN)
    with pytest.raises(BranchCutError):
        reference_omega(ref, 3.0)


def test_omega_solves_the_flow():
    # (omega_j)' = b omega_j^{k+1} for every branch, checked by differences
    for k in (1, 2, 3):
        for j in range(k):
            ref = BranchReference(c=1.0, b=-1.0 + 0.5j, k=k, j=j,
                                  branch_window=WINDOW_FULL_TURN)
            for t in (1.0, 5.0, 40.0):
                h = 1e-6 * t
                fd = (ref.value(t + h) - ref.value(t - h)) / (2 * h)
                rhs = (-1.0 + 0.5j) * ref.value(t) ** (k + 1)
                assert abs(fd - rhs) <= 1e-7 * abs(rhs)


def test_omega_continuity_along_path():
    ref = BranchReference(c=1.0, b=-1.0 + 1.0j, k=2, j=0, branch_window=WINDOW_FULL_TURN)
    ts = np.linspace(1.0, 100.0, 4000)
    vals = ref.value(ts)
    dt = ts[1] - ts[0]
    deriv = (-1.0 + 1.0j) * vals**3
    jumps = np.abs(np.diff(vals))
    assert np.all(jumps < 10.0 * np.abs(deriv[:-1]) * dt)


def test_arg_converges_to_arg_minus_b():
    for b, c in ((-1.0 + 0.5j, 2.0), (0.3 + 1.0j, 1.0 - 1.0j)):
        k = 2
        t = 1e4 * (1 + abs(c) / abs(k * b))
        w = c - k * b * t
        diff = abs(cmath.phase(w) - cmath.phase(-b))
        diff = min(diff, 2 * math.pi - diff)
        assert diff < 1e-3


def test_branch_from_start_identifies_branch():
    b, k = -1.0, 3
    ref0 = BranchReference(c=2.0, b=b, k=k, j=2, branch_window=WINDOW_HALF_SHIFT)
    z0 = ref0.value(1.5)
    found = branch_from_start(b, k, z0, 1.5)
    assert found.j == 2
    assert found.value(1.5) == pytest.approx(z0, rel=1e-12)


# ---------------------------------------------------------------------------
# Power-law fits
# ---------------------------------------------------------------------------


def test_fit_reciprocal_slope():
    t = np.geomspace(10.0, 1000.0, 200)
    traj = _exact_traj(t, 1.0 / (1.0 + t))
    fit = fit_power_law(traj, (10.0, 1000.0))
    assert fit.slope == pytest.approx(-1.0, abs=0.01)
    assert fit.power_law


def test_fit_half_slope_on_exact_branch():
    ref = BranchReference(c=1.0, b=-1.0, k=2, j=0, branch_window=WINDOW_HALF_SHIFT)
    t = np.geomspace(100.0, 1e4, 300)
    traj = _exact_traj(t, ref.value(t))
    fit = fit_power_law(traj, (100.0, 1e4))
    assert fit.slope == pytest.approx(-0.5, abs=0.005)


def test_fit_flags_exponential_as_non_power_law():
    t = np.geomspace(1.0, 20.0, 120)
    traj = _exact_traj(t, np.exp(-t))
    fit = fit_power_law(traj, (1.0, 20.0))
    assert fit.slope < -1.0
    assert fit.stderr > 0.05
    assert not fit.power_law


def test_fit_requires_enough_samples():
    t = np.geomspace(10.0, 100.0, 20)
    traj = _exact_traj(t, 1.0 / t)
    with pytest.raises(ValueError):
        fit_power_law(traj, (10.0, 100.0))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_perturbed_flow_slope_within_two_percent(k):
    spec = FlowSpec(b=-1.0, ell=k + 1, g0=linear_perturbation(0.5), z0=0.5,
                    t_span=(1.0, 1e4), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-11)
    fit = fit_power_law(traj, (100.0, 1e4))
    assert abs(fit.slope - (-1.0 / k)) <= 0.02 / k


def test_measured_epsilon_smallness():
    spec = FlowSpec(b=-1.0, ell=3, g0=linear_perturbation(0.5), z0=0.5,
                    t_span=(1.0, 1e4), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-11)
    ref = branch_from_start(-1.0, 2, 0.5, 1.0)
    eps = measured_epsilon(traj, ref)
    assert np.max(np.abs(eps[1:])) < 0.1


# ---------------------------------------------------------------------------
# Log trace of flat profiles along trajectories
# ---------------------------------------------------------------------------


def test_log_trace_reciprocal_closed_form():
    t = np.geomspace(0.1, 5.0, 100)
    traj = _exact_traj(t, 1.0 / (1.0 + t))
    trace = flat_log_trace(exp_inverse_power(2.0), traj)
    assert not trace.truncated
    assert np.allclose(trace.u, -0.5 * (1.0 + t) ** 2, rtol=1e-12)


def test_log_trace_exponential_truncates():
    # P(e^{-t}) = exp(-e^{2t}) underflows once e^{2t} > ~745
    t = np.linspace(0.0, 5.0, 200)
    traj = _exact_traj(t, np.exp(-t))
    trace = flat_log_trace(exp_inverse_power(2.0), traj)
    assert trace.truncated
    assert trace.truncated_at is not None
    assert np.allclose(trace.u, -0.5 * np.exp(2 * trace.times), rtol=1e-10)


def test_log_trace_exponent_along_branch_flow():
    # P = exp(-1/|z|), gamma from the k=2 flow: u ~ -(2t)^{1/2}/2
    ref = BranchReference(c=1.0, b=-1.0, k=2, j=0, branch_window=WINDOW_HALF_SHIFT)
    t = np.geomspace(100.0, 1e4, 200)
    traj = _exact_traj(t, ref.value(t))
    trace = flat_log_trace(exp_inverse_power(1.0), traj)
    slope = np.polyfit(np.log(t), np.log(-trace.u), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("s", [1.0, 2.0])
@pytest.mark.parametrize("n", [1, 4, 10])
def test_flat_domination_monotone(s, n):
    # P(gamma(t))/|gamma(t)|^n decays monotonically into the origin
    spec = FlowSpec(b=-1.0, ell=2, z0=0.5, t_span=(1.0, 1e3), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-11)
    mask = traj.window_mask(10.0, 1e3)
    g = np.abs(traj.points[mask])
    profile = exp_inverse_power(s)
    vals = np.array([profile.value(r) for r in g]) / g**n
    assert np.all(np.diff(vals) <= 0)
    assert vals[-1] < vals[0] or vals[0] == 0.0


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


def test_flow_spec_exclusions():
    with pytest.raises(ScenarioError):
        FlowSpec(b=1.0j, ell=1, z0=0.5, a=1.0, m=1)
    with pytest.raises(ScenarioError):
        FlowSpec(b=-1.0, ell=2, z0=0.5, a=1.0j, m=0)


def test_case_pattern_validation():
    spec = FlowSpec(b=-1.0, ell=3, z0=0.5, a=1.0, m=2, n=0)
    with pytest.raises(ScenarioError):
        run_growth_scenario(spec, "flat_weighted")  # needs n >= 1
    with pytest.raises(ScenarioError):
        run_growth_scenario(spec, "supercritical_decay")  # needs m > k
    with pytest.raises(ScenarioError):
        run_growth_scenario(spec, "no_such_case")


@pytest.mark.parametrize("label,spec", standard_scenarios())
def test_standard_scenarios_agree(label, spec):
    report = run_growth_scenario(spec, label)
    assert report.status == "ok"
    assert report.agreement, report.to_dict()
    assert report.crosscheck_rel_err is not None
    assert report.crosscheck_rel_err <= 1e-4


def test_mirrored_spiral():
    # Re b > 0 runs on the mirrored time side and still classifies linear
    spec = FlowSpec(b=1.0 - 0.3j, ell=1, g0=zero_perturbation(), z0=0.5,
                    t_span=(1.0, 200.0), a=1.0, m=0, n=0,
                    profile=exp_inverse_power(1.0))
    report = run_growth_scenario(spec, "exponential_spiral")
    assert report.details.get("time_mirrored")
    assert report.agreement


def test_subcritical_branch_selection_positive_cosine():
    # tau^m a primitive root: the five angles are equidistributed
    j, cosine = select_branch_index(1.0, -1.0, 2, 5)
    assert cosine > 0
    for m, k in ((1, 2), (2, 3), (3, 4), (5, 12)):
        _, c = select_branch_index(0.7 + 0.2j, -1.0 - 0.4j, m, k)
        assert c > 0


def test_early_termination_is_inconclusive():
    # Annulus so tight the trajectory exits before the fit window fills
    spec = FlowSpec(b=-1.0, ell=3, z0=0.5, t_span=(1.0, 1e4), a=1.0, m=2, n=0,
                    profile=exp_inverse_power(1.0))
    report = run_growth_scenario(spec, "critical_decay", annulus=(0.2, 2.0))
    assert report.status == "inconclusive"
    assert not report.agreement


# ---------------------------------------------------------------------------
# Circle certificates
# ---------------------------------------------------------------------------


def test_certificate_constant_direction():
    # k=0, b=1: residual = Re[P'] is positive on the real axis; oracle:
    # the radial derivative of exp(-1/r^2) at r=0.5 is 16 e^{-4}, and the
    # Wirtinger factor halves it.
    profile = exp_inverse_power(2.0)
    assert profile.derivative(0.5) == pytest.approx(16.0 * math.exp(-4.0), rel=1e-12)
    cert = circle_certificate(1.0, 0, None, profile, [0.5])
    assert cert.certified
    assert cert.max_residual > 0.1 * profile.derivative(0.5)


@pytest.mark.parametrize("k", [0, 2, 3])
def test_certificate_nonzero_b(k):
    cert = circle_certificate(0.7 - 0.2j, k, None, exp_inverse_power(2.0),
                              [0.4, 0.5, 0.6])
    assert cert.certified


def test_certificate_excluded_direction():
    with pytest.raises(ScenarioError):
        circle_certificate(1.0j, 1, None, exp_inverse_power(2.0), [0.5])


def test_certificate_b_zero_below_floor():
    cert = circle_certificate(0.0, 2, lambda z: 0.01 * z**3,
                              exp_inverse_power(2.0), [0.5])
    assert not cert.certified
    assert not cert.inconclusive


def test_certificate_underflow_inconclusive():
    cert = circle_certificate(1.0, 2, None, exp_inverse_power(2.0), [1e-4])
    assert cert.inconclusive


# ---------------------------------------------------------------------------
# Wire formats
# ---------------------------------------------------------------------------


def test_trajectory_csv(tmp_path):
    spec = FlowSpec(b=-1.0, ell=1, z0=1.0, t_span=(0.0, 1.0), a=1.0, m=1)
    traj = integrate_flow(spec, annulus=(0.0, 2.0), tol=1e-10)
    path = tmp_path / "traj.csv"
    dump_trajectory_csv(traj, path, profile=exp_inverse_power(1.0))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,z_re,z_im,abs_z,u"
    assert len(lines) == 1 + len(traj)


def test_flow_spec_from_dict():
    spec = flow_spec_from_dict({
        "case": "critical_decay", "b": [-1.0, 0.0], "a": [1.0, 0.0],
        "k": 2, "m": 2, "n": 0, "g0": {"kind": "zero"},
        "P": {"kind": "exp_inverse_power", "s": 1.0},
        "z0": [0.5, 0.0], "t0": 1.0, "t_end": 1e4,
    })
    assert spec.ell == 3
    assert spec.k == 2
    assert spec.profile.s == 1.0
    with pytest.raises(ValueError):
        flow_spec_from_dict({"b": [1, 0], "ell": 3, "k": 3})
