"""Numerical laboratory for tangential holomorphic vector fields on
infinite-type hypersurfaces in C^2: explicit model construction, tangency
verification at machine precision, flow asymptotics, and collocation-based
measurement of the tangent-field dimension."""

from .series import (
    DomainError,
    FlatnessReport,
    FlatProfile,
    ProbeError,
    TruncatedSeries,
    eval_series,
    exp_inverse_power,
    flatness_probe,
    log_spaced_radii,
    transform_coeffs,
    zero_profile,
)
from .hypersurface import (
    AnnulusGrid,
    ConstructionError,
    FamilyParams,
    HypersurfaceModel,
    SurfacePoint,
    build_custom,
    build_family,
    build_radial,
    dump_samples_csv,
    family_params_from_dict,
    family_params_to_dict,
    load_family_params,
    save_family_params,
)
from .fields import (
    AnalyticVectorField,
    PolyVectorField,
    combine_fields,
    expm1_ratio,
    family_tangent_field,
    field_from_dict,
    field_to_dict,
    identity_residuals,
    load_field,
    rotation_field,
    save_field,
    tangency_residual,
    tangency_residuals,
    taylor_of_field,
)
from .flows import (
    BranchCutError,
    BranchReference,
    CircleCertificate,
    FlowSpec,
    GrowthReport,
    Perturbation,
    PowerLawFit,
    ScenarioError,
    Trajectory,
    branch_from_start,
    circle_certificate,
    classify_growth,
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
)
from .colloc import (
    AssemblyError,
    CollocationReport,
    CollocationSystem,
    SliceReport,
    assemble,
    basis_angle,
    coordinate_residuals,
    dump_matrix_csv,
    flatten_poly_field,
    nullspace,
    reference_residual,
    slice_checks,
    total_degree_pairs,
    unflatten_to_poly_field,
)

__version__ = "0.1.0"
