"""Batch front end: run verification suites, flows, scenarios and dimension
measurements from JSON configs and emit machine-readable reports.

No numerical logic lives here; every command is a thin dispatcher over the
library modules.  Configs use a strict schema (unknown keys are rejected
with their path) and reports are written with a canonical float format so
identical configs produce byte-identical JSON.

Exit codes: 0 all configured gates pass, 1 usage/config/IO error, 2 gate
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import colloc, fields, flows, hypersurface, series

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GATE = 2

TOLERANCE_PROFILES = {
    "default": {
        "identities": 1e-10,
        "tangency": 1e-9,
        "gradient": 1e-6,
        "gap_requirement": 1e4,
        "threshold": 1e-8,
    },
    "strict": {
        "identities": 1e-11,
        "tangency": 1e-10,
        "gradient": 1e-7,
        "gap_requirement": 1e5,
        "threshold": 1e-9,
    },
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Canonical JSON (17 significant digits, sorted keys, deterministic)
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(float(x), ".17g")


def canonical_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in sorted(obj):
            items.append(f'{pad}  "{key}": {canonical_json(obj[key], indent + 1)}')
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}  {canonical_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return canonical_json(list(obj), indent)
    if isinstance(obj, complex):
        return canonical_json([obj.real, obj.imag], indent)
    raise TypeError(f"cannot serialize {type(obj)!r}")


# ---------------------------------------------------------------------------
# Strict schema validation
# ---------------------------------------------------------------------------

_PROFILE_SCHEMA = {"kind": str, "s": (int, float)}
_GRID_SCHEMA = {"r_min": (int, float), "r_max": (int, float), "n_radii": int, "n_angles": int}
_PERT_SCHEMA = {"kind": str, "scale": (list, int, float), "exponent": int}
_FLOW_SCHEMA = {
    "b": list, "a": list, "ell": int, "k": int, "m": int, "n": int,
    "g0": _PERT_SCHEMA, "g1": _PERT_SCHEMA, "g2": _PERT_SCHEMA,
    "P": _PROFILE_SCHEMA, "z0": list, "t0": (int, float), "t_end": (int, float),
}
_MODEL_SCHEMA = {
    "type": str, "series": list, "alpha": (int, float),
    "p": _PROFILE_SCHEMA, "q": _PROFILE_SCHEMA,
    "eps0": (int, float), "delta0": (int, float),
}

SCHEMAS = {
    "verify": {
        "command": str,
        "model": _MODEL_SCHEMA,
        "grid": _GRID_SCHEMA,
        "t_values": list,
        "checks": list,
        "tangency_points": int,
        "gradient_points": int,
    },
    "sample": {
        "command": str,
        "model": _MODEL_SCHEMA,
        "grid": _GRID_SCHEMA,
        "t_values": list,
    },
    "flow": {
        "command": str,
        "flow": _FLOW_SCHEMA,
        "annulus": {"r_min": (int, float), "r_max": (int, float)},
        "tol": (int, float),
        "fit_window": list,
        "expected_slope": (int, float),
        "slope_tolerance": (int, float),
        "compare_reference": bool,
        "max_reference_deviation": (int, float),
    },
    "scenario": {
        "command": str,
        "standard": bool,
        "scenarios": list,
        "crosscheck_tol": (int, float),
    },
    "dim": {
        "command": str,
        "model": _MODEL_SCHEMA,
        "degree": int,
        "grid": _GRID_SCHEMA,
        "t_values": list,
        "threshold": (int, float),
        "expect_null_dim": int,
        "max_null_dim": int,
        "dump_matrix": bool,
        "sweep": {"count": int, "max_order": int, "alpha_range": list},
    },
    "flatness": {
        "command": str,
        "model": _MODEL_SCHEMA,
        "profile": _PROFILE_SCHEMA,
        "orders": list,
        "radii": {"r_min": (int, float), "r_max": (int, float), "count": int},
        "bound": (int, float),
        "targets": list,
        "expect": str,
    },
}

_SCENARIO_ITEM_SCHEMA = dict(_FLOW_SCHEMA, case=str)


def _validate(obj, schema, path="config"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    for key, val in obj.items():
        if key not in schema:
            raise ConfigError(f"{path}: unknown key {key!r}")
        want = schema[key]
        if isinstance(want, dict):
            _validate(val, want, f"{path}.{key}")
        elif not isinstance(val, want):
            raise ConfigError(f"{path}.{key}: expected {want}, got {type(val).__name__}")


def validate_config(cfg: dict) -> str:
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be an object")
    command = cfg.get("command")
    if command not in SCHEMAS:
        raise ConfigError(f"config.command: expected one of {sorted(SCHEMAS)}, got {command!r}")
    _validate(cfg, SCHEMAS[command])
    if command == "scenario":
        for i, item in enumerate(cfg.get("scenarios", [])):
            _validate(item, _SCENARIO_ITEM_SCHEMA, f"config.scenarios[{i}]")
    return command


# ---------------------------------------------------------------------------
# Model building from config
# ---------------------------------------------------------------------------


def _model_from_config(d: dict) -> hypersurface.HypersurfaceModel:
    kind = d.get("type", "family")
    if kind == "family":
        params = hypersurface.family_params_from_dict(d)
        return hypersurface.build_family(params)
    if kind == "radial":
        p = d.get("p", {"kind": "exp_inverse_power", "s": 2.0})
        profile = series.exp_inverse_power(float(p.get("s", 2.0)))
        return hypersurface.build_radial(profile, eps0=float(d.get("eps0", 1.0)),
                                         delta0=float(d.get("delta0", 1.0)))
    raise ConfigError(f"config.model.type: unsupported {kind!r}")


def _default_t_values(model, given):
    if given is not None:
        return [float(t) for t in given]
    d = min(model.delta0, 1.0)
    return [0.0, 0.1 * d, -0.1 * d, 0.2 * d, -0.2 * d]


def _grid_from_config(model, cfg_grid, n_radii=8, n_angles=32):
    if cfg_grid is None:
        return hypersurface.AnnulusGrid(0.1 * model.eps0, 0.6 * model.eps0, n_radii, n_angles)
    return hypersurface.AnnulusGrid(
        float(cfg_grid.get("r_min", 0.1 * model.eps0)),
        float(cfg_grid.get("r_max", 0.6 * model.eps0)),
        int(cfg_grid.get("n_radii", n_radii)),
        int(cfg_grid.get("n_angles", n_angles)),
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_verify(cfg, out_dir, stamp, tols, jobs):
    model = _model_from_config(cfg.get("model", _DEFAULT_FAMILY))
    grid = _grid_from_config(model, cfg.get("grid"))
    t_values = _default_t_values(model, cfg.get("t_values"))
    checks = cfg.get("checks", ["identities", "tangency", "gradients"])
    summary = {"command": "verify", "checks": {}, "model": cfg.get("model", _DEFAULT_FAMILY)}
    gates_ok = True

    z1, z2, tt, _ = model.sample_arrays(grid, t_values)

    if "identities" in checks and model.provenance == "family":
        res = fields.identity_residuals(model, z2, tt)
        csv_path = out_dir / f"verify-{stamp}.csv"
        with open(csv_path, "w") as fh:
            fh.write("z2_re,z2_im,t,res_i,res_ii,res_iii,res_iv,res_v\n")
            for i in range(len(z2)):
                row = ",".join(format(x, ".17g") for x in res[i])
                fh.write(f"{z2[i].real:.17g},{z2[i].imag:.17g},{tt[i]:.17g},{row}\n")
        worst = float(res.max())
        ok = worst < tols["identities"]
        gates_ok &= ok
        summary["checks"]["identities"] = {
            "max_residual": worst, "tolerance": tols["identities"], "pass": ok,
            "csv": csv_path.name,
        }

    if "tangency" in checks:
        if model.provenance == "family":
            params = model.internals["params"]
            H = fields.family_tangent_field(params.a, params.alpha)
        else:
            H = fields.rotation_field(1.0)
        res = fields.tangency_residuals(model, H, z1, z2)
        csv_path = out_dir / f"verify-{stamp}-tangency.csv"
        with open(csv_path, "w") as fh:
            fh.write("point,residual\n")
            for i, r in enumerate(res):
                fh.write(f"{i},{r:.17g}\n")
        worst = float(np.max(np.abs(res)))
        ok = worst < tols["tangency"]
        gates_ok &= ok
        summary["checks"]["tangency"] = {
            "max_residual": worst, "tolerance": tols["tangency"], "pass": ok,
            "field": H.kind, "csv": csv_path.name,
        }

    if "gradients" in checks:
        worst = _gradient_crosscheck(model, n_points=int(cfg.get("gradient_points", 200)))
        ok = worst < tols["gradient"]
        gates_ok &= ok
        summary["checks"]["gradients"] = {
            "max_relative_error": worst, "tolerance": tols["gradient"], "pass": ok,
        }

    summary["pass"] = gates_ok
    _write_report(out_dir / f"verify-{stamp}.json", summary)
    return EXIT_OK if gates_ok else EXIT_GATE


def _gradient_crosscheck(model, n_points=200, seed=0, h=1e-6):
    """Closed-form gradients against central differences; relative error."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.1 * model.eps0, 0.6 * model.eps0, n_points)
    th = rng.uniform(0, 2 * math.pi, n_points)
    z2 = r * np.exp(1j * th)
    d = model.delta0
    t = rng.uniform(d / 8, d / 2, n_points) * rng.choice([-1.0, 1.0], n_points)
    z1 = 1j * t - model._P(z2) - model._f(z2, t)
    g1, g2 = model.rho_gradient(z1, z2)

    worst = 0.0
    for i in range(n_points):
        zz1, zz2 = complex(z1[i]), complex(z2[i])
        fd1 = 0.5 * ((model.rho(zz1 + h, zz2) - model.rho(zz1 - h, zz2)) / (2 * h)
                     - 1j * (model.rho(zz1 + 1j * h, zz2) - model.rho(zz1 - 1j * h, zz2)) / (2 * h))
        fd2 = 0.5 * ((model.rho(zz1, zz2 + h) - model.rho(zz1, zz2 - h)) / (2 * h)
                     - 1j * (model.rho(zz1, zz2 + 1j * h) - model.rho(zz1, zz2 - 1j * h)) / (2 * h))
        for cf, fd in ((g1[i], fd1), (g2[i], fd2)):
            denom = max(abs(cf), abs(fd), 1e-4)
            worst = max(worst, abs(cf - fd) / denom)
    return worst


def _cmd_sample(cfg, out_dir, stamp, tols, jobs):
    model = _model_from_config(cfg.get("model", _DEFAULT_FAMILY))
    grid = _grid_from_config(model, cfg.get("grid"))
    t_values = _default_t_values(model, cfg.get("t_values"))
    pts = model.sample_points(grid, t_values)
    csv_path = out_dir / f"sample-{stamp}.csv"
    hypersurface.dump_samples_csv(pts, csv_path)
    _write_report(out_dir / f"sample-{stamp}.json",
                  {"command": "sample", "count": len(pts), "csv": csv_path.name})
    return EXIT_OK


def _cmd_flow(cfg, out_dir, stamp, tols, jobs):
    spec = flows.flow_spec_from_dict(cfg["flow"])
    ann = cfg.get("annulus", {})
    annulus = (float(ann.get("r_min", 0.0)), float(ann.get("r_max", 2.0)))
    tol = float(cfg.get("tol", 1e-11))
    traj = flows.integrate_flow(spec, annulus=annulus, tol=tol)
    csv_path = out_dir / f"flow-{stamp}.csv"
    flows.dump_trajectory_csv(traj, csv_path, profile=spec.profile)
    summary = {
        "command": "flow", "terminated": traj.terminated,
        "n_samples": len(traj), "t_final": float(traj.times[-1]),
        "step_stats": traj.step_stats, "csv": csv_path.name,
    }
    gates_ok = True
    if cfg.get("fit_window"):
        lo, hi = (float(x) for x in cfg["fit_window"])
        fit = flows.fit_power_law(traj, (lo, hi))
        summary["power_law_fit"] = {
            "slope": fit.slope, "stderr": fit.stderr, "n_samples": fit.n_samples,
            "power_law": fit.power_law,
        }
        if "expected_slope" in cfg:
            tol_slope = float(cfg.get("slope_tolerance", 0.02))
            ok = abs(fit.slope - float(cfg["expected_slope"])) <= tol_slope * abs(float(cfg["expected_slope"]))
            summary["power_law_fit"]["pass"] = ok
            gates_ok &= ok
    if cfg.get("compare_reference") and spec.ell >= 2:
        ref = flows.branch_from_start(spec.b, spec.k, spec.z0, spec.t_span[0])
        om = ref.value(traj.times)
        dev = float(np.max(np.abs(traj.points - om) / np.abs(om)))
        eps = flows.measured_epsilon(traj, ref)
        summary["reference"] = {
            "max_relative_deviation": dev,
            "eps_max": float(np.max(np.abs(eps[1:]))) if len(eps) > 1 else 0.0,
            "branch_window": ref.branch_window, "j": ref.j,
        }
        if "max_reference_deviation" in cfg:
            ok = dev <= float(cfg["max_reference_deviation"])
            summary["reference"]["pass"] = ok
            gates_ok &= ok
    summary["pass"] = gates_ok
    _write_report(out_dir / f"flow-{stamp}.json", summary)
    return EXIT_OK if gates_ok else EXIT_GATE


def _cmd_scenario(cfg, out_dir, stamp, tols, jobs):
    runs: list[tuple[str, flows.FlowSpec]] = []
    if cfg.get("standard", False) or "scenarios" not in cfg:
        runs = flows.standard_scenarios()
    for item in cfg.get("scenarios", []):
        runs.append((item["case"], flows.flow_spec_from_dict(item)))
    cc_tol = float(cfg.get("crosscheck_tol", 1e-4))

    def _one(args):
        label, spec = args
        return flows.run_growth_scenario(spec, label, crosscheck_tol=cc_tol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_one, runs))
    else:
        reports = [_one(r) for r in runs]

    gates_ok = all(r.agreement for r in reports)
    summary = {
        "command": "scenario",
        "reports": [r.to_dict() for r in reports],
        "pass": gates_ok,
    }
    _write_report(out_dir / f"scenario-{stamp}.json", summary)
    return EXIT_OK if gates_ok else EXIT_GATE


def _cmd_dim(cfg, out_dir, stamp, tols, jobs, seed=0):
    summary = {"command": "dim"}
    gates_ok = True
    threshold = float(cfg.get("threshold", tols["threshold"]))

    if "sweep" in cfg:
        sweep = cfg["sweep"]
        rng = np.random.default_rng(seed)
        count = int(sweep.get("count", 20))
        max_null = int(cfg.get("max_null_dim", 1))
        degree = int(cfg.get("degree", 6))
        draws = []
        for _ in range(count):
            params = hypersurface.random_family_params(
                rng, max_order=int(sweep.get("max_order", 8)),
                alpha_range=tuple(sweep.get("alpha_range", (-2.0, 2.0))),
            )
            model = hypersurface.build_family(params)
            grid, t_values = colloc.default_dim_grid(model)
            system = colloc.assemble(model, degree, grid, t_values)
            report = colloc.nullspace(system, threshold,
                                      gap_requirement=tols["gap_requirement"])
            draws.append({
                "alpha": params.alpha,
                "series_order": params.a.truncation_order,
                "null_dim": report.null_dim,
                "gap_ratio": report.gap_ratio,
                "verdict": report.verdict,
            })
            gates_ok &= report.null_dim <= max_null
        summary["sweep"] = {"count": count, "max_null_dim": max_null, "draws": draws}
    else:
        model = _model_from_config(cfg.get("model", {"type": "radial"}))
        degree = int(cfg.get("degree", 6))
        grid = _grid_from_config(model, cfg.get("grid"), n_radii=16, n_angles=40)
        t_values = _default_t_values(model, cfg.get("t_values"))
        system = colloc.assemble(model, degree, grid, t_values)
        refs = {"rotation": fields.rotation_field(1.0)}
        if model.provenance == "family":
            params = model.internals["params"]
            refs["family_tangent"] = fields.family_tangent_field(params.a, params.alpha)
        report = colloc.nullspace(system, threshold, references=refs,
                                  gap_requirement=tols["gap_requirement"])
        if cfg.get("dump_matrix", False):
            colloc.dump_matrix_csv(system, out_dir / f"dim-{stamp}-matrix.csv")
        summary.update(report.to_dict())
        summary["degree"] = degree
        if "expect_null_dim" in cfg:
            ok = (report.null_dim == int(cfg["expect_null_dim"])
                  and report.verdict == "definite")
            summary["expect_pass"] = ok
            gates_ok &= ok

    summary["pass"] = gates_ok
    _write_report(out_dir / f"dim-{stamp}.json", summary)
    return EXIT_OK if gates_ok else EXIT_GATE


def _cmd_flatness(cfg, out_dir, stamp, tols, jobs):
    orders = [int(n) for n in cfg.get("orders", list(range(1, 13)))]
    rcfg = cfg.get("radii", {})
    bound = float(cfg.get("bound", 1.0))
    expect = cfg.get("expect", "consistent")
    results = []
    gates_ok = True

    if "model" in cfg:
        model = _model_from_config(cfg["model"])
        r_min = float(rcfg.get("r_min", 0.05 * model.eps0))
        r_max = float(rcfg.get("r_max", 0.5 * model.eps0))
        radii = series.log_spaced_radii(r_min, r_max, int(rcfg.get("count", 8)))
        targets = cfg.get("targets", ["P", "P_z2"])
        probes = {}
        if "P" in targets:
            probes["P"] = lambda z: float(model._P(np.asarray(z)))
        if "P_z2" in targets:
            pz = model.internals["P_z"]
            probes["P_z2"] = lambda z: abs(complex(pz(np.asarray(z))))
    else:
        pcfg = cfg.get("profile", {"kind": "exp_inverse_power", "s": 2.0})
        profile = series.exp_inverse_power(float(pcfg.get("s", 2.0)))
        r_min = float(rcfg.get("r_min", 1e-2))
        r_max = float(rcfg.get("r_max", 0.3))
        radii = series.log_spaced_radii(r_min, r_max, int(rcfg.get("count", 8)))
        probes = {"profile": lambda z: profile.value(abs(z))}

    for name, fn in probes.items():
        for n in orders:
            rep = series.flatness_probe(fn, n, radii, bound=bound)
            ok = rep.consistent if expect == "consistent" else not rep.consistent
            gates_ok &= ok
            results.append({
                "target": name, "order": n, "verdict": rep.verdict,
                "max_ratio": rep.max_ratio,
                "violation_radius": rep.violation_radius, "pass": ok,
            })

    summary = {"command": "flatness", "bound": bound, "expect": expect,
               "results": results, "pass": gates_ok}
    _write_report(out_dir / f"flatness-{stamp}.json", summary)
    return EXIT_OK if gates_ok else EXIT_GATE


_DEFAULT_FAMILY = {
    "type": "family",
    "series": [[1.0, 0.0]],
    "alpha": 1.0,
    "p": {"kind": "exp_inverse_power", "s": 2.0},
    "q": {"kind": "zero"},
    "eps0": 0.6,
}

_COMMANDS = {
    "verify": _cmd_verify,
    "sample": _cmd_sample,
    "flow": _cmd_flow,
    "scenario": _cmd_scenario,
    "dim": _cmd_dim,
    "flatness": _cmd_flatness,
}


def _write_report(path: Path, obj: dict) -> None:
    path.write_text(canonical_json(obj) + "\n")
    print(f"wrote {path}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="crtangent",
        description="Batch runner for hypersurface verification, flows, "
                    "growth scenarios and dimension measurements.",
    )
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=".", help="output directory for reports")
    parser.add_argument("--seed", type=int, default=0, help="seed for random sweeps")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for batches")
    parser.add_argument("--tolerance-profile", choices=sorted(TOLERANCE_PROFILES),
                        default="default")
    args = parser.parse_args(argv)

    try:
        cfg = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
              file=sys.stderr)
        return EXIT_USAGE

    try:
        command = validate_config(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE

    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    tols = TOLERANCE_PROFILES[args.tolerance_profile]
    try:
        if command == "dim":
            code = _cmd_dim(cfg, out_dir, stamp, tols, args.jobs, seed=args.seed)
        else:
            code = _COMMANDS[command](cfg, out_dir, stamp, tols, args.jobs)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
